use std::path::Path;

use crate::data::FederatedDataset;
use crate::error::{Error, Result};

/// One row per sample: `device,split,label,x0..x{d-1}`. `split` is `train`,
/// `test`, or `all` when the dataset has not been split.
pub fn write_dataset_csv(dataset: &FederatedDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["device".to_string(), "split".into(), "label".into()];
    header.extend((0..dataset.n_features()).map(|j| format!("x{j}")));
    w.write_record(&header).map_err(csv_err)?;

    for shard in dataset.shards() {
        let mut kind = vec!["all"; shard.len()];
        if let Some(split) = dataset.split_of(shard.device()) {
            split.train.iter().for_each(|&i| kind[i] = "train");
            split.test.iter().for_each(|&i| kind[i] = "test");
        }
        for (i, tag) in kind.iter().enumerate() {
            let mut rec = vec![
                shard.device().0.to_string(),
                tag.to_string(),
                shard.label(i).to_string(),
            ];
            rec.extend(shard.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
