//! Per-device labeled data and the federated collection of shards.

use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DeviceId(pub usize);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

/// Row-major feature matrix plus class labels for one device.
#[derive(Debug, Clone, PartialEq)]
pub struct DataShard {
    device: DeviceId,
    n_features: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl DataShard {
    pub fn new(device: DeviceId, n_features: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::config("shards need at least one feature column"));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::config(format!(
                "device {device}: {} feature values for {} labels of width {n_features}",
                features.len(),
                labels.len()
            )));
        }
        Ok(Self {
            device,
            n_features,
            features,
            labels,
        })
    }

    pub fn device(&self) -> DeviceId {
        self.device
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// Row indices of a shard assigned to training and testing.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederatedDataset {
    shards: Vec<DataShard>,
    n_classes: usize,
    n_features: usize,
    splits: Vec<Split>,
}

impl FederatedDataset {
    /// Validates dense device ids, shared feature width and label range.
    pub fn new(shards: Vec<DataShard>, n_classes: usize, n_features: usize) -> Result<Self> {
        if shards.is_empty() {
            return Err(Error::config("a federation needs at least one device"));
        }
        if n_classes < 2 {
            return Err(Error::config("at least two classes are required"));
        }
        for (i, shard) in shards.iter().enumerate() {
            if shard.device != DeviceId(i) {
                return Err(Error::config(format!(
                    "shard {i} belongs to {}; device ids must be dense and ordered",
                    shard.device
                )));
            }
            if shard.n_features != n_features {
                return Err(Error::config(format!(
                    "device {} has {} features, expected {n_features}",
                    shard.device, shard.n_features
                )));
            }
            if let Some(bad) = shard.labels.iter().find(|&&y| y >= n_classes) {
                return Err(Error::config(format!(
                    "device {} has label {bad} outside 0..{n_classes}",
                    shard.device
                )));
            }
        }
        Ok(Self {
            shards,
            n_classes,
            n_features,
            splits: Vec::new(),
        })
    }

    pub fn shards(&self) -> &[DataShard] {
        &self.shards
    }

    pub fn shard(&self, device: DeviceId) -> &DataShard {
        &self.shards[device.0]
    }

    pub fn n_devices(&self) -> usize {
        self.shards.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn devices(&self) -> Vec<DeviceId> {
        (0..self.shards.len()).map(DeviceId).collect()
    }

    pub fn total_rows(&self) -> usize {
        self.shards.iter().map(DataShard::len).sum()
    }

    /// `p_i = |D_i| / |D|`.
    pub fn quantity_weights(&self) -> Vec<f64> {
        let total = self.total_rows() as f64;
        self.shards.iter().map(|s| s.len() as f64 / total).collect()
    }

    pub fn is_split(&self) -> bool {
        !self.splits.is_empty()
    }

    pub fn split_of(&self, device: DeviceId) -> Option<&Split> {
        self.splits.get(device.0)
    }

    /// Training rows of a device; empty when the dataset has not been split.
    pub fn train_rows(&self, device: DeviceId) -> Rows<'_> {
        let index = self.splits.get(device.0).map(|s| s.train.as_slice()).unwrap_or(&[]);
        Rows::new(self.shard(device), index)
    }

    pub fn test_rows(&self, device: DeviceId) -> Rows<'_> {
        let index = self.splits.get(device.0).map(|s| s.test.as_slice()).unwrap_or(&[]);
        Rows::new(self.shard(device), index)
    }

    /// Number of training rows, the `|D_i|` used for aggregation weights.
    pub fn train_size(&self, device: DeviceId) -> usize {
        self.splits.get(device.0).map_or(0, |s| s.train.len())
    }
}

/// A view of selected rows of one shard.
#[derive(Debug, Clone, Copy)]
pub struct Rows<'a> {
    shard: &'a DataShard,
    index: &'a [usize],
}

impl<'a> Rows<'a> {
    pub fn new(shard: &'a DataShard, index: &'a [usize]) -> Self {
        Self { shard, index }
    }

    pub fn shard(&self) -> &'a DataShard {
        self.shard
    }

    pub fn index(&self) -> &'a [usize] {
        self.index
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'a [f64], usize)> + 'a {
        let shard = self.shard;
        self.index.iter().map(move |&i| (shard.row(i), shard.label(i)))
    }
}

/// Rows held out for testing: `floor(n / 5)`.
pub fn test_count(n: usize) -> usize {
    n / 5
}

/// Shuffle each shard with its own device stream and hold out 20% of rows
/// (rounded down) for testing. Index lists are stored sorted.
pub fn split_train_test(mut dataset: FederatedDataset, rng: &StreamRng) -> Result<FederatedDataset> {
    let mut splits = Vec::with_capacity(dataset.shards.len());
    for shard in &dataset.shards {
        let n = shard.len();
        if n < 2 {
            return Err(Error::config(format!(
                "device {} has {n} rows; a train/test split needs at least 2",
                shard.device
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng.derive(Purpose::Split, 0, shard.device.0 as u64).generator());
        let n_test = test_count(n);
        let mut test = order[..n_test].to_vec();
        let mut train = order[n_test..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        splits.push(Split { train, test });
    }
    dataset.splits = splits;
    Ok(dataset)
}
