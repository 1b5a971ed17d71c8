use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{kernels, ModelSpec};
use crate::data::Rows;
use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 10,
            epochs: 20,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// `epochs` passes of mini-batch SGD over `rows`, reshuffling every epoch
/// from `rng`. The last partial batch is kept.
pub fn local_train(
    spec: &ModelSpec,
    params: &ParamVector,
    rows: Rows<'_>,
    cfg: &SgdConfig,
    rng: &StreamRng,
) -> Result<ParamVector> {
    cfg.validate()?;
    spec.check(params)?;
    spec.check_rows(&rows)?;
    if cfg.epochs == 0 {
        return Ok(params.clone());
    }
    if rows.is_empty() {
        return Err(Error::config(format!(
            "device {} has no training rows",
            rows.shard().device()
        )));
    }

    let shard = rows.shard();
    let mut theta = params.values().to_vec();
    let mut grad = vec![0.0; theta.len()];
    let mut scratch = kernels::Scratch::new(spec);
    let mut order = rows.index().to_vec();
    let mut g = rng.generator();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut g);
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|v| *v = 0.0);
            for &i in batch {
                kernels::accumulate_gradient(spec, &theta, shard.row(i), shard.label(i), &mut scratch, &mut grad);
            }
            let step = cfg.learning_rate / batch.len() as f64;
            for (t, gv) in theta.iter_mut().zip(&grad) {
                *t -= step * gv;
            }
        }
    }
    params.with_values(theta)
}
