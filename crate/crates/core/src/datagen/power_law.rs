use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{DataShard, DeviceId, FederatedDataset};
use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerLawPartitionConfig {
    pub n_devices: usize,
    pub classes_per_device: usize,
    pub power_law_exponent: f64,
    pub min_samples: usize,
    /// Cap on the rows handed out; `None` uses as many as the class pools allow.
    pub max_total: Option<usize>,
}

impl Default for PowerLawPartitionConfig {
    fn default() -> Self {
        Self {
            n_devices: 1000,
            classes_per_device: 2,
            power_law_exponent: 1.5,
            min_samples: 4,
            max_total: None,
        }
    }
}

impl PowerLawPartitionConfig {
    pub fn validate(&self, n_classes: usize) -> Result<()> {
        if self.n_devices == 0 {
            return Err(Error::config("n_devices must be at least 1"));
        }
        if self.classes_per_device == 0 || self.classes_per_device > n_classes {
            return Err(Error::config(format!(
                "classes_per_device must be in 1..={n_classes}, got {}",
                self.classes_per_device
            )));
        }
        if self.min_samples < self.classes_per_device.max(2) {
            return Err(Error::config(
                "min_samples must cover every assigned class and allow a train/test split",
            ));
        }
        if !(self.power_law_exponent >= 0.0 && self.power_law_exponent.is_finite()) {
            return Err(Error::config("power_law_exponent must be finite and non-negative"));
        }
        Ok(())
    }
}

fn device_sizes(weights: &[f64], min: usize, extra: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .map(|w| min + (extra as f64 * w / total).floor() as usize)
        .collect()
}

fn class_demand(sizes: &[usize], classes: &[Vec<usize>], n_classes: usize) -> Vec<usize> {
    let mut demand = vec![0; n_classes];
    for (n, cls) in sizes.iter().zip(classes) {
        for (m, share) in per_class_shares(*n, cls.len()).into_iter().enumerate() {
            demand[cls[m]] += share;
        }
    }
    demand
}

fn per_class_shares(n: usize, c: usize) -> Vec<usize> {
    (0..c).map(|m| n / c + usize::from(m < n % c)).collect()
}

/// Split a labeled pool across devices. Each device holds
/// `classes_per_device` classes assigned round-robin over a seeded shuffle of
/// the class list; the device of rank `r` gets a size proportional to
/// `r^(-exponent)` on top of `min_samples`. Rows are drawn without
/// replacement, so the shards are disjoint.
pub fn partition_power_law(
    features: &[f64],
    labels: &[usize],
    n_features: usize,
    config: &PowerLawPartitionConfig,
    rng: &StreamRng,
) -> Result<FederatedDataset> {
    if n_features == 0 || features.len() != labels.len() * n_features {
        return Err(Error::config("feature matrix does not match label count"));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1).max(2);
    config.validate(n_classes)?;
    let (n_dev, c) = (config.n_devices, config.classes_per_device);

    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (row, &y) in labels.iter().enumerate() {
        pools[y].push(row);
    }
    for (k, pool) in pools.iter_mut().enumerate() {
        pool.shuffle(&mut rng.derive(Purpose::PowerLaw, 0, k as u64).generator());
    }

    let mut class_order: Vec<usize> = (0..n_classes).collect();
    class_order.shuffle(&mut rng.derive(Purpose::PowerLaw, 1, 0).generator());
    let assigned: Vec<Vec<usize>> = (0..n_dev)
        .map(|j| (0..c).map(|m| class_order[(j * c + m) % n_classes]).collect())
        .collect();

    let mut ranks: Vec<usize> = (1..=n_dev).collect();
    ranks.shuffle(&mut rng.derive(Purpose::PowerLaw, 2, 0).generator());
    let weights: Vec<f64> = ranks
        .iter()
        .map(|&r| (r as f64).powf(-config.power_law_exponent))
        .collect();

    let supply: Vec<usize> = pools.iter().map(Vec::len).collect();
    let base = class_demand(&vec![config.min_samples; n_dev], &assigned, n_classes);
    if let Some(k) = (0..n_classes).find(|&k| base[k] > supply[k]) {
        return Err(Error::config(format!(
            "class {k} pool exhausted: {} rows needed for the minimum allocation, {} available",
            base[k], supply[k]
        )));
    }

    let target = config.max_total.unwrap_or(labels.len()).min(labels.len());
    let mut extra = target.saturating_sub(n_dev * config.min_samples);
    let mut sizes = device_sizes(&weights, config.min_samples, extra);
    loop {
        let demand = class_demand(&sizes, &assigned, n_classes);
        let scale = (0..n_classes)
            .filter(|&k| demand[k] > supply[k])
            .map(|k| (supply[k] - base[k]) as f64 / (demand[k] - base[k]) as f64)
            .fold(f64::INFINITY, f64::min);
        if scale.is_infinite() {
            break;
        }
        let shrunk = (extra as f64 * scale).floor() as usize;
        extra = if shrunk < extra { shrunk } else { extra - 1 };
        sizes = device_sizes(&weights, config.min_samples, extra);
    }

    let mut cursor = vec![0usize; n_classes];
    let mut shards = Vec::with_capacity(n_dev);
    for (j, (&n, cls)) in sizes.iter().zip(&assigned).enumerate() {
        let mut rows = Vec::with_capacity(n);
        for (m, share) in per_class_shares(n, c).into_iter().enumerate() {
            let k = cls[m];
            rows.extend_from_slice(&pools[k][cursor[k]..cursor[k] + share]);
            cursor[k] += share;
        }
        rows.sort_unstable();
        let mut feats = Vec::with_capacity(n * n_features);
        for &r in &rows {
            feats.extend_from_slice(&features[r * n_features..(r + 1) * n_features]);
        }
        let labs = rows.iter().map(|&r| labels[r]).collect();
        shards.push(DataShard::new(DeviceId(j), n_features, feats, labs)?);
    }
    FederatedDataset::new(shards, n_classes, n_features)
}
