use log::debug;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::{Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{DataShard, DeviceId, FederatedDataset};
use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynCovConfig {
    pub n_devices: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub lognormal_mu: f64,
    pub lognormal_sigma: f64,
    pub min_samples: usize,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SynCovConfig {
    fn default() -> Self {
        Self {
            n_devices: 100,
            n_features: 60,
            n_classes: 10,
            lognormal_mu: 4.0,
            lognormal_sigma: 2.0,
            min_samples: 10,
            seed: 0,
        }
    }
}

impl SynCovConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_devices < 1 {
            return Err(Error::config("n_devices must be at least 1"));
        }
        if self.n_features < 1 {
            return Err(Error::config("n_features must be at least 1"));
        }
        if self.n_classes < 2 {
            return Err(Error::config("n_classes must be at least 2"));
        }
        if self.min_samples < 2 {
            return Err(Error::config("min_samples must be at least 2"));
        }
        if !(self.lognormal_sigma > 0.0 && self.lognormal_sigma.is_finite()) {
            return Err(Error::config("lognormal_sigma must be positive"));
        }
        if !self.lognormal_mu.is_finite() {
            return Err(Error::config("lognormal_mu must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynLabelConfig {
    #[serde(flatten)]
    pub base: SynCovConfig,
    pub dirichlet_beta: f64,
}

impl Default for SynLabelConfig {
    fn default() -> Self {
        Self {
            base: SynCovConfig::default(),
            dirichlet_beta: 0.5,
        }
    }
}

impl SynLabelConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.dirichlet_beta > 0.0 && self.dirichlet_beta.is_finite()) {
            return Err(Error::config("dirichlet_beta must be positive"));
        }
        Ok(())
    }
}

/// Per-device sample counts `max(min_samples, round(exp(z_i)))` with
/// `z_i ~ Normal(mu, sigma²)`, drawn in device order from one stream.
pub fn quantity_skew(
    n_devices: usize,
    lognormal_mu: f64,
    lognormal_sigma: f64,
    min_samples: usize,
    rng: &StreamRng,
) -> Result<Vec<usize>> {
    let normal =
        Normal::new(lognormal_mu, lognormal_sigma).map_err(|e| Error::config(format!("lognormal parameters: {e}")))?;
    let mut g = rng.generator();
    Ok((0..n_devices)
        .map(|_| {
            let z: f64 = normal.sample(&mut g);
            (z.exp().round() as usize).max(min_samples)
        })
        .collect())
}

/// Shared linear labeler `y = argmax(W x + b)`, `W` row-major `K × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeler {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub n_features: usize,
}

impl Labeler {
    /// Ties go to the lowest class index.
    pub fn label(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (k, (w, b)) in self.weight.chunks_exact(self.n_features).zip(&self.bias).enumerate() {
            let score = b + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            if score > best_score {
                best_score = score;
                best = k;
            }
        }
        best
    }
}

/// A SynCov dataset together with the parameters it was drawn from.
#[derive(Debug, Clone)]
pub struct SynCov {
    pub dataset: FederatedDataset,
    pub labeler: Labeler,
    /// `(mu_i, sigma_i)` as drawn; the feature scale is `|sigma_i|`.
    pub device_params: Vec<(f64, f64)>,
}

pub fn gen_syncov(config: &SynCovConfig) -> Result<FederatedDataset> {
    gen_syncov_with_params(config).map(|s| s.dataset)
}

pub fn gen_syncov_with_params(config: &SynCovConfig) -> Result<SynCov> {
    config.validate()?;
    let root = StreamRng::new(config.seed);
    let (d, k) = (config.n_features, config.n_classes);
    let counts = quantity_skew(
        config.n_devices,
        config.lognormal_mu,
        config.lognormal_sigma,
        config.min_samples,
        &root.derive(Purpose::Quantity, 0, 0),
    )?;

    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut g = root.derive(Purpose::Labeler, 0, 0).generator();
    let weight: Vec<f64> = (0..k * d).map(|_| std_normal.sample(&mut g)).collect();
    let bias: Vec<f64> = (0..k).map(|_| std_normal.sample(&mut g)).collect();
    let labeler = Labeler {
        weight,
        bias,
        n_features: d,
    };

    let mut shards = Vec::with_capacity(config.n_devices);
    let mut device_params = Vec::with_capacity(config.n_devices);
    for (i, &n) in counts.iter().enumerate() {
        let mut g = root.derive(Purpose::DeviceData, 0, i as u64).generator();
        let mu: f64 = std_normal.sample(&mut g);
        let sigma: f64 = std_normal.sample(&mut g);
        let scale = sigma.abs();
        let mut features = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let start = features.len();
            features.extend((0..d).map(|_| mu + scale * std_normal.sample(&mut g)));
            labels.push(labeler.label(&features[start..]));
        }
        log_degenerate(i, &labels);
        device_params.push((mu, sigma));
        shards.push(DataShard::new(DeviceId(i), d, features, labels)?);
    }
    Ok(SynCov {
        dataset: FederatedDataset::new(shards, k, d)?,
        labeler,
        device_params,
    })
}

/// A SynLabel dataset together with its generating parameters.
#[derive(Debug, Clone)]
pub struct SynLabel {
    pub dataset: FederatedDataset,
    /// `(mu_y, sigma_y)` per class, shared by every device.
    pub class_params: Vec<(f64, f64)>,
    /// Per-device class distribution `q_i`.
    pub class_distributions: Vec<Vec<f64>>,
}

pub fn gen_synlabel(config: &SynLabelConfig) -> Result<FederatedDataset> {
    gen_synlabel_with_params(config).map(|s| s.dataset)
}

pub fn gen_synlabel_with_params(config: &SynLabelConfig) -> Result<SynLabel> {
    config.validate()?;
    let base = &config.base;
    let root = StreamRng::new(base.seed);
    let (d, k) = (base.n_features, base.n_classes);
    let counts = quantity_skew(
        base.n_devices,
        base.lognormal_mu,
        base.lognormal_sigma,
        base.min_samples,
        &root.derive(Purpose::Quantity, 0, 0),
    )?;

    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut g = root.derive(Purpose::ClassParams, 0, 0).generator();
    let class_params: Vec<(f64, f64)> = (0..k)
        .map(|_| (std_normal.sample(&mut g), std_normal.sample(&mut g)))
        .collect();

    let gamma = Gamma::new(config.dirichlet_beta, 1.0).map_err(|e| Error::config(format!("dirichlet_beta: {e}")))?;
    let mut shards = Vec::with_capacity(base.n_devices);
    let mut class_distributions = Vec::with_capacity(base.n_devices);
    for (i, &n) in counts.iter().enumerate() {
        let mut g = root.derive(Purpose::DeviceData, 0, i as u64).generator();
        let q = dirichlet(&gamma, k, &mut g);
        let classes = WeightedIndex::new(&q).map_err(|e| Error::config(format!("class distribution: {e}")))?;
        let mut features = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let y = classes.sample(&mut g);
            let (mu, sigma) = class_params[y];
            let scale = sigma.abs();
            features.extend((0..d).map(|_| mu + scale * std_normal.sample(&mut g)));
            labels.push(y);
        }
        log_degenerate(i, &labels);
        class_distributions.push(q);
        shards.push(DataShard::new(DeviceId(i), d, features, labels)?);
    }
    Ok(SynLabel {
        dataset: FederatedDataset::new(shards, k, d)?,
        class_params,
        class_distributions,
    })
}

/// Symmetric Dirichlet via normalised Gamma draws.
fn dirichlet<R: rand::Rng>(gamma: &Gamma<f64>, k: usize, g: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(g)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.into_iter().map(|x| x / total).collect()
    } else {
        // every gamma draw underflowed (tiny beta): all mass on one class
        let mut q = vec![0.0; k];
        q[0] = 1.0;
        q
    }
}

fn log_degenerate(device: usize, labels: &[usize]) {
    if let Some(&first) = labels.first() {
        if labels.iter().all(|&y| y == first) {
            debug!("device C{device}: all {} rows carry label {first}", labels.len());
        }
    }
}
