use log::info;
use serde::{Deserialize, Serialize};

use crate::data::{split_train_test, FederatedDataset};
use crate::datagen::{gen_syncov, gen_synlabel, load_idx, partition_power_law, SynCovConfig};
use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::protocol::{run_round, FederationState, Protocol, RoundContext};
use crate::rng::{Purpose, StreamRng};

use super::{DatasetSpec, ExperimentConfig, MetricsLog};

/// Generates or loads the configured dataset and splits it into train and
/// test rows. Everything here is driven by the data seed.
pub fn build_dataset(config: &ExperimentConfig) -> Result<FederatedDataset> {
    let seed = config.seeds.data;
    let raw = match &config.dataset {
        DatasetSpec::Syncov(c) => gen_syncov(&SynCovConfig { seed, ..c.clone() })?,
        DatasetSpec::Synlabel(c) => {
            let mut c = c.clone();
            c.base.seed = seed;
            gen_synlabel(&c)?
        }
        DatasetSpec::Idx {
            images,
            labels,
            partition,
        } => {
            let idx = load_idx(images, labels)?;
            partition_power_law(
                &idx.features,
                &idx.labels,
                idx.n_features,
                partition,
                &StreamRng::new(seed),
            )?
        }
    };
    split_train_test(raw, &StreamRng::new(seed))
}

/// Runs the configured experiment from scratch.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsLog> {
    config.validate()?;
    let dataset = build_dataset(config)?;
    run_experiment_on(config, &dataset)
}

/// Runs `config` on an already built dataset, which must be the one
/// `build_dataset(config)` would produce for the echoed config to be honest.
pub fn run_experiment_on(config: &ExperimentConfig, dataset: &FederatedDataset) -> Result<MetricsLog> {
    train_federation(config, dataset).map(|(log, _)| log)
}

/// Like [`run_experiment_on`] but also hands back the final global model.
pub fn train_federation(config: &ExperimentConfig, dataset: &FederatedDataset) -> Result<(MetricsLog, ParamVector)> {
    config.validate()?;
    let mut resolved = config.clone();
    resolved.model.n_features = dataset.n_features();
    resolved.model.n_classes = dataset.n_classes();
    resolved.model.validate()?;
    resolved.round.validate(dataset.n_devices())?;

    let rng = StreamRng::new(resolved.seeds.protocol);
    let mut state = FederationState::new(resolved.model.init(&rng.derive(Purpose::Init, 0, 0)));
    let ctx = RoundContext {
        dataset,
        model: &resolved.model,
        sgd: &resolved.sgd,
        round: &resolved.round,
        link: &resolved.comm,
        rng,
    };
    for _ in 0..resolved.rounds {
        state = run_round(state, &ctx)?;
    }
    if let Some(last) = state.log.last() {
        info!(
            "{} seed {}: {} rounds, final accuracy {:.4}",
            resolved.round.protocol.as_str(),
            resolved.seeds.protocol,
            state.round,
            last.mean_test_accuracy
        );
    }
    let log = MetricsLog {
        config: resolved,
        rows: state.log,
    };
    Ok((log, state.global))
}

/// Headline numbers of one run in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub protocol: Protocol,
    pub seed: u64,
    pub straggler_rate: f64,
    pub partitions: usize,
    pub per_partition: usize,
    pub sample_size: usize,
    pub best_accuracy: f64,
    pub final_accuracy: f64,
    pub max_jump: f64,
}

impl RunSummary {
    pub fn of(log: &MetricsLog) -> Self {
        let c = &log.config;
        Self {
            protocol: c.round.protocol,
            seed: c.seeds.protocol,
            straggler_rate: c.round.straggler_rate,
            partitions: c.round.partitions,
            per_partition: c.round.per_partition,
            sample_size: c.round.sample_size,
            best_accuracy: log.best_accuracy(),
            final_accuracy: log.final_accuracy(),
            max_jump: log.max_jump(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub logs: Vec<MetricsLog>,
    pub summary: Vec<RunSummary>,
}

impl SweepResult {
    fn from_logs(logs: Vec<MetricsLog>) -> Self {
        let summary = logs.iter().map(RunSummary::of).collect();
        Self { logs, summary }
    }
}

/// Runs each config variant for every seed. A seed sets both the data and
/// the protocol seed, so all variants sharing a seed are paired: they see
/// the same dataset and the same random streams.
fn run_paired(base: &ExperimentConfig, variants: &[ExperimentConfig], seeds: &[u64]) -> Result<SweepResult> {
    if seeds.is_empty() {
        return Err(Error::config("at least one seed is required"));
    }
    base.validate()?;
    let mut logs = Vec::with_capacity(variants.len() * seeds.len());
    for &seed in seeds {
        let mut seeded = base.clone();
        seeded.seeds.data = seed;
        seeded.seeds.protocol = seed;
        let dataset = build_dataset(&seeded)?;
        for v in variants {
            let mut cfg = v.clone();
            cfg.seeds = seeded.seeds;
            logs.push(run_experiment_on(&cfg, &dataset)?);
        }
    }
    Ok(SweepResult::from_logs(logs))
}

/// Both protocols at every straggler rate, paired by seed. Logs are ordered
/// by seed, then rate, then FedAvg before FedP2P.
pub fn run_straggler_comparison(config: &ExperimentConfig, rates: &[f64], seeds: &[u64]) -> Result<SweepResult> {
    let mut variants = Vec::new();
    for &rate in rates {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::config(format!("straggler rate {rate} outside [0, 1]")));
        }
        for protocol in [Protocol::FedAvg, Protocol::FedP2P] {
            let mut cfg = config.clone();
            cfg.round.protocol = protocol;
            cfg.round.straggler_rate = rate;
            variants.push(cfg);
        }
    }
    run_paired(config, &variants, seeds)
}

/// FedP2P at each `(L, Q)` pair, paired by seed.
pub fn run_lq_sweep(config: &ExperimentConfig, pairs: &[(usize, usize)], seeds: &[u64]) -> Result<SweepResult> {
    let variants: Vec<ExperimentConfig> = pairs
        .iter()
        .map(|&(l, q)| {
            let mut cfg = config.clone();
            cfg.round.protocol = Protocol::FedP2P;
            cfg.round.partitions = l;
            cfg.round.per_partition = q;
            cfg
        })
        .collect();
    run_paired(config, &variants, seeds)
}

/// Runs `f` inside a dedicated rayon pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
