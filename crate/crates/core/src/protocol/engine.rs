use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commcost::{self, CommConfig, LinkConfig};
use crate::data::{DeviceId, FederatedDataset};
use crate::error::{Error, Result};
use crate::models::{self, local_train, ModelSpec, SgdConfig};
use crate::params::ParamVector;
use crate::rng::{Purpose, StreamRng};

use super::{
    aggregate_global, aggregate_weighted, apply_stragglers, partition_p2p, sample_devices, Protocol, RoundConfig,
};

/// One row of the per-round metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based index of the completed round.
    pub round: usize,
    pub protocol: Protocol,
    pub mean_test_accuracy: f64,
    pub mean_train_loss: f64,
    /// Devices selected before stragglers were dropped.
    pub participated: usize,
    pub survivors: usize,
    /// Modelled communication time of the round in seconds.
    pub comm_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationState {
    pub global: ParamVector,
    /// Completed rounds.
    pub round: usize,
    pub log: Vec<RoundRecord>,
}

impl FederationState {
    pub fn new(global: ParamVector) -> Self {
        Self {
            global,
            round: 0,
            log: Vec::new(),
        }
    }
}

/// Everything a round needs besides the evolving state.
///
/// Random streams are derived from `rng` as follows (`t` = zero-based round):
/// sampling `(Sample, t, l)`, stragglers `(Straggle, t, l)`, partitioning
/// `(Partition, t, 0)` and training `(Train, t, device, sync)`, where `l` is
/// the P2P network index (always 0 for FedAvg) and `sync` the local
/// synchronisation repeat.
#[derive(Debug, Clone, Copy)]
pub struct RoundContext<'a> {
    pub dataset: &'a FederatedDataset,
    pub model: &'a ModelSpec,
    pub sgd: &'a SgdConfig,
    pub round: &'a RoundConfig,
    pub link: &'a LinkConfig,
    pub rng: StreamRng,
}

/// Train each device from `start` in parallel; output order follows `devices`.
fn train_devices(
    ctx: &RoundContext<'_>,
    start: &ParamVector,
    devices: &[DeviceId],
    t: u64,
    sync: u64,
) -> Result<Vec<(DeviceId, ParamVector, usize)>> {
    devices
        .par_iter()
        .map(|&d| {
            let rng = ctx.rng.derive_sub(Purpose::Train, t, d.0 as u64, sync);
            let trained = local_train(ctx.model, start, ctx.dataset.train_rows(d), ctx.sgd, &rng)?;
            Ok((d, trained, ctx.dataset.train_size(d)))
        })
        .collect()
}

fn model_bytes(ctx: &RoundContext<'_>) -> f64 {
    ctx.link.model_bytes.unwrap_or(8.0 * ctx.model.param_count() as f64)
}

fn finish_round(
    mut state: FederationState,
    ctx: &RoundContext<'_>,
    global: ParamVector,
    participated: usize,
    survivors: usize,
    comm_time_s: f64,
) -> Result<FederationState> {
    global.check_finite()?;
    let (acc, loss) = evaluate_federation(&global, ctx.dataset, ctx.model)?;
    state.global = global;
    state.round += 1;
    state.log.push(RoundRecord {
        round: state.round,
        protocol: ctx.round.protocol,
        mean_test_accuracy: acc,
        mean_train_loss: loss,
        participated,
        survivors,
        comm_time_s,
    });
    Ok(state)
}

pub fn run_round(state: FederationState, ctx: &RoundContext<'_>) -> Result<FederationState> {
    let round = state.round + 1;
    let out = match ctx.round.protocol {
        Protocol::FedAvg => run_round_fedavg(state, ctx),
        Protocol::FedP2P => run_round_fedp2p(state, ctx),
    };
    out.map_err(|e| Error::Round {
        round,
        source: Box::new(e),
    })
}

/// One FedAvg round: sample, drop stragglers, train, data-weighted average.
pub fn run_round_fedavg(state: FederationState, ctx: &RoundContext<'_>) -> Result<FederationState> {
    let cfg = ctx.round;
    cfg.validate(ctx.dataset.n_devices())?;
    let t = state.round as u64;
    let pool = ctx.dataset.devices();
    let selected = sample_devices(&pool, cfg.sample_size, &ctx.rng.derive(Purpose::Sample, t, 0))?;
    let survivors = apply_stragglers(&selected, cfg.straggler_rate, &ctx.rng.derive(Purpose::Straggle, t, 0))?;

    if survivors.is_empty() {
        debug!("round {}: every selected device dropped; global model unchanged", t + 1);
        let global = state.global.clone();
        return finish_round(state, ctx, global, selected.len(), 0, 0.0);
    }

    let trained = train_devices(ctx, &state.global, &survivors, t, 0)?;
    let global = aggregate_weighted(&trained)?;
    let comm = CommConfig {
        model_bytes: model_bytes(ctx),
        server_bandwidth: ctx.link.server_bandwidth,
        device_bandwidth: ctx.link.device_bandwidth,
        alpha: ctx.link.alpha,
        devices: survivors.len() as f64,
        partitions: None,
    };
    finish_round(
        state,
        ctx,
        global,
        selected.len(),
        survivors.len(),
        commcost::h_avg(&comm),
    )
}

/// One FedP2P round: form networks, sample and train inside each,
/// synchronise per network, then aggregate the network models.
pub fn run_round_fedp2p(state: FederationState, ctx: &RoundContext<'_>) -> Result<FederationState> {
    let cfg = ctx.round;
    cfg.validate(ctx.dataset.n_devices())?;
    let t = state.round as u64;
    let pool = ctx.dataset.devices();
    let partition = partition_p2p(
        &pool,
        cfg.partitions,
        state.round,
        &ctx.rng.derive(Purpose::Partition, t, 0),
    )?;

    let mut participated = 0;
    let mut members: Vec<(usize, Vec<DeviceId>)> = Vec::with_capacity(partition.len());
    for (l, group) in partition.groups.iter().enumerate() {
        let selected = sample_devices(group, cfg.per_partition, &ctx.rng.derive(Purpose::Sample, t, l as u64))?;
        let survivors = apply_stragglers(
            &selected,
            cfg.straggler_rate,
            &ctx.rng.derive(Purpose::Straggle, t, l as u64),
        )?;
        participated += selected.len();
        if survivors.is_empty() {
            debug!("round {}: network {l} lost every device and is skipped", t + 1);
        } else {
            members.push((l, survivors));
        }
    }
    let survivors: usize = members.iter().map(|(_, m)| m.len()).sum();
    if members.is_empty() {
        debug!("round {}: every network empty; global model unchanged", t + 1);
        let global = state.global.clone();
        return finish_round(state, ctx, global, participated, 0, 0.0);
    }

    // phase 2: local training and in-network synchronisation
    let mut network_models: Vec<ParamVector> = vec![state.global.clone(); members.len()];
    for sync in 0..cfg.local_sync_rounds as u64 {
        let jobs: Vec<(usize, DeviceId)> = members
            .iter()
            .enumerate()
            .flat_map(|(slot, (_, devs))| devs.iter().map(move |&d| (slot, d)))
            .collect();
        let trained: Vec<(usize, (DeviceId, ParamVector, usize))> = jobs
            .par_iter()
            .map(|&(slot, d)| {
                let rng = ctx.rng.derive_sub(Purpose::Train, t, d.0 as u64, sync);
                let p = local_train(
                    ctx.model,
                    &network_models[slot],
                    ctx.dataset.train_rows(d),
                    ctx.sgd,
                    &rng,
                )?;
                Ok((slot, (d, p, ctx.dataset.train_size(d))))
            })
            .collect::<Result<_>>()?;
        let mut per_slot: Vec<Vec<(DeviceId, ParamVector, usize)>> = vec![Vec::new(); members.len()];
        for (slot, m) in trained {
            per_slot[slot].push(m);
        }
        network_models = per_slot.iter().map(|m| aggregate_weighted(m)).collect::<Result<_>>()?;
    }

    // phase 3: server aggregation over the networks that still have devices
    let partition_models: Vec<(usize, ParamVector, usize)> = members
        .iter()
        .zip(network_models)
        .map(|((l, devs), model)| {
            let size = devs.iter().map(|&d| ctx.dataset.train_size(d)).sum();
            (*l, model, size)
        })
        .collect();
    let global = aggregate_global(&partition_models, cfg.global_weighting)?;

    let m = model_bytes(ctx);
    let comm = CommConfig {
        model_bytes: m,
        server_bandwidth: ctx.link.server_bandwidth,
        device_bandwidth: ctx.link.device_bandwidth,
        alpha: ctx.link.alpha,
        devices: survivors as f64,
        partitions: Some(partition_models.len() as f64),
    };
    let extra_syncs = (cfg.local_sync_rounds - 1) as f64 * 2.0 * m / ctx.link.device_bandwidth;
    let comm_time = commcost::h_p2p_with(&comm, ctx.link.allreduce)? + extra_syncs;
    finish_round(state, ctx, global, participated, survivors, comm_time)
}

/// Unweighted mean over devices of test accuracy and of training loss
/// under `params`. Devices without test rows are left out of the accuracy
/// mean; devices without training rows are left out of the loss mean.
pub fn evaluate_federation(params: &ParamVector, dataset: &FederatedDataset, spec: &ModelSpec) -> Result<(f64, f64)> {
    let per_device: Vec<(Option<f64>, Option<f64>)> = dataset
        .devices()
        .par_iter()
        .map(|&d| {
            let test = dataset.test_rows(d);
            let train = dataset.train_rows(d);
            let acc = if test.is_empty() {
                None
            } else {
                Some(models::evaluate(spec, params, test)?)
            };
            let loss = if train.is_empty() {
                None
            } else {
                Some(models::loss(spec, params, train)?)
            };
            Ok((acc, loss))
        })
        .collect::<Result<_>>()?;
    let mean = |xs: Vec<f64>| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    };
    let accs = per_device.iter().filter_map(|p| p.0).collect();
    let losses = per_device.iter().filter_map(|p| p.1).collect();
    Ok((mean(accs), mean(losses)))
}
