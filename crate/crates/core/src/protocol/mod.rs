//! Round engines for FedAvg and FedP2P.
//!
//! A FedAvg round samples `sample_size` devices, drops stragglers, trains
//! the survivors from the global model and replaces the global model with
//! their data-size-weighted average.
//!
//! A FedP2P round randomly splits all devices into `partitions` local P2P
//! networks, samples `per_partition` devices in each, drops stragglers,
//! trains the survivors, synchronises each network with a data-size-weighted
//! average (the simulated Allreduce), and finally averages the network
//! models at the server.

mod aggregate;
mod allreduce;
mod engine;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use aggregate::{aggregate_global, aggregate_weighted, data_weights};
pub use allreduce::{ring_aggregate_weighted, ring_allreduce};
pub use engine::{
    evaluate_federation, run_round, run_round_fedavg, run_round_fedp2p, FederationState, RoundContext, RoundRecord,
};
pub use sampling::{apply_stragglers, partition_p2p, sample_devices, survivor_count, P2PPartition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    FedAvg,
    FedP2P,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::FedAvg => "fedavg",
            Protocol::FedP2P => "fedp2p",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fedavg" => Ok(Protocol::FedAvg),
            "fedp2p" => Ok(Protocol::FedP2P),
            other => Err(Error::Parse(format!("unknown protocol `{other}`"))),
        }
    }
}

/// Server-side weighting of the P2P network models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalWeighting {
    /// `θ_G = L⁻¹ Σ θ_{Z_l}`.
    #[default]
    Uniform,
    /// `ψ_l` proportional to the training rows that contributed to `θ_{Z_l}`.
    DataSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundConfig {
    pub protocol: Protocol,
    /// `L`, number of local P2P networks (fedp2p).
    pub partitions: usize,
    /// `Q`, devices sampled inside each network (fedp2p).
    pub per_partition: usize,
    /// `|Z|`, devices sampled per round (fedavg).
    pub sample_size: usize,
    pub straggler_rate: f64,
    pub local_sync_rounds: usize,
    pub global_weighting: GlobalWeighting,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::FedP2P,
            partitions: 10,
            per_partition: 1,
            sample_size: 10,
            straggler_rate: 0.0,
            local_sync_rounds: 1,
            global_weighting: GlobalWeighting::Uniform,
        }
    }
}

impl RoundConfig {
    pub fn fedavg(sample_size: usize) -> Self {
        Self {
            protocol: Protocol::FedAvg,
            sample_size,
            ..Self::default()
        }
    }

    pub fn fedp2p(partitions: usize, per_partition: usize) -> Self {
        Self {
            protocol: Protocol::FedP2P,
            partitions,
            per_partition,
            ..Self::default()
        }
    }

    /// Devices trained per round before stragglers are dropped.
    pub fn devices_per_round(&self) -> usize {
        match self.protocol {
            Protocol::FedAvg => self.sample_size,
            Protocol::FedP2P => self.partitions * self.per_partition,
        }
    }

    pub fn validate(&self, n_devices: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.straggler_rate) {
            return Err(Error::config(format!(
                "straggler_rate must be in [0, 1], got {}",
                self.straggler_rate
            )));
        }
        match self.protocol {
            Protocol::FedAvg => {
                if self.sample_size > n_devices {
                    return Err(Error::config(format!(
                        "sample_size {} exceeds {n_devices} devices",
                        self.sample_size
                    )));
                }
            }
            Protocol::FedP2P => {
                if self.partitions == 0 {
                    return Err(Error::config("fedp2p needs at least one partition"));
                }
                if self.local_sync_rounds == 0 {
                    return Err(Error::config("local_sync_rounds must be at least 1"));
                }
                if self.partitions * self.per_partition > n_devices {
                    return Err(Error::config(format!(
                        "L*Q = {}*{} exceeds {n_devices} devices",
                        self.partitions, self.per_partition
                    )));
                }
            }
        }
        Ok(())
    }
}
