//! Deterministic simulator for centralized (FedAvg) and partially
//! decentralized (FedP2P) federated learning.
//!
//! The crate is organised bottom-up:
//!
//! * [`params`], [`data`], [`rng`]: shared domain types and the seeded
//!   stream generator every other module draws from.
//! * [`datagen`]: synthetic non-IID generators, the IDX reader and the
//!   power-law partitioner.
//! * [`models`]: softmax regression and a one-hidden-layer MLP with
//!   analytic gradients and mini-batch SGD.
//! * [`protocol`]: round engines for FedAvg and FedP2P, including device
//!   sampling, P2P partitioning, straggler injection and aggregation.
//! * [`commcost`]: closed-form communication-time model.
//! * [`harness`]: experiment configuration, sweeps and CSV/JSON output.

pub mod commcost;
pub mod data;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod models;
pub mod params;
pub mod protocol;
pub mod rng;

pub use data::{DataShard, DeviceId, FederatedDataset, Rows, Split};
pub use error::{Error, Result};
pub use params::{linear_combination, Layout, ParamVector};
pub use rng::{Purpose, StreamRng};
