//! Non-IID dataset generation and ingestion.
//!
//! * [`gen_syncov`]: covariate shift. Each device draws features from its
//!   own Gaussian; all devices share one linear labeler.
//! * [`gen_synlabel`]: label shift. Each device draws a class distribution
//!   from a symmetric Dirichlet; class-conditional features are shared.
//! * [`load_idx`] and [`partition_power_law`]: a real IDX-format digit
//!   dataset split across devices with two classes each and power-law sizes.
//!
//! Both synthetic generators use lognormal quantity skew ([`quantity_skew`]).

mod dump;
pub mod idx;
mod power_law;
mod synthetic;

pub use dump::write_dataset_csv;
pub use idx::{load_idx, IdxData};
pub use power_law::{partition_power_law, PowerLawPartitionConfig};
pub use synthetic::{
    gen_syncov, gen_syncov_with_params, gen_synlabel, gen_synlabel_with_params, quantity_skew, Labeler, SynCov,
    SynCovConfig, SynLabel, SynLabelConfig,
};
