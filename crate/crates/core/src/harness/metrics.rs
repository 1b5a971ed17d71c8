use serde::{Deserialize, Serialize};

use crate::protocol::RoundRecord;

use super::ExperimentConfig;

/// Per-round metrics of one run together with the resolved configuration
/// that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub config: ExperimentConfig,
    pub rows: Vec<RoundRecord>,
}

impl MetricsLog {
    pub fn best_accuracy(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.mean_test_accuracy)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_accuracy(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.mean_test_accuracy)
    }

    /// Largest absolute change in mean test accuracy between consecutive rounds.
    pub fn max_jump(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| (w[1].mean_test_accuracy - w[0].mean_test_accuracy).abs())
            .fold(0.0, f64::max)
    }

    pub fn total_comm_time(&self) -> f64 {
        self.rows.iter().map(|r| r.comm_time_s).sum()
    }
}
