use crate::data::DeviceId;
use crate::error::{Error, Result};
use crate::params::{linear_combination, ParamVector};

use super::GlobalWeighting;

/// `γ_i = size_i / Σ size`.
pub fn data_weights(sizes: &[usize]) -> Result<Vec<f64>> {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(Error::Contract(
            "aggregation weights need a positive total data size".into(),
        ));
    }
    let total = total as f64;
    Ok(sizes.iter().map(|&s| s as f64 / total).collect())
}

/// `Σ γ_i θ_i` with `γ_i ∝ |D_i|`, summed in ascending device order so the
/// result does not depend on input order.
pub fn aggregate_weighted(models: &[(DeviceId, ParamVector, usize)]) -> Result<ParamVector> {
    if models.is_empty() {
        return Err(Error::Contract("aggregate_weighted called with no models".into()));
    }
    let mut sorted: Vec<&(DeviceId, ParamVector, usize)> = models.iter().collect();
    sorted.sort_by_key(|m| m.0);
    let sizes: Vec<usize> = sorted.iter().map(|m| m.2).collect();
    let weights = data_weights(&sizes)?;
    let vectors: Vec<&ParamVector> = sorted.iter().map(|m| &m.1).collect();
    linear_combination(&vectors, &weights)
}

/// Server aggregation of per-network models `(partition index, θ_{Z_l}, data size)`,
/// summed in ascending partition order.
pub fn aggregate_global(
    partition_models: &[(usize, ParamVector, usize)],
    weighting: GlobalWeighting,
) -> Result<ParamVector> {
    if partition_models.is_empty() {
        return Err(Error::Contract(
            "aggregate_global called with no partition models".into(),
        ));
    }
    let mut sorted: Vec<&(usize, ParamVector, usize)> = partition_models.iter().collect();
    sorted.sort_by_key(|m| m.0);
    let weights = match weighting {
        GlobalWeighting::Uniform => vec![1.0 / sorted.len() as f64; sorted.len()],
        GlobalWeighting::DataSize => data_weights(&sorted.iter().map(|m| m.2).collect::<Vec<_>>())?,
    };
    let vectors: Vec<&ParamVector> = sorted.iter().map(|m| &m.1).collect();
    linear_combination(&vectors, &weights)
}
