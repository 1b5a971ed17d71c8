//! Local objectives for the two desk-scale model families: multinomial
//! softmax regression and a one-hidden-layer ReLU MLP. Loss is mean
//! cross-entropy; gradients are analytic.

mod kernels;
mod sgd;

use std::sync::Arc;

use rand::distr::Distribution;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::data::Rows;
use crate::error::{Error, Result};
use crate::params::{Layout, ParamVector};
use crate::rng::StreamRng;

pub use sgd::{local_train, SgdConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[serde(alias = "softmax")]
    SoftmaxRegression,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n_features: usize,
    pub n_classes: usize,
    /// Hidden width; ignored by softmax regression.
    pub hidden: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::SoftmaxRegression,
            n_features: 60,
            n_classes: 10,
            hidden: 64,
        }
    }
}

/// Standard deviation of the initial weights.
pub const INIT_STD: f64 = 0.01;

impl ModelSpec {
    pub fn softmax(n_features: usize, n_classes: usize) -> Self {
        Self {
            kind: ModelKind::SoftmaxRegression,
            n_features,
            n_classes,
            hidden: 64,
        }
    }

    pub fn mlp(n_features: usize, n_classes: usize, hidden: usize) -> Self {
        Self {
            kind: ModelKind::Mlp,
            n_features,
            n_classes,
            hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 || self.n_classes < 2 {
            return Err(Error::config("model needs n_features >= 1 and n_classes >= 2"));
        }
        if self.kind == ModelKind::Mlp && self.hidden == 0 {
            return Err(Error::config("mlp hidden width must be positive"));
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        let (d, k, h) = (self.n_features, self.n_classes, self.hidden);
        match self.kind {
            ModelKind::SoftmaxRegression => Layout::new(&[("weight", k * d), ("bias", k)]),
            ModelKind::Mlp => Layout::new(&[
                ("hidden.weight", h * d),
                ("hidden.bias", h),
                ("output.weight", k * h),
                ("output.bias", k),
            ]),
        }
    }

    pub fn param_count(&self) -> usize {
        let (d, k, h) = (self.n_features, self.n_classes, self.hidden);
        match self.kind {
            ModelKind::SoftmaxRegression => k * d + k,
            ModelKind::Mlp => h * d + h + k * h + k,
        }
    }

    /// Weights ~ Normal(0, INIT_STD²), biases zero.
    pub fn init(&self, rng: &StreamRng) -> ParamVector {
        let layout = Arc::new(self.layout());
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut g = rng.generator();
        let mut values = vec![0.0; layout.total_len()];
        for seg in layout.segments() {
            if seg.name.ends_with("weight") {
                for v in &mut values[seg.offset..seg.offset + seg.len] {
                    *v = normal.sample(&mut g);
                }
            }
        }
        ParamVector::new(layout, values).expect("finite init")
    }

    fn check(&self, params: &ParamVector) -> Result<()> {
        if params.layout().as_ref() != &self.layout() {
            return Err(Error::Layout(format!(
                "parameters ({} values) do not match the {:?} layout ({} values)",
                params.len(),
                self.kind,
                self.param_count()
            )));
        }
        Ok(())
    }

    fn check_rows(&self, rows: &Rows<'_>) -> Result<()> {
        if rows.shard().n_features() != self.n_features {
            return Err(Error::Layout(format!(
                "rows have {} features, model expects {}",
                rows.shard().n_features(),
                self.n_features
            )));
        }
        Ok(())
    }
}

/// Mean cross-entropy over `rows`; zero for an empty selection.
pub fn loss(spec: &ModelSpec, params: &ParamVector, rows: Rows<'_>) -> Result<f64> {
    spec.check(params)?;
    spec.check_rows(&rows)?;
    if rows.is_empty() {
        return Ok(0.0);
    }
    let mut scratch = kernels::Scratch::new(spec);
    let total: f64 = rows
        .iter()
        .map(|(x, y)| kernels::row_loss(spec, params.values(), x, y, &mut scratch))
        .sum();
    Ok(total / rows.len() as f64)
}

/// Gradient of [`loss`] with respect to every parameter.
pub fn gradient(spec: &ModelSpec, params: &ParamVector, rows: Rows<'_>) -> Result<ParamVector> {
    spec.check(params)?;
    spec.check_rows(&rows)?;
    let mut grad = vec![0.0; params.len()];
    if !rows.is_empty() {
        let mut scratch = kernels::Scratch::new(spec);
        for (x, y) in rows.iter() {
            kernels::accumulate_gradient(spec, params.values(), x, y, &mut scratch, &mut grad);
        }
        let inv = 1.0 / rows.len() as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
    }
    params.with_values(grad)
}

/// Fraction of rows whose argmax logit (ties to the lowest class) equals the label.
pub fn evaluate(spec: &ModelSpec, params: &ParamVector, rows: Rows<'_>) -> Result<f64> {
    spec.check(params)?;
    spec.check_rows(&rows)?;
    if rows.is_empty() {
        return Err(Error::config(format!(
            "device {} has no test rows to evaluate",
            rows.shard().device()
        )));
    }
    let mut scratch = kernels::Scratch::new(spec);
    let correct = rows
        .iter()
        .filter(|(x, y)| kernels::predict(spec, params.values(), x, &mut scratch) == *y)
        .count();
    Ok(correct as f64 / rows.len() as f64)
}

/// Raw logits for one feature row.
pub fn logits(spec: &ModelSpec, params: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    spec.check(params)?;
    let mut scratch = kernels::Scratch::new(spec);
    kernels::forward(spec, params.values(), x, &mut scratch);
    Ok(scratch.logits.clone())
}

#[cfg(test)]
mod tests;
