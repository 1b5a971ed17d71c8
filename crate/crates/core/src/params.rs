//! Flat parameter vectors with named segments.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Ordered, contiguous, disjoint segments covering `0..total_len`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    segments: Vec<Segment>,
}

impl Layout {
    pub fn new<S: AsRef<str>>(parts: &[(S, usize)]) -> Self {
        let mut offset = 0;
        let segments = parts
            .iter()
            .map(|(name, len)| {
                let seg = Segment {
                    name: name.as_ref().to_string(),
                    offset,
                    len: *len,
                };
                offset += len;
                seg
            })
            .collect();
        Self { segments }
    }

    /// A single segment named `theta`.
    pub fn flat(len: usize) -> Self {
        Self::new(&[("theta", len)])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_len(&self) -> usize {
        self.segments.iter().map(|s| s.len).sum()
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    /// Name of the segment containing flat index `idx`.
    pub fn segment_of(&self, idx: usize) -> Option<&str> {
        self.segments
            .iter()
            .find(|s| idx >= s.offset && idx < s.offset + s.len)
            .map(|s| s.name.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Arc<Layout>,
}

impl PartialEq for ParamVector {
    /// Bitwise comparison of values plus layout equality.
    fn eq(&self, other: &Self) -> bool {
        self.same_layout(other)
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl ParamVector {
    pub fn new(layout: Arc<Layout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total_len() {
            return Err(Error::Layout(format!(
                "layout covers {} values but {} were supplied",
                layout.total_len(),
                values.len()
            )));
        }
        let v = Self { values, layout };
        v.check_finite()?;
        Ok(v)
    }

    pub fn zeros(layout: Arc<Layout>) -> Self {
        let values = vec![0.0; layout.total_len()];
        Self { values, layout }
    }

    /// Single-segment vector, mostly for tests and examples.
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(Arc::new(Layout::flat(values.len())), values.to_vec())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.layout
            .segment(name)
            .map(|s| &self.values[s.offset..s.offset + s.len])
    }

    pub fn same_layout(&self, other: &ParamVector) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout
    }

    /// Replace the values, keeping the layout. Fails on length mismatch or
    /// non-finite entries.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(Arc::clone(&self.layout), values)
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(idx) => Err(Error::NonFinite {
                segment: self.layout.segment_of(idx).unwrap_or("?").to_string(),
            }),
        }
    }

    pub fn max_abs_diff(&self, other: &ParamVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Element-wise `Σ_j weights[j] · vectors[j]`, summed left to right in the
/// order given. Callers that need permutation invariance sort first.
pub fn linear_combination(vectors: &[&ParamVector], weights: &[f64]) -> Result<ParamVector> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Contract("linear combination of zero vectors".into()))?;
    if vectors.len() != weights.len() {
        return Err(Error::Layout(format!(
            "{} vectors but {} weights",
            vectors.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::Contract(format!("non-finite weight {w}")));
    }
    for v in &vectors[1..] {
        if !first.same_layout(v) {
            return Err(Error::Layout(
                "vectors in a linear combination must share one layout".into(),
            ));
        }
    }

    let w0 = weights[0];
    let mut acc: Vec<f64> = first.values.iter().map(|x| w0 * x).collect();
    for (v, &w) in vectors[1..].iter().zip(&weights[1..]) {
        for (a, x) in acc.iter_mut().zip(&v.values) {
            *a += w * x;
        }
    }
    ParamVector::new(Arc::clone(&first.layout), acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_contiguous() {
        let layout = Layout::new(&[("weight", 6), ("bias", 3)]);
        assert_eq!(layout.total_len(), 9);
        assert_eq!(layout.segment("bias").unwrap().offset, 6);
        assert_eq!(layout.segment_of(5), Some("weight"));
        assert_eq!(layout.segment_of(6), Some("bias"));
        assert_eq!(layout.segment_of(9), None);
    }

    #[test]
    fn identity_weight() {
        let theta = ParamVector::from_slice(&[1.5, -2.0, 0.25]).unwrap();
        let out = linear_combination(&[&theta], &[1.0]).unwrap();
        assert_eq!(out, theta);
    }

    #[test]
    fn hand_computed_mix() {
        let a = ParamVector::from_slice(&[1.0, 3.0]).unwrap();
        let b = ParamVector::from_slice(&[3.0, 5.0]).unwrap();
        let out = linear_combination(&[&a, &b], &[0.25, 0.75]).unwrap();
        assert_eq!(out.values(), &[2.5, 4.5]);
    }

    #[test]
    fn idempotent_on_equal_inputs() {
        let theta = ParamVector::from_slice(&[0.1, 7.0, -3.3]).unwrap();
        let out = linear_combination(&[&theta, &theta], &[0.5, 0.5]).unwrap();
        assert_eq!(out, theta);
    }

    #[test]
    fn layout_mismatch_is_structural() {
        let a = ParamVector::from_slice(&[1.0, 2.0]).unwrap();
        let b = ParamVector::from_slice(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            linear_combination(&[&a, &b], &[0.5, 0.5]),
            Err(Error::Layout(_))
        ));
        assert!(matches!(linear_combination(&[&a], &[0.5, 0.5]), Err(Error::Layout(_))));
    }

    #[test]
    fn overflow_names_segment() {
        let layout = Arc::new(Layout::new(&[("weight", 1), ("bias", 1)]));
        let a = ParamVector::new(layout, vec![1.0, f64::MAX]).unwrap();
        match linear_combination(&[&a, &a], &[1.0, 1.0]) {
            Err(Error::NonFinite { segment }) => assert_eq!(segment, "bias"),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_construction() {
        assert!(ParamVector::from_slice(&[f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn combination_is_linear(
            rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 5), 1..6),
            scale in -4.0f64..4.0,
            seed_w in prop::collection::vec(0.0f64..1.0, 6),
        ) {
            let weights = &seed_w[..rows.len()];
            let vs: Vec<ParamVector> = rows.iter().map(|r| ParamVector::from_slice(r).unwrap()).collect();
            let scaled: Vec<ParamVector> = rows
                .iter()
                .map(|r| ParamVector::from_slice(&r.iter().map(|x| scale * x).collect::<Vec<_>>()).unwrap())
                .collect();
            let base = linear_combination(&vs.iter().collect::<Vec<_>>(), weights).unwrap();
            let lhs = linear_combination(&scaled.iter().collect::<Vec<_>>(), weights).unwrap();
            for (l, b) in lhs.values().iter().zip(base.values()) {
                prop_assert!((l - scale * b).abs() <= 1e-12 * (1.0 + l.abs()));
            }
        }
    }
}
