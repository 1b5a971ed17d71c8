//! Per-row forward/backward passes on flat parameter slices.
//!
//! Softmax layout: `weight` (K × d, row-major), `bias` (K).
//! MLP layout: `hidden.weight` (h × d), `hidden.bias` (h),
//! `output.weight` (K × h), `output.bias` (K).

use super::{ModelKind, ModelSpec};

pub(crate) struct Scratch {
    pub logits: Vec<f64>,
    hidden: Vec<f64>,
    dlogits: Vec<f64>,
    dhidden: Vec<f64>,
}

impl Scratch {
    pub fn new(spec: &ModelSpec) -> Self {
        let h = if spec.kind == ModelKind::Mlp { spec.hidden } else { 0 };
        Self {
            logits: vec![0.0; spec.n_classes],
            hidden: vec![0.0; h],
            dlogits: vec![0.0; spec.n_classes],
            dhidden: vec![0.0; h],
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn affine(weight: &[f64], bias: &[f64], x: &[f64], out: &mut [f64]) {
    let width = x.len();
    for ((o, w), b) in out.iter_mut().zip(weight.chunks_exact(width)).zip(bias) {
        *o = b + dot(w, x);
    }
}

pub(crate) fn forward(spec: &ModelSpec, params: &[f64], x: &[f64], s: &mut Scratch) {
    let (d, k) = (spec.n_features, spec.n_classes);
    match spec.kind {
        ModelKind::SoftmaxRegression => {
            let (w, b) = params.split_at(k * d);
            affine(w, b, x, &mut s.logits);
        }
        ModelKind::Mlp => {
            let h = spec.hidden;
            let (w1, rest) = params.split_at(h * d);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(k * h);
            affine(w1, b1, x, &mut s.hidden);
            s.hidden.iter_mut().for_each(|v| *v = v.max(0.0));
            affine(w2, b2, &s.hidden, &mut s.logits);
        }
    }
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

pub(crate) fn row_loss(spec: &ModelSpec, params: &[f64], x: &[f64], y: usize, s: &mut Scratch) -> f64 {
    forward(spec, params, x, s);
    log_sum_exp(&s.logits) - s.logits[y]
}

pub(crate) fn predict(spec: &ModelSpec, params: &[f64], x: &[f64], s: &mut Scratch) -> usize {
    forward(spec, params, x, s);
    argmax(&s.logits)
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Adds the (unscaled) gradient of one row's cross-entropy into `grad` and
/// returns the row loss.
pub(crate) fn accumulate_gradient(
    spec: &ModelSpec,
    params: &[f64],
    x: &[f64],
    y: usize,
    s: &mut Scratch,
    grad: &mut [f64],
) -> f64 {
    let (d, k) = (spec.n_features, spec.n_classes);
    forward(spec, params, x, s);
    let lse = log_sum_exp(&s.logits);
    for (dl, z) in s.dlogits.iter_mut().zip(&s.logits) {
        *dl = (z - lse).exp();
    }
    s.dlogits[y] -= 1.0;

    match spec.kind {
        ModelKind::SoftmaxRegression => {
            let (gw, gb) = grad.split_at_mut(k * d);
            for ((row, gbk), &dl) in gw.chunks_exact_mut(d).zip(gb.iter_mut()).zip(&s.dlogits) {
                *gbk += dl;
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += dl * xi;
                }
            }
        }
        ModelKind::Mlp => {
            let h = spec.hidden;
            let w2 = &params[h * d + h..h * d + h + k * h];
            let (gw1, rest) = grad.split_at_mut(h * d);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(k * h);

            s.dhidden.iter_mut().for_each(|v| *v = 0.0);
            for (((row_g, row_w), gbk), &dl) in gw2
                .chunks_exact_mut(h)
                .zip(w2.chunks_exact(h))
                .zip(gb2.iter_mut())
                .zip(&s.dlogits)
            {
                *gbk += dl;
                for ((g, a), (dh, w)) in row_g.iter_mut().zip(&s.hidden).zip(s.dhidden.iter_mut().zip(row_w)) {
                    *g += dl * a;
                    *dh += dl * w;
                }
            }
            // ReLU gate: hidden activation is zero exactly where the unit is off
            for ((row_g, gbj), (dh, a)) in gw1
                .chunks_exact_mut(d)
                .zip(gb1.iter_mut())
                .zip(s.dhidden.iter().zip(&s.hidden))
            {
                if *a <= 0.0 {
                    continue;
                }
                *gbj += dh;
                for (g, xi) in row_g.iter_mut().zip(x) {
                    *g += dh * xi;
                }
            }
        }
    }
    lse - s.logits[y]
}
