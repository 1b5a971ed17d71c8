//! Simulated ring Allreduce: a reduce-scatter pass followed by an
//! all-gather pass over `n` workers, each moving one chunk per step.

use crate::data::DeviceId;
use crate::error::{Error, Result};
use crate::params::ParamVector;

use super::data_weights;

fn chunk_bounds(len: usize, n: usize, c: usize) -> (usize, usize) {
    let (base, extra) = (len / n, len % n);
    let start = c * base + c.min(extra);
    (start, start + base + usize::from(c < extra))
}

/// Sum `buffers` element-wise with the ring algorithm; returns every
/// worker's final buffer.
pub fn ring_allreduce(buffers: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = buffers.len();
    let mut bufs = buffers.to_vec();
    if n <= 1 {
        return bufs;
    }
    let len = bufs[0].len();

    // reduce-scatter: after n-1 steps worker i owns the full sum of chunk i+1
    for step in 0..n - 1 {
        let sends: Vec<(usize, usize, Vec<f64>)> = (0..n)
            .map(|i| {
                let c = (i + n - step) % n;
                let (a, b) = chunk_bounds(len, n, c);
                ((i + 1) % n, c, bufs[i][a..b].to_vec())
            })
            .collect();
        for (dst, c, data) in sends {
            let (a, _) = chunk_bounds(len, n, c);
            for (x, y) in bufs[dst][a..].iter_mut().zip(&data) {
                *x += y;
            }
        }
    }
    // all-gather
    for step in 0..n - 1 {
        let sends: Vec<(usize, usize, Vec<f64>)> = (0..n)
            .map(|i| {
                let c = (i + 1 + n - step) % n;
                let (a, b) = chunk_bounds(len, n, c);
                ((i + 1) % n, c, bufs[i][a..b].to_vec())
            })
            .collect();
        for (dst, c, data) in sends {
            let (a, b) = chunk_bounds(len, n, c);
            bufs[dst][a..b].copy_from_slice(&data);
        }
    }
    bufs
}

/// Data-size-weighted average computed by ring Allreduce over workers in
/// ascending device order. Fails if the workers disagree.
pub fn ring_aggregate_weighted(models: &[(DeviceId, ParamVector, usize)]) -> Result<ParamVector> {
    if models.is_empty() {
        return Err(Error::Contract("ring_aggregate_weighted called with no models".into()));
    }
    let mut sorted: Vec<&(DeviceId, ParamVector, usize)> = models.iter().collect();
    sorted.sort_by_key(|m| m.0);
    let weights = data_weights(&sorted.iter().map(|m| m.2).collect::<Vec<_>>())?;
    let scaled: Vec<Vec<f64>> = sorted
        .iter()
        .zip(&weights)
        .map(|(m, w)| m.1.values().iter().map(|v| w * v).collect())
        .collect();
    let out = ring_allreduce(&scaled);
    if out.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Contract(
            "ring allreduce workers ended with different buffers".into(),
        ));
    }
    sorted[0].1.with_values(out.into_iter().next().expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_vector() {
        for (len, n) in [(10, 3), (3, 5), (0, 2), (7, 7)] {
            let mut next = 0;
            for c in 0..n {
                let (a, b) = chunk_bounds(len, n, c);
                assert_eq!(a, next);
                next = b;
            }
            assert_eq!(next, len);
        }
    }

    #[test]
    fn ring_sums_small_case() {
        let bufs = vec![
            vec![1.0, 2.0, 3.0, 4.0],
            vec![10.0, 20.0, 30.0, 40.0],
            vec![100.0, 200.0, 300.0, 400.0],
        ];
        for out in ring_allreduce(&bufs) {
            assert_eq!(out, vec![111.0, 222.0, 333.0, 444.0]);
        }
    }

    #[test]
    fn shorter_vector_than_ring() {
        let bufs = vec![vec![1.0, 2.0]; 5];
        for out in ring_allreduce(&bufs) {
            assert_eq!(out, vec![5.0, 10.0]);
        }
    }
}
