use rand::seq::{index, SliceRandom};

use crate::data::DeviceId;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Uniform sample without replacement, returned in ascending id order.
pub fn sample_devices(pool: &[DeviceId], count: usize, rng: &StreamRng) -> Result<Vec<DeviceId>> {
    if count > pool.len() {
        return Err(Error::config(format!(
            "cannot sample {count} devices from a pool of {}",
            pool.len()
        )));
    }
    let mut g = rng.generator();
    let mut picked: Vec<DeviceId> = index::sample(&mut g, pool.len(), count)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct P2PPartition {
    /// `Z_1 … Z_L`, each sorted ascending.
    pub groups: Vec<Vec<DeviceId>>,
    pub round: usize,
}

impl P2PPartition {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Shuffle the pool, then cut it into `l` contiguous groups whose sizes
/// differ by at most one (the larger groups first).
pub fn partition_p2p(pool: &[DeviceId], l: usize, round: usize, rng: &StreamRng) -> Result<P2PPartition> {
    if l == 0 || l > pool.len() {
        return Err(Error::config(format!(
            "cannot split {} devices into {l} non-empty networks",
            pool.len()
        )));
    }
    let mut order = pool.to_vec();
    order.shuffle(&mut rng.generator());
    let (base, extra) = (pool.len() / l, pool.len() % l);
    let mut groups = Vec::with_capacity(l);
    let mut start = 0;
    for i in 0..l {
        let size = base + usize::from(i < extra);
        let mut group = order[start..start + size].to_vec();
        group.sort_unstable();
        groups.push(group);
        start += size;
    }
    Ok(P2PPartition { groups, round })
}

/// `ceil((1 − rate) · n)`, computed as `n − floor(rate · n)`.
pub fn survivor_count(n: usize, rate: f64) -> usize {
    let dropped = (rate * n as f64 + 1e-9).floor() as usize;
    n - dropped.min(n)
}

/// Keep a uniformly chosen `ceil((1 − rate)·|selected|)` of the selected devices.
pub fn apply_stragglers(selected: &[DeviceId], rate: f64, rng: &StreamRng) -> Result<Vec<DeviceId>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::config(format!("straggler rate {rate} outside [0, 1]")));
    }
    if rate == 0.0 {
        return Ok(selected.to_vec());
    }
    sample_devices(selected, survivor_count(selected.len(), rate), rng)
}
