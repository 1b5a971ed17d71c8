//! Closed-form per-round communication time for FedAvg and FedP2P.
//!
//! Units are bytes and bytes/second. `alpha >= 1` is the server
//! downlink/uplink asymmetry and `gamma = B_s / B_d` the server-to-device
//! bandwidth ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommConfig {
    /// Model size `M` in bytes.
    pub model_bytes: f64,
    /// Server uplink bandwidth `B_s`.
    pub server_bandwidth: f64,
    /// Device-to-device bandwidth `B_d`.
    pub device_bandwidth: f64,
    pub alpha: f64,
    /// Sampled devices per round, `P`.
    pub devices: f64,
    /// P2P network count `L`.
    pub partitions: Option<f64>,
}

impl CommConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("model_bytes", self.model_bytes),
            ("server_bandwidth", self.server_bandwidth),
            ("device_bandwidth", self.device_bandwidth),
            ("devices", self.devices),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!("alpha must be >= 1, got {}", self.alpha)));
        }
        if let Some(l) = self.partitions {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::config(format!("partitions must be positive, got {l}")));
            }
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        self.server_bandwidth / self.device_bandwidth
    }
}

/// Link parameters used to charge each simulated round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub server_bandwidth: f64,
    pub device_bandwidth: f64,
    pub alpha: f64,
    /// Defaults to 8 bytes per model parameter.
    pub model_bytes: Option<f64>,
    pub allreduce: AllreduceTerm,
}

impl Default for LinkConfig {
    fn default() -> Self {
        // 20 Mbit/s devices, gamma = 100
        Self {
            server_bandwidth: 2.5e8,
            device_bandwidth: 2.5e6,
            alpha: 1.0,
            model_bytes: None,
            allreduce: AllreduceTerm::Asymptotic,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        CommConfig {
            model_bytes: self.model_bytes.unwrap_or(1.0),
            server_bandwidth: self.server_bandwidth,
            device_bandwidth: self.device_bandwidth,
            alpha: self.alpha,
            devices: 1.0,
            partitions: None,
        }
        .validate()
    }
}

/// `H_avg = (1 + α) M P / B_s`.
pub fn h_avg(cfg: &CommConfig) -> f64 {
    (1.0 + cfg.alpha) * cfg.model_bytes * cfg.devices / cfg.server_bandwidth
}

/// Exact ring Allreduce time `2(n − 1) M / (n B)`.
pub fn allreduce_time(workers: usize, model_bytes: f64, bandwidth: f64) -> f64 {
    if workers <= 1 {
        return 0.0;
    }
    let n = workers as f64;
    2.0 * (n - 1.0) * model_bytes / (n * bandwidth)
}

/// How the in-network synchronization term of `H_p2p` is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllreduceTerm {
    /// `2M / B_d`, the large-`n` limit.
    #[default]
    Asymptotic,
    /// `2(n − 1)M / (n B_d)` with `n = P / L` workers per network.
    Exact,
}

/// `H_p2p = (1 + α) L M / B_s + P M / (L B_d) + 2M / B_d` at the
/// configured `L`.
pub fn h_p2p(cfg: &CommConfig) -> Result<f64> {
    h_p2p_with(cfg, AllreduceTerm::Asymptotic)
}

pub fn h_p2p_with(cfg: &CommConfig, term: AllreduceTerm) -> Result<f64> {
    let l = cfg
        .partitions
        .ok_or_else(|| Error::config("h_p2p needs a partition count"))?;
    Ok(h_p2p_at(cfg, l, term))
}

/// `H_p2p` at an arbitrary (possibly fractional) `L > 0`.
pub fn h_p2p_at(cfg: &CommConfig, l: f64, term: AllreduceTerm) -> f64 {
    let (m, p) = (cfg.model_bytes, cfg.devices);
    let server = (1.0 + cfg.alpha) * l * m / cfg.server_bandwidth;
    let fan_out = p * m / (l * cfg.device_bandwidth);
    let sync = match term {
        AllreduceTerm::Asymptotic => 2.0 * m / cfg.device_bandwidth,
        AllreduceTerm::Exact => {
            let n = p / l;
            if n <= 1.0 {
                0.0
            } else {
                2.0 * (n - 1.0) * m / (n * cfg.device_bandwidth)
            }
        }
    };
    server + fan_out + sync
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalL {
    /// Continuous minimiser `A √P`.
    pub continuous: f64,
    /// `A = sqrt(B_s / ((1 + α) B_d))`.
    pub a: f64,
    /// Best integer `L` in `[1, P]`.
    pub integer: usize,
    /// `H_p2p` at the continuous optimum, `(2M / B_d)(P / L* + 1)`.
    pub min_time: f64,
}

pub fn optimal_l(cfg: &CommConfig) -> OptimalL {
    let a = (cfg.server_bandwidth / ((1.0 + cfg.alpha) * cfg.device_bandwidth)).sqrt();
    let continuous = a * cfg.devices.sqrt();
    let max_l = cfg.devices.floor().max(1.0);
    let lo = continuous.floor().clamp(1.0, max_l);
    let hi = continuous.ceil().clamp(1.0, max_l);
    let at = |l: f64| h_p2p_at(cfg, l, AllreduceTerm::Asymptotic);
    let integer = if at(hi) < at(lo) { hi } else { lo };
    OptimalL {
        continuous,
        a,
        integer: integer as usize,
        min_time: 2.0 * cfg.model_bytes / cfg.device_bandwidth * (cfg.devices / continuous + 1.0),
    }
}

/// `R = (1 + α) P / (2 sqrt(γ (1 + α) P) + 2γ)`, i.e. `H_avg / min_L H_p2p`.
pub fn ratio_r(devices: f64, alpha: f64, gamma: f64) -> f64 {
    let u = (1.0 + alpha) * devices;
    u / (2.0 * (gamma * u).sqrt() + 2.0 * gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommTableRow {
    pub alpha: f64,
    pub gamma: f64,
    pub devices: f64,
    pub optimal_l: f64,
    pub fedavg: f64,
    pub fedp2p: f64,
}

/// Normalised communication times over the `(α, γ, P)` grid. Each row
/// divides both protocols by `min_L H_p2p`, so `fedp2p` is always 1.
pub fn comm_table(alphas: &[f64], gammas: &[f64], devices: &[f64]) -> Result<Vec<CommTableRow>> {
    if alphas.is_empty() || gammas.is_empty() || devices.is_empty() {
        return Err(Error::config("every grid axis needs at least one value"));
    }
    let mut rows = Vec::with_capacity(alphas.len() * gammas.len() * devices.len());
    for &alpha in alphas {
        for &gamma in gammas {
            for &p in devices {
                let cfg = CommConfig {
                    model_bytes: 1.0,
                    server_bandwidth: gamma,
                    device_bandwidth: 1.0,
                    alpha,
                    devices: p,
                    partitions: None,
                };
                cfg.validate()?;
                let opt = optimal_l(&cfg);
                rows.push(CommTableRow {
                    alpha,
                    gamma,
                    devices: p,
                    optimal_l: opt.continuous,
                    fedavg: h_avg(&cfg) / opt.min_time,
                    fedp2p: 1.0,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: f64, bs: f64, bd: f64, alpha: f64, p: f64, l: Option<f64>) -> CommConfig {
        CommConfig {
            model_bytes: m,
            server_bandwidth: bs,
            device_bandwidth: bd,
            alpha,
            devices: p,
            partitions: l,
        }
    }

    #[test]
    fn h_avg_substitution() {
        assert_eq!(h_avg(&cfg(1.0, 1.0, 1.0, 1.0, 10.0, None)), 20.0);
        let one_way = 3.0 * 7.0 / 5.0;
        assert!((h_avg(&cfg(3.0, 5.0, 1.0, 1.0, 7.0, None)) - 2.0 * one_way).abs() < 1e-12);
        let a = h_avg(&cfg(2.0, 9.0, 1.0, 4.0, 100.0, None));
        let b = h_avg(&cfg(2.0 * 1e6, 9.0 * 1e6, 1.0, 4.0, 100.0, None));
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn allreduce_limits() {
        assert_eq!(allreduce_time(1, 5.0, 1.0), 0.0);
        assert_eq!(allreduce_time(2, 1.0, 1.0), 1.0);
        let t = allreduce_time(1000, 1.0, 1.0);
        assert!((t - 2.0).abs() / 2.0 < 0.002);
    }

    #[test]
    fn h_p2p_at_optimum() {
        let c = cfg(1.0, 100.0, 1.0, 1.0, 500.0, None);
        let opt = optimal_l(&c);
        assert!((opt.a - 50f64.sqrt()).abs() < 1e-12);
        assert!((opt.continuous - 158.113_883_008_418_98).abs() < 1e-9);
        let three_term = h_p2p_at(&c, opt.continuous, AllreduceTerm::Asymptotic);
        assert!((three_term - opt.min_time).abs() < 1e-12 * three_term);
        assert!((three_term - 8.3246).abs() < 1e-4, "{three_term}");
    }

    #[test]
    fn full_partitioning_collapses_fan_out() {
        let c = cfg(2.0, 30.0, 3.0, 2.0, 40.0, Some(40.0));
        let expected = 3.0 * 40.0 * 2.0 / 30.0 + 2.0 / 3.0 + 4.0 / 3.0;
        assert!((h_p2p(&c).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn h_p2p_is_convex_in_l() {
        let c = cfg(1.0, 100.0, 1.0, 3.0, 800.0, None);
        let f = |l: f64| h_p2p_at(&c, l, AllreduceTerm::Asymptotic);
        for i in 1..400 {
            let l = i as f64 * 0.5;
            assert!(f(l - 0.25) + f(l + 0.25) - 2.0 * f(l) > 0.0, "at L={l}");
        }
    }

    #[test]
    fn unit_a_gives_sqrt_p() {
        let c = cfg(1.0, 2.0 * 3.0, 3.0, 1.0, 400.0, None);
        let opt = optimal_l(&c);
        assert!((opt.a - 1.0).abs() < 1e-15);
        assert!((opt.continuous - 20.0).abs() < 1e-12);
        assert_eq!(opt.integer, 20);
    }

    #[test]
    fn integer_optimum_beats_exhaustive_scan() {
        let c = cfg(1.0, 100.0, 1.0, 1.0, 500.0, None);
        let opt = optimal_l(&c);
        let best = h_p2p_at(&c, opt.integer as f64, AllreduceTerm::Asymptotic);
        for l in 1..=500 {
            assert!(best <= h_p2p_at(&c, l as f64, AllreduceTerm::Asymptotic));
        }
    }

    #[test]
    fn ratio_examples() {
        assert!((ratio_r(500.0, 1.0, 100.0) - 1.2013).abs() < 5e-5);
        assert!((ratio_r(50.0, 1.0, 1000.0) - 0.0380).abs() < 5e-5);
    }

    #[test]
    fn exact_allreduce_term_is_smaller() {
        let c = cfg(1.0, 100.0, 1.0, 1.0, 500.0, Some(50.0));
        let asym = h_p2p_with(&c, AllreduceTerm::Asymptotic).unwrap();
        let exact = h_p2p_with(&c, AllreduceTerm::Exact).unwrap();
        assert!((asym - exact - 2.0 / 10.0).abs() < 1e-12);
        assert!(h_p2p(&cfg(1.0, 1.0, 1.0, 1.0, 5.0, None)).is_err());
    }

    #[test]
    fn comm_table_rows_normalised() {
        let rows = comm_table(&[1.0, 4.0], &[100.0], &[500.0, 1000.0, 2000.0]).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.fedp2p == 1.0));
        assert!((rows[0].fedavg - 1.2013).abs() < 5e-5);
        assert!(rows[0].fedavg < rows[1].fedavg && rows[1].fedavg < rows[2].fedavg);
        assert!(comm_table(&[], &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn invalid_alpha_rejected() {
        assert!(cfg(1.0, 1.0, 1.0, 0.5, 1.0, None).validate().is_err());
        assert!(cfg(0.0, 1.0, 1.0, 1.0, 1.0, None).validate().is_err());
    }
}
