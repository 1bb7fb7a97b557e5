//! Macro-observables sampled from the step stream: overall product, return
//! series and the moving-average business level.

use alloc::vec::Vec;
use core::fmt;

use crate::network::{pair_balance, Network};

/// A sampled observable: strictly increasing times with one value each.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct TimeSeries {
    pub t: Vec<u64>,
    pub v: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t: Vec<u64>, v: Vec<f64>) -> Self {
        debug_assert_eq!(t.len(), v.len());
        debug_assert!(t.windows(2).all(|w| w[0] < w[1]));
        TimeSeries { t, v }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct MeasureParams {
    /// Averaging window for the business level, in steps.
    pub t_s: u64,
    /// Sampling stride for persisted series.
    pub sample_every: u64,
}

impl Default for MeasureParams {
    fn default() -> Self {
        MeasureParams {
            t_s: 10_000,
            sample_every: 100,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MeasureError {
    EmptySeries,
    WindowTooShort { len: usize, t_s: u64 },
    InvalidParams,
}

impl fmt::Display for MeasureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureError::EmptySeries => write!(f, "series is empty"),
            MeasureError::WindowTooShort { len, t_s } => {
                write!(f, "series of length {len} shorter than window T_S = {t_s}")
            }
            MeasureError::InvalidParams => write!(f, "T_S and sample_every must be >= 1"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MeasureError {}

/// Overall product of the network: sum of `1 - alpha` over all live outgoing
/// connections. Served from the incremental accumulator; equals
/// [`overall_product_recompute`] up to audited tolerance.
#[inline]
pub fn overall_product(net: &Network) -> f64 {
    net.overall_product()
}

/// Full per-edge recomputation of the overall product from current degrees.
/// Independent of the incremental path; the audit oracle.
pub fn overall_product_recompute(net: &Network) -> f64 {
    net.connections()
        .map(|c| pair_balance(net.k_out(c.src), net.k_in(c.dst)))
        .sum()
}

/// Step-to-step relative variation `(u_{k+1} - u_k) / u_k`. Points where the
/// denominator vanishes are recorded as missing (skipped).
pub fn returns(u: &TimeSeries) -> Result<TimeSeries, MeasureError> {
    if u.is_empty() {
        return Err(MeasureError::EmptySeries);
    }
    let mut t = Vec::with_capacity(u.len().saturating_sub(1));
    let mut v = Vec::with_capacity(u.len().saturating_sub(1));
    for k in 0..u.len() - 1 {
        if u.v[k] != 0.0 {
            t.push(u.t[k + 1]);
            v.push((u.v[k + 1] - u.v[k]) / u.v[k]);
        }
    }
    Ok(TimeSeries { t, v })
}

/// Business level per agent: the moving average of the overall product over
/// the next `T_S` samples, divided by the population size. Defined for every
/// t where the full window exists. Expects a per-step (stride 1) series.
pub fn business_level(
    u: &TimeSeries,
    params: &MeasureParams,
    num_agents: u32,
) -> Result<TimeSeries, MeasureError> {
    if params.t_s < 1 || params.sample_every < 1 {
        return Err(MeasureError::InvalidParams);
    }
    let w = params.t_s as usize;
    if u.len() < w {
        return Err(MeasureError::WindowTooShort {
            len: u.len(),
            t_s: params.t_s,
        });
    }
    let inv = 1.0 / (num_agents as f64 * params.t_s as f64);
    let n_out = u.len() - w + 1;
    let mut t = Vec::with_capacity(n_out);
    let mut v = Vec::with_capacity(n_out);
    let mut window_sum: f64 = u.v[..w].iter().sum();
    t.push(u.t[0]);
    v.push(window_sum * inv);
    for k in 1..n_out {
        window_sum += u.v[k + w - 1] - u.v[k - 1];
        t.push(u.t[k]);
        v.push(window_sum * inv);
    }
    Ok(TimeSeries { t, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::AgentId;

    #[test]
    fn overall_product_empty_and_single_edge() {
        let mut net = Network::new(3);
        assert_eq!(overall_product(&net), 0.0);
        net.add_connection(AgentId(0), AgentId(1)).unwrap();
        // degree-(1,1) edge prices at alpha = 1
        assert!(overall_product(&net).abs() < 1e-15);
        assert!(overall_product_recompute(&net).abs() < 1e-15);
    }

    #[test]
    fn incremental_matches_recompute_on_random_churn() {
        let mut net = Network::new(8);
        let mut ids = Vec::new();
        let mut x = 12345u64;
        let mut next = |m: u64| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 33) % m
        };
        for step in 0..300 {
            if ids.is_empty() || next(3) > 0 {
                let s = next(8) as u32;
                let mut d = next(7) as u32;
                if d >= s {
                    d += 1;
                }
                ids.push(net.add_connection(AgentId(s), AgentId(d)).unwrap().id);
            } else {
                let i = next(ids.len() as u64) as usize;
                let id = ids.swap_remove(i);
                net.remove_connection(id).unwrap();
            }
            let exact = overall_product_recompute(&net);
            let inc = overall_product(&net);
            let denom = exact.abs().max(1.0);
            assert!(
                ((inc - exact) / denom).abs() < 1e-9,
                "step {step}: incremental {inc} vs exact {exact}"
            );
        }
    }

    #[test]
    fn returns_examples() {
        let u = TimeSeries::new(vec![0, 1, 2], vec![3.0, 3.0, 3.0]);
        let r = returns(&u).unwrap();
        assert_eq!(r.v, vec![0.0, 0.0]);
        let u = TimeSeries::new(vec![0, 1], vec![1.0, 2.0]);
        assert_eq!(returns(&u).unwrap().v, vec![1.0]);
    }

    #[test]
    fn returns_skips_zero_denominator() {
        let u = TimeSeries::new(vec![0, 1, 2], vec![0.0, 2.0, 3.0]);
        let r = returns(&u).unwrap();
        assert_eq!(r.t, vec![2]);
        assert_eq!(r.v, vec![0.5]);
        assert!(returns(&TimeSeries::default()).is_err());
    }

    #[test]
    fn business_level_constant_series() {
        let n = 50usize;
        let u = TimeSeries::new((0..n as u64).collect(), vec![7.0; n]);
        let p = MeasureParams {
            t_s: 10,
            sample_every: 1,
        };
        let omega = business_level(&u, &p, 14).unwrap();
        assert_eq!(omega.len(), n - 10 + 1);
        for &v in &omega.v {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn business_level_equals_direct_window_mean() {
        let n = 200usize;
        let mut x = 99u64;
        let vals: Vec<f64> = (0..n)
            .map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1);
                (x >> 40) as f64 / 1e3
            })
            .collect();
        let u = TimeSeries::new((0..n as u64).collect(), vals.clone());
        let p = MeasureParams {
            t_s: 32,
            sample_every: 1,
        };
        let l = 5u32;
        let omega = business_level(&u, &p, l).unwrap();
        for (k, &got) in omega.v.iter().enumerate() {
            let mean: f64 = vals[k..k + 32].iter().sum::<f64>() / 32.0;
            assert!((got - mean / l as f64).abs() < 1e-9, "window {k}");
        }
    }

    #[test]
    fn business_level_linearity_and_shift_bound() {
        let n = 128usize;
        let vals: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let u = TimeSeries::new((0..n as u64).collect(), vals.clone());
        let scaled = TimeSeries::new(u.t.clone(), vals.iter().map(|v| 3.5 * v).collect());
        let p = MeasureParams {
            t_s: 16,
            sample_every: 1,
        };
        let l = 4u32;
        let a = business_level(&u, &p, l).unwrap();
        let b = business_level(&scaled, &p, l).unwrap();
        for (x, y) in a.v.iter().zip(&b.v) {
            assert!((3.5 * x - y).abs() < 1e-9);
        }
        let max_abs = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bound = max_abs * 2.0 / (l as f64 * 16.0);
        for w in a.v.windows(2) {
            assert!((w[1] - w[0]).abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn business_level_window_too_short() {
        let u = TimeSeries::new(vec![0, 1], vec![1.0, 2.0]);
        let p = MeasureParams {
            t_s: 10,
            sample_every: 1,
        };
        assert!(matches!(
            business_level(&u, &p, 3),
            Err(MeasureError::WindowTooShort { .. })
        ));
    }
}
