//! Avalanche-size distribution analysis: empirical CCDF, discrete power-law
//! exponent fitting by maximum likelihood, KS-based cutoff selection and
//! bootstrap uncertainty.
//!
//! Exponent conventions are easy to mix up by one, so a fit carries both
//! numbers explicitly: `m_density` is the exponent of the probability
//! density `p(s) ~ s^{-m_density}` estimated by the MLE, and
//! `m_ccdf = m_density - 1` is the exponent of the complementary CDF
//! `P_c(s) ~ s^{-m_ccdf}`.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::math;

/// Minimum number of tail samples for a valid exponent fit.
pub const MIN_TAIL: usize = 10;
/// Minimum sample size for cutoff selection.
pub const MIN_CUTOFF_SAMPLES: usize = 50;
/// Minimum bootstrap replicas.
pub const MIN_BOOT: usize = 100;

/// A bag of positive integer avalanche sizes; order is irrelevant.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SizeSample {
    sizes: Vec<u64>,
}

impl SizeSample {
    pub fn new(sizes: Vec<u64>) -> Result<Self, TailError> {
        if sizes.iter().any(|&s| s == 0) {
            return Err(TailError::NonPositiveSize);
        }
        Ok(SizeSample { sizes })
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    /// Sizes sorted ascending.
    pub fn sorted(&self) -> Vec<u64> {
        let mut s = self.sizes.clone();
        s.sort_unstable();
        s
    }
}

/// A fitted power-law tail.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct TailFit {
    /// Density-convention exponent `m` of `p(s) ~ s^{-m}`; always > 1.
    pub m_density: f64,
    /// CCDF-convention exponent of `P_c(s) ~ s^{-m}`; equals `m_density - 1`.
    pub m_ccdf: f64,
    /// Analytic standard error of `m_density` (and of `m_ccdf`).
    pub m_err: f64,
    /// Lower cutoff: only sizes `>= s_min` enter the fit.
    pub s_min: u64,
    /// KS distance between the empirical tail and the fitted law.
    pub ks: f64,
    /// Number of samples at or above the cutoff.
    pub n_tail: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TailError {
    EmptySample,
    NonPositiveSize,
    InsufficientTail { n_tail: usize, need: usize },
    InsufficientSample { n: usize, need: usize },
    /// All tail values identical: the log-likelihood has no maximum.
    InsufficientVariation,
    TooFewReplicas { n_boot: usize, need: usize },
    NoValidCutoff,
}

impl fmt::Display for TailError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailError::EmptySample => write!(f, "empty sample"),
            TailError::NonPositiveSize => write!(f, "avalanche sizes must be >= 1"),
            TailError::InsufficientTail { n_tail, need } => {
                write!(f, "only {n_tail} tail samples, need >= {need}")
            }
            TailError::InsufficientSample { n, need } => {
                write!(f, "only {n} samples, need >= {need}")
            }
            TailError::InsufficientVariation => {
                write!(f, "tail samples show no variation; exponent undefined")
            }
            TailError::TooFewReplicas { n_boot, need } => {
                write!(f, "{n_boot} bootstrap replicas, need >= {need}")
            }
            TailError::NoValidCutoff => write!(f, "no cutoff admits a valid fit"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TailError {}

/// Empirical complementary CDF: for each distinct size `s`, the fraction of
/// samples strictly greater than `s`. Non-increasing, reaching 0 at the
/// largest observed size.
pub fn ccdf(sample: &SizeSample) -> Result<Vec<(u64, f64)>, TailError> {
    if sample.is_empty() {
        return Err(TailError::EmptySample);
    }
    let sorted = sample.sorted();
    let n = sorted.len() as f64;
    let mut out: Vec<(u64, f64)> = Vec::new();
    let mut i = 0usize;
    while i < sorted.len() {
        let s = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == s {
            j += 1;
        }
        out.push((s, (sorted.len() - j) as f64 / n));
        i = j;
    }
    Ok(out)
}

/// Continuous-approximation MLE for the density exponent over values
/// `>= x_min`: `1 + n / sum ln(x_i / x_min)`, with its standard error.
/// Exposed separately so the discreteness shift can be bypassed.
pub fn mle_continuous(values: &[f64], x_min: f64) -> Result<(f64, f64), TailError> {
    let n = values.len();
    if n == 0 {
        return Err(TailError::EmptySample);
    }
    let log_sum: f64 = values.iter().map(|&x| math::ln(x / x_min)).sum();
    if log_sum <= 0.0 {
        return Err(TailError::InsufficientVariation);
    }
    let m = 1.0 + n as f64 / log_sum;
    let err = (m - 1.0) / math::sqrt(n as f64);
    Ok((m, err))
}

/// Fits the power-law exponent over the tail `s >= s_min` using the
/// continuous MLE with the half-integer discreteness shift
/// (`x_min = s_min - 1/2`), and reports the KS distance of the fit.
pub fn fit_exponent(sample: &SizeSample, s_min: u64) -> Result<TailFit, TailError> {
    let s_min = s_min.max(1);
    let mut tail: Vec<u64> = sample.sizes().iter().copied().filter(|&s| s >= s_min).collect();
    if tail.len() < MIN_TAIL {
        return Err(TailError::InsufficientTail {
            n_tail: tail.len(),
            need: MIN_TAIL,
        });
    }
    tail.sort_unstable();
    fit_sorted_tail(&tail, s_min)
}

fn fit_sorted_tail(tail: &[u64], s_min: u64) -> Result<TailFit, TailError> {
    let x_min = s_min as f64 - 0.5;
    let n = tail.len();
    let log_sum: f64 = tail.iter().map(|&s| math::ln(s as f64 / x_min)).sum();
    if !(log_sum > 0.0) || tail[0] == tail[n - 1] {
        return Err(TailError::InsufficientVariation);
    }
    let m = 1.0 + n as f64 / log_sum;
    let err = (m - 1.0) / math::sqrt(n as f64);
    let ks = ks_distance(tail, x_min, m);
    Ok(TailFit {
        m_density: m,
        m_ccdf: m - 1.0,
        m_err: err,
        s_min,
        ks,
        n_tail: n,
    })
}

/// KS distance between the empirical CDF of the (sorted) tail and the
/// fitted power law, compared at the distinct observed sizes. Integer size
/// `s` carries the continuous mass of the cell `[s - 1/2, s + 1/2)`, so the
/// model CDF is evaluated at the cell's upper edge.
fn ks_distance(sorted_tail: &[u64], x_min: f64, m: f64) -> f64 {
    let n = sorted_tail.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0usize;
    while i < sorted_tail.len() {
        let s = sorted_tail[i];
        let mut j = i;
        while j < sorted_tail.len() && sorted_tail[j] == s {
            j += 1;
        }
        let f_emp = j as f64 / n;
        let f_mod = 1.0 - math::powf((s as f64 + 0.5) / x_min, 1.0 - m);
        d = d.max(math::abs(f_emp - f_mod));
        i = j;
    }
    d
}

/// Critical KS value at the 5% level for a sample of `n` points
/// (asymptotic `1.36 / sqrt(n)`).
pub fn ks_critical_5pct(n: usize) -> f64 {
    1.36 / math::sqrt(n as f64)
}

/// Scans the distinct observed sizes and returns the cutoff minimizing the
/// KS distance between the empirical tail and the fitted power law.
pub fn select_cutoff(sample: &SizeSample) -> Result<u64, TailError> {
    if sample.len() < MIN_CUTOFF_SAMPLES {
        return Err(TailError::InsufficientSample {
            n: sample.len(),
            need: MIN_CUTOFF_SAMPLES,
        });
    }
    let sorted = sample.sorted();
    let mut best: Option<(f64, u64)> = None;
    let mut i = 0usize;
    while i < sorted.len() {
        let s_min = sorted[i];
        // skip duplicates
        let mut j = i;
        while j < sorted.len() && sorted[j] == s_min {
            j += 1;
        }
        let tail = &sorted[i..];
        if tail.len() < MIN_TAIL {
            break;
        }
        if let Ok(fit) = fit_sorted_tail(tail, s_min) {
            if best.map_or(true, |(ks, _)| fit.ks < ks) {
                best = Some((fit.ks, s_min));
            }
        }
        i = j;
    }
    best.map(|(_, s)| s).ok_or(TailError::NoValidCutoff)
}

/// Convenience: KS-minimizing cutoff followed by the exponent fit.
pub fn fit(sample: &SizeSample) -> Result<TailFit, TailError> {
    let s_min = select_cutoff(sample)?;
    fit_exponent(sample, s_min)
}

/// Bootstrap standard deviation of the density exponent: resamples the full
/// sample with replacement `n_boot` times, re-fitting at fixed `s_min`.
pub fn bootstrap_error<R: Rng + ?Sized>(
    sample: &SizeSample,
    fit: &TailFit,
    n_boot: usize,
    rng: &mut R,
) -> Result<f64, TailError> {
    if n_boot < MIN_BOOT {
        return Err(TailError::TooFewReplicas {
            n_boot,
            need: MIN_BOOT,
        });
    }
    let sizes = sample.sizes();
    let n = sizes.len();
    let mut estimates: Vec<f64> = Vec::with_capacity(n_boot);
    let mut resample: Vec<u64> = Vec::with_capacity(n);
    for _ in 0..n_boot {
        resample.clear();
        for _ in 0..n {
            resample.push(sizes[rng.gen_range(0..n)]);
        }
        let mut tail: Vec<u64> = resample.iter().copied().filter(|&s| s >= fit.s_min).collect();
        if tail.len() < MIN_TAIL {
            continue;
        }
        tail.sort_unstable();
        if let Ok(f) = fit_sorted_tail(&tail, fit.s_min) {
            estimates.push(f.m_density);
        }
    }
    if estimates.len() < MIN_BOOT / 2 {
        return Err(TailError::InsufficientTail {
            n_tail: estimates.len(),
            need: MIN_BOOT / 2,
        });
    }
    let k = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / k;
    let var = estimates.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (k - 1.0);
    Ok(math::sqrt(var))
}
