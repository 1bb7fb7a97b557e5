//! Orchestration: pooled single runs, grid sweeps, the constant-Ω
//! neighbourhood search, and the three-state scenario comparison.

use std::collections::BTreeMap;
use std::fmt;

use econet_core::dynamics::{initialize, step};
use econet_core::measures::{business_level, MeasureParams, TimeSeries};
use econet_core::tail::{self, SizeSample};
use econet_core::{DynamicsParams, SimError, TailError, TailFit};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::seed::replica_seed;

/// Cadence of the incremental-accumulator audit, in steps.
pub const AUDIT_EVERY: u64 = 10_000;
/// Maximum tolerated relative drift between the incremental overall product
/// and a full per-edge recomputation.
pub const AUDIT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentError {
    Sim(SimError),
    AuditFailed { replica: u32, time: u64, deviation: f64 },
    NoWindow,
    BracketFailure { target: f64, lo: f64, hi: f64 },
    EmptyGrid,
    ConstantField(&'static str),
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentError::Sim(e) => write!(f, "simulation error: {e}"),
            ExperimentError::AuditFailed { replica, time, deviation } => write!(
                f,
                "replica {replica}: incremental overall product drifted {deviation:.3e} from recomputation at t = {time}"
            ),
            ExperimentError::NoWindow => {
                write!(f, "no complete business-level window after the transient")
            }
            ExperimentError::BracketFailure { target, lo, hi } => write!(
                f,
                "target business level {target} outside bracket endpoint values [{hi}, {lo}]"
            ),
            ExperimentError::EmptyGrid => write!(f, "sweep grid is empty"),
            ExperimentError::ConstantField(what) => {
                write!(f, "cannot normalize: {what} is constant over the grid")
            }
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<SimError> for ExperimentError {
    fn from(e: SimError) -> Self {
        ExperimentError::Sim(e)
    }
}

/// One avalanche, as logged: trigger time, severed edges, defaulted agents,
/// breadth-first waves.
#[derive(Clone, Debug, Serialize)]
pub struct AvalancheSummary {
    pub t: u64,
    pub size: u64,
    pub n_agents: u32,
    pub generations: u32,
}

/// Pooled outcome of one (L, c_th) cell.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub config: RunConfig,
    /// Replica-averaged post-transient mean of the business level.
    pub omega_mean: f64,
    /// Decimated overall-product series (first replica).
    pub u_series: TimeSeries,
    /// Decimated business-level series (first replica).
    pub omega_series: TimeSeries,
    /// Post-transient avalanches pooled over replicas, replica-major order.
    pub avalanches: Vec<AvalancheSummary>,
    pub fit: Option<TailFit>,
    /// Set when the tail fit was skipped or failed; the reason, verbatim.
    pub fit_warning: Option<String>,
}

struct ReplicaOut {
    omega_mean: f64,
    avalanches: Vec<AvalancheSummary>,
    series: Option<(TimeSeries, TimeSeries)>,
}

fn run_replica(cfg: &RunConfig, replica: u32) -> Result<ReplicaOut, ExperimentError> {
    let params = DynamicsParams::new(cfg.l, cfg.c_th)?
        .with_smoothing(cfg.smoothing)
        .with_mode(cfg.mode);
    let seed = replica_seed(cfg.seed, cfg.l, cfg.c_th, replica);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = initialize(&params, &mut rng);

    let n = cfg.total_steps as usize;
    let mut t = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut avalanches = Vec::new();
    for _ in 0..cfg.total_steps {
        let rec = step(&mut net, &params, &mut rng)?;
        t.push(rec.time);
        u.push(rec.u_t);
        if let Some(ev) = rec.avalanche {
            if ev.trigger_time > cfg.transient {
                avalanches.push(AvalancheSummary {
                    t: ev.trigger_time,
                    size: ev.size,
                    n_agents: ev.bankrupt_agents.len() as u32,
                    generations: ev.generations,
                });
            }
        }
        if net.time() % AUDIT_EVERY == 0 {
            let dev = net.resync_overall_product();
            if dev > AUDIT_TOL {
                return Err(ExperimentError::AuditFailed {
                    replica,
                    time: net.time(),
                    deviation: dev,
                });
            }
        }
    }

    let u_series = TimeSeries::new(t, u);
    let mp = MeasureParams { t_s: cfg.t_s, sample_every: cfg.sample_every };
    let omega = business_level(&u_series, &mp, cfg.l).map_err(|_| ExperimentError::NoWindow)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, &tt) in omega.t.iter().enumerate() {
        if tt > cfg.transient {
            sum += omega.v[i];
            count += 1;
        }
    }
    if count == 0 {
        return Err(ExperimentError::NoWindow);
    }
    let series = if replica == 0 {
        Some((decimate(&u_series, cfg.sample_every), decimate(&omega, cfg.sample_every)))
    } else {
        None
    };
    Ok(ReplicaOut { omega_mean: sum / count as f64, avalanches, series })
}

fn decimate(s: &TimeSeries, every: u64) -> TimeSeries {
    let every = every.max(1) as usize;
    let t = s.t.iter().step_by(every).copied().collect();
    let v = s.v.iter().step_by(every).copied().collect();
    TimeSeries::new(t, v)
}

/// Pooled run: `replicas` independent streams, avalanche samples
/// concatenated, business levels averaged, one tail fit over the pool.
pub fn run(cfg: &RunConfig) -> Result<RunResult, ExperimentError> {
    let outs: Vec<ReplicaOut> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| run_replica(cfg, r))
        .collect::<Result<_, _>>()?;

    let omega_mean = outs.iter().map(|o| o.omega_mean).sum::<f64>() / outs.len() as f64;
    let mut avalanches = Vec::new();
    let mut series = None;
    for o in outs {
        avalanches.extend(o.avalanches);
        if o.series.is_some() {
            series = o.series;
        }
    }
    let (u_series, omega_series) = series.expect("replica 0 always keeps its series");

    let sizes: Vec<u64> = avalanches.iter().map(|a| a.size).collect();
    let (fit, fit_warning) = match SizeSample::new(sizes) {
        Err(e) => (None, Some(format!("tail fit skipped: {e}"))),
        Ok(sample) => match tail::fit(&sample) {
            Ok(f) => (Some(f), None),
            Err(TailError::InsufficientTail { n_tail, need }) => (
                None,
                Some(format!("tail fit skipped: {n_tail} tail samples, need {need}")),
            ),
            Err(e) => (None, Some(format!("tail fit failed: {e}"))),
        },
    };

    Ok(RunResult {
        config: cfg.clone(),
        omega_mean,
        u_series,
        omega_series,
        avalanches,
        fit,
        fit_warning,
    })
}

/// One grid cell of a sweep surface.
#[derive(Clone, Debug)]
pub struct SweepCell {
    pub l: u32,
    pub c_th: f64,
    pub omega_mean: f64,
    pub fit: Option<TailFit>,
    /// Per-cell failure, recorded instead of aborting the surface.
    pub error: Option<String>,
}

/// Min/max used for unit-interval rescaling of the surface quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceNorm {
    pub m_min: f64,
    pub m_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

#[derive(Clone, Debug)]
pub struct SweepSurface {
    /// Row-major over (l_values × c_th_values), covering the full product.
    pub cells: Vec<SweepCell>,
    pub norm: Option<SurfaceNorm>,
}

impl SweepSurface {
    /// (m_ccdf, omega_mean) rescaled to [0,1]; requires normalization.
    pub fn normalized(&self, cell: &SweepCell) -> Option<(f64, f64)> {
        let n = self.norm?;
        let fit = cell.fit.as_ref()?;
        let m = (fit.m_ccdf - n.m_min) / (n.m_max - n.m_min);
        let o = (cell.omega_mean - n.omega_min) / (n.omega_max - n.omega_min);
        Some((m, o))
    }
}

/// One pooled run per grid cell; cells independent, failures recorded in
/// place so one bad cell does not cost the rest of the surface.
pub fn sweep(
    l_values: &[u32],
    c_th_values: &[f64],
    base: &RunConfig,
) -> Result<SweepSurface, ExperimentError> {
    if l_values.is_empty() || c_th_values.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    let grid: Vec<(u32, f64)> = l_values
        .iter()
        .flat_map(|&l| c_th_values.iter().map(move |&c| (l, c)))
        .collect();
    let cells: Vec<SweepCell> = grid
        .into_par_iter()
        .map(|(l, c_th)| {
            let cfg = RunConfig { l, c_th, ..base.clone() };
            match run(&cfg) {
                Ok(r) => SweepCell {
                    l,
                    c_th,
                    omega_mean: r.omega_mean,
                    fit: r.fit,
                    error: r.fit_warning,
                },
                Err(e) => SweepCell {
                    l,
                    c_th,
                    omega_mean: f64::NAN,
                    fit: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SweepSurface { cells, norm: None })
}

/// Affine rescale of exponent and business level to [0,1] over the grid.
pub fn normalize_surface(surface: &SweepSurface) -> Result<SweepSurface, ExperimentError> {
    let ms: Vec<f64> = surface.cells.iter().filter_map(|c| c.fit.as_ref().map(|f| f.m_ccdf)).collect();
    let os: Vec<f64> = surface
        .cells
        .iter()
        .filter(|c| c.omega_mean.is_finite())
        .map(|c| c.omega_mean)
        .collect();
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (m_min, m_max) = span(&ms);
    let (omega_min, omega_max) = span(&os);
    if ms.len() < 2 || m_min == m_max {
        return Err(ExperimentError::ConstantField("exponent"));
    }
    if os.len() < 2 || omega_min == omega_max {
        return Err(ExperimentError::ConstantField("business level"));
    }
    Ok(SweepSurface {
        cells: surface.cells.clone(),
        norm: Some(SurfaceNorm { m_min, m_max, omega_min, omega_max }),
    })
}

/// Integer bisection for the smallest L whose value under `eval` is within
/// `rel_tol` of `target`, assuming `eval` is (stochastically) decreasing in
/// L. Ends with a ±2 local scan around the bisection point to absorb noise.
/// Returns (L, value at L, number of evaluations).
pub fn bisect_l<F>(
    mut eval: F,
    l_lo: u32,
    l_hi: u32,
    target: f64,
    rel_tol: f64,
) -> Result<(u32, f64, u32), ExperimentError>
where
    F: FnMut(u32) -> Result<f64, ExperimentError>,
{
    assert!(l_lo <= l_hi);
    let mut cache: BTreeMap<u32, f64> = BTreeMap::new();
    let mut evals = 0u32;
    let mut get = |l: u32, cache: &mut BTreeMap<u32, f64>, evals: &mut u32| -> Result<f64, ExperimentError> {
        if let Some(&v) = cache.get(&l) {
            return Ok(v);
        }
        let v = eval(l)?;
        *evals += 1;
        cache.insert(l, v);
        Ok(v)
    };

    let v_lo = get(l_lo, &mut cache, &mut evals)?;
    let v_hi = get(l_hi, &mut cache, &mut evals)?;
    // decreasing in L: the larger value sits at the smaller L
    if target > v_lo + 1e-12 || target < v_hi - 1e-12 {
        return Err(ExperimentError::BracketFailure { target, lo: v_lo, hi: v_hi });
    }

    let (mut lo, mut hi) = (l_lo, l_hi);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let v = get(mid, &mut cache, &mut evals)?;
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Omega is noisy; scan the immediate neighbourhood and keep the best.
    let center = hi;
    let scan_lo = center.saturating_sub(2).max(l_lo);
    let scan_hi = (center + 2).min(l_hi);
    let mut best: Option<(u32, f64)> = None;
    for l in scan_lo..=scan_hi {
        let v = get(l, &mut cache, &mut evals)?;
        let gap = (v - target).abs();
        let tol_ok = gap <= rel_tol * target.abs();
        match best {
            // prefer in-tolerance; among in-tolerance the smallest L, else the smallest gap
            Some((bl, bv)) => {
                let best_ok = (bv - target).abs() <= rel_tol * target.abs();
                let better = match (tol_ok, best_ok) {
                    (true, true) => l < bl,
                    (true, false) => true,
                    (false, true) => false,
                    (false, false) => gap < (bv - target).abs(),
                };
                if better {
                    best = Some((l, v));
                }
            }
            None => best = Some((l, v)),
        }
    }
    let (l, v) = best.expect("scan range nonempty");
    Ok((l, v, evals))
}

/// Searches for the neighbourhood size that restores `omega_target` at the
/// raised capital level, averaging Ω over the configured replicas.
pub fn find_l_for_omega(
    c_th: f64,
    omega_target: f64,
    base: &RunConfig,
    l_lo: u32,
    l_hi: u32,
    rel_tol: f64,
) -> Result<u32, ExperimentError> {
    let eval = |l: u32| -> Result<f64, ExperimentError> {
        let cfg = RunConfig { l, c_th, ..base.clone() };
        Ok(run(&cfg)?.omega_mean)
    };
    bisect_l(eval, l_lo, l_hi, omega_target, rel_tol).map(|(l, _, _)| l)
}

/// The three-state comparison: reference, raised threshold at constant L,
/// raised threshold at constant business level.
#[derive(Clone, Debug)]
pub struct ScenarioReport {
    pub f_0: RunResult,
    pub f_l: RunResult,
    pub f_omega: RunResult,
    /// Neighbourhood size found for the constant-Ω leg.
    pub l_omega: u32,
}

pub fn scenario_triplet(
    f0_cfg: &RunConfig,
    c_th_final: f64,
    l_min: u32,
    omega_tolerance: f64,
) -> Result<ScenarioReport, ExperimentError> {
    let f_0 = run(f0_cfg)?;
    let f_l = run(&RunConfig { c_th: c_th_final, ..f0_cfg.clone() })?;
    let l_omega = find_l_for_omega(
        c_th_final,
        f_0.omega_mean,
        f0_cfg,
        l_min,
        f0_cfg.l,
        omega_tolerance,
    )?;
    let f_omega = run(&RunConfig { l: l_omega, c_th: c_th_final, ..f0_cfg.clone() })?;
    Ok(ScenarioReport { f_0, f_l, f_omega, l_omega })
}
