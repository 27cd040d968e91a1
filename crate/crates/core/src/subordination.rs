//! Subordinator and subordinate-Brownian-motion sampling, with Monte Carlo
//! estimators for exit times, survival probabilities and Feynman-Kac
//! functionals.
//!
//! Conventions. The driving Brownian motion runs twice as fast as standard
//! (per-coordinate increment variance `2 * dS`), so the generator of the
//! subordinate process is exactly `-psi(-Laplacian)` with the symbol
//! normalization used by the spectral module. All estimators observe paths on
//! the grid `t_k = k * dt`; exit is detected at the first grid time outside
//! the domain, an over-estimate of the true exit time by design, which the
//! refinement study quantifies.
//!
//! Reproducibility. Draws come from ChaCha8 with per-path substreams keyed by
//! `(seed, path index)`, so estimates are bit-identical for a fixed seed, path
//! batches can fan out to worker threads, and common-random-number couplings
//! across domains or observation grids are exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::{BernsteinKind, BernsteinSpec};
use crate::domain::ConvexDomain;
use crate::error::{Error, Result};

/// Hard cap on `horizon / dt`.
pub const STEP_CAP: usize = 1 << 24;

/// Fraction of censored paths above which estimates carry a warning.
pub const CENSOR_WARN_FRACTION: f64 = 0.01;

/// Monte Carlo discretization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    /// Subordinator time step.
    pub dt: f64,
    /// Simulation horizon; paths are observed on `t_k = k dt` up to it.
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl PathConfig {
    pub fn new(dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Result<Self> {
        let cfg = PathConfig { dt, horizon, n_paths, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::ParameterDomain(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) {
            return Err(Error::ParameterDomain(format!(
                "horizon must be >= dt, got horizon={} dt={}",
                self.horizon, self.dt
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::ParameterDomain("n_paths must be >= 1".into()));
        }
        let steps = (self.horizon / self.dt).round();
        if !(steps.is_finite() && steps >= 1.0 && (steps as usize) <= STEP_CAP) {
            return Err(Error::Capacity {
                what: "steps per path",
                got: if steps.is_finite() { steps as usize } else { usize::MAX },
                cap: STEP_CAP,
            });
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }
}

/// One sampled subordinate path observed on the time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubordinatePath {
    /// `t_k = k dt`, starting at 0.
    pub times: Vec<f64>,
    /// Subordinator values `S_{t_k}`, nondecreasing with `S_0 = 0`.
    pub s_values: Vec<f64>,
    /// Positions `X_{t_k}`, starting at `x0`.
    pub x_values: Vec<Vec<f64>>,
}

/// A Monte Carlo estimate with its sampling provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
    /// Paths still inside the domain at the horizon (exit-type estimators).
    pub censored: usize,
    pub warnings: Vec<String>,
}

impl McEstimate {
    fn from_values(values: &[f64], seed: u64, censored: usize) -> Self {
        let n = values.len();
        let mean = kahan_sum(values.iter().copied()) / n as f64;
        let var = if n > 1 {
            kahan_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n as f64 - 1.0)
        } else {
            0.0
        };
        let mut warnings = Vec::new();
        if censored as f64 >= CENSOR_WARN_FRACTION * n as f64 && censored > 0 {
            warnings.push(format!(
                "censoring: {censored}/{n} paths had not exited by the horizon"
            ));
        }
        McEstimate {
            mean,
            stderr: (var / n as f64).sqrt().max(0.0),
            n,
            seed,
            censored,
            warnings,
        }
    }
}

/// Compensated summation, so parallel batch order cannot leak into results.
pub fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut c = 0.0_f64;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// The per-path generator: ChaCha8 keyed by seed with the path index as the
/// stream number.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

fn uniform_open(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v: f64 = rng.gen();
        if v > 0.0 && v < 1.0 {
            return v;
        }
    }
}

/// Kanter's sampler for the standard one-sided stable law with Laplace
/// transform `exp(-lambda^beta)`, `beta in (0,1)`.
fn stable_subordinator_std(beta: f64, rng: &mut ChaCha8Rng) -> f64 {
    debug_assert!(beta > 0.0 && beta < 1.0);
    let u = std::f64::consts::PI * uniform_open(rng);
    let w: f64 = Exp1.sample(rng);
    let su = u.sin();
    (beta * u).sin() * su.powf(-1.0 / beta)
        * (((1.0 - beta) * u).sin() / w).powf((1.0 - beta) / beta)
}

/// One increment of the stable subordinator with exponent `psi(u) = u^(a/2)`
/// over time `dt`; degenerates to pure drift at `a = 2`.
fn stable_increment(alpha: f64, dt: f64, rng: &mut ChaCha8Rng) -> f64 {
    if alpha == 2.0 {
        return dt;
    }
    let beta = 0.5 * alpha;
    dt.powf(1.0 / beta) * stable_subordinator_std(beta, rng)
}

const TILT_REJECTION_CAP: usize = 100_000;

fn relativistic_increment(
    alpha: f64,
    m: f64,
    dt: f64,
    rng: &mut ChaCha8Rng,
    tries: &mut usize,
) -> Result<f64> {
    if m == 0.0 {
        *tries += 1;
        return Ok(stable_increment(alpha, dt, rng));
    }
    // Exponential tilting: propose from the stable law, accept with
    // probability exp(-m^(2/a) * s); overall acceptance rate exp(-m dt).
    let tilt = m.powf(2.0 / alpha);
    for _ in 0..TILT_REJECTION_CAP {
        *tries += 1;
        let s = stable_increment(alpha, dt, rng);
        if rng.gen::<f64>() < (-tilt * s).exp() {
            return Ok(s);
        }
    }
    Err(Error::Numerical(format!(
        "tilting rejection for relativistic increment exceeded {TILT_REJECTION_CAP} rounds \
         (m={m}, dt={dt}; acceptance rate exp(-m dt) = {:.3e})",
        (-m * dt).exp()
    )))
}

/// Draw `S_dt` for a supported symbol. Deterministic `dt` for pure drift.
pub fn sample_increment(spec: &BernsteinSpec, dt: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut tries = 0usize;
    sample_increment_counted(spec, dt, rng, &mut tries)
}

fn sample_increment_counted(
    spec: &BernsteinSpec,
    dt: f64,
    rng: &mut ChaCha8Rng,
    tries: &mut usize,
) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::Precondition(format!("dt must be > 0, got {dt}")));
    }
    let core = match spec.kind {
        BernsteinKind::Linear => dt,
        BernsteinKind::Stable => stable_increment(spec.alpha, dt, rng),
        BernsteinKind::Relativistic => relativistic_increment(spec.alpha, spec.m, dt, rng, tries)?,
        BernsteinKind::SumOfStables => {
            stable_increment(spec.alpha, dt, rng) + stable_increment(spec.beta, dt, rng)
        }
        BernsteinKind::GeometricStable if spec.alpha == 2.0 => {
            // Gamma subordinator: psi(u) = log(1 + u).
            Gamma::new(dt, 1.0)
                .map_err(|e| Error::Numerical(format!("gamma sampler: {e}")))?
                .sample(rng)
        }
        _ => return Err(Error::UnsupportedSampler(spec.kind.to_string())),
    };
    Ok(core + spec.drift * dt)
}

/// Sample a full subordinate path from `x0` on the grid of `cfg`, using the
/// substream `(cfg.seed, path_index)`.
pub fn sample_path(
    spec: &BernsteinSpec,
    x0: &[f64],
    cfg: &PathConfig,
    path_index: u64,
) -> Result<SubordinatePath> {
    cfg.validate()?;
    let d = x0.len();
    let steps = cfg.steps();
    let mut rng = path_rng(cfg.seed, path_index);
    let mut times = Vec::with_capacity(steps + 1);
    let mut s_values = Vec::with_capacity(steps + 1);
    let mut x_values = Vec::with_capacity(steps + 1);
    times.push(0.0);
    s_values.push(0.0);
    x_values.push(x0.to_vec());
    let mut s = 0.0_f64;
    let mut x = x0.to_vec();
    let mut tries = 0usize;
    for k in 1..=steps {
        let ds = sample_increment_counted(spec, cfg.dt, &mut rng, &mut tries)?;
        s += ds;
        let sd = (2.0 * ds).sqrt();
        for xi in x.iter_mut().take(d) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *xi += sd * z;
        }
        times.push(k as f64 * cfg.dt);
        s_values.push(s);
        x_values.push(x.clone());
    }
    Ok(SubordinatePath { times, s_values, x_values })
}

/// Mean of `exp(-u S_t)` over `n` independent draws of `S_t`; the sampling
/// law check against `exp(-t psi(u))`.
pub fn laplace_transform_estimate(
    spec: &BernsteinSpec,
    u: f64,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n == 0 {
        return Err(Error::ParameterDomain("n must be >= 1".into()));
    }
    let values = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            sample_increment(spec, t, &mut rng).map(|s| (-u * s).exp())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_values(&values, seed, 0))
}

/// Shared per-path walk: streams grid positions to `visit(k, x)`; `visit`
/// returns false to stop early. Returns the tilting-proposal count.
fn walk_path<F>(
    spec: &BernsteinSpec,
    x0: &[f64],
    cfg: &PathConfig,
    path_index: u64,
    mut visit: F,
) -> Result<usize>
where
    F: FnMut(usize, &[f64]) -> bool,
{
    let steps = cfg.steps();
    let mut rng = path_rng(cfg.seed, path_index);
    let mut x = x0.to_vec();
    let mut tries = 0usize;
    for k in 1..=steps {
        let ds = sample_increment_counted(spec, cfg.dt, &mut rng, &mut tries)?;
        let sd = (2.0 * ds).sqrt();
        for xi in x.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *xi += sd * z;
        }
        if !visit(k, &x) {
            return Ok(tries);
        }
    }
    Ok(tries)
}

fn require_sampler(spec: &BernsteinSpec) -> Result<()> {
    if spec.sampler_supported() {
        Ok(())
    } else {
        Err(Error::UnsupportedSampler(spec.kind.to_string()))
    }
}

fn tilting_note(
    spec: &BernsteinSpec,
    cfg: &PathConfig,
    steps_done: usize,
    tries: usize,
) -> Option<String> {
    if spec.kind == BernsteinKind::Relativistic && spec.m > 0.0 && tries > steps_done {
        let rate = steps_done as f64 / tries as f64;
        Some(format!(
            "tilting acceptance rate {:.4} (analytic exp(-m dt) = {:.4})",
            rate,
            (-spec.m * cfg.dt).exp()
        ))
    } else {
        None
    }
}

/// Estimate `E^{x0}[tau_D^p]` with exit detected on the observation grid.
/// Censored paths contribute `horizon^p` and are counted.
pub fn estimate_exit_moment(
    spec: &BernsteinSpec,
    domain: &ConvexDomain,
    x0: &[f64],
    p: f64,
    cfg: &PathConfig,
) -> Result<McEstimate> {
    require_sampler(spec)?;
    cfg.validate()?;
    if !(p >= 1.0) {
        return Err(Error::Precondition(format!("moment order p must be >= 1, got {p}")));
    }
    if !domain.contains(x0) {
        return Err(Error::Precondition(format!(
            "start point {x0:?} is not inside the domain"
        )));
    }
    let results = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, bool, usize, usize)> {
            let mut tau = cfg.horizon;
            let mut censored = true;
            let mut steps_done = 0usize;
            let tries = walk_path(spec, x0, cfg, i, |k, x| {
                steps_done = k;
                if !domain.contains(x) {
                    tau = k as f64 * cfg.dt;
                    censored = false;
                    return false;
                }
                true
            })?;
            Ok((tau.powf(p), censored, steps_done, tries))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let censored = results.iter().filter(|r| r.1).count();
    let mut est = McEstimate::from_values(&values, cfg.seed, censored);
    let steps: usize = results.iter().map(|r| r.2).sum();
    let tries: usize = results.iter().map(|r| r.3).sum();
    if let Some(note) = tilting_note(spec, cfg, steps, tries) {
        est.warnings.push(note);
    }
    Ok(est)
}

/// Per-path grid exit times (for CSV dumps).
pub fn exit_times(
    spec: &BernsteinSpec,
    domain: &ConvexDomain,
    x0: &[f64],
    cfg: &PathConfig,
) -> Result<Vec<f64>> {
    require_sampler(spec)?;
    cfg.validate()?;
    if !domain.contains(x0) {
        return Err(Error::Precondition(format!(
            "start point {x0:?} is not inside the domain"
        )));
    }
    (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut tau = cfg.horizon;
            walk_path(spec, x0, cfg, i, |k, x| {
                if !domain.contains(x) {
                    tau = k as f64 * cfg.dt;
                    return false;
                }
                true
            })?;
            Ok(tau)
        })
        .collect()
}

/// The step-refinement study backing the exit estimator: one simulation at
/// `cfg.dt / 4`, observed on the nested grids `dt`, `dt/2`, `dt/4`.
///
/// Finer grids observe strictly more of each path, so detected exit times are
/// pathwise nonincreasing under refinement and the three estimates decrease
/// monotonically toward the continuum value.
pub fn exit_refinement_study(
    spec: &BernsteinSpec,
    domain: &ConvexDomain,
    x0: &[f64],
    p: f64,
    cfg: &PathConfig,
) -> Result<Vec<(f64, McEstimate)>> {
    require_sampler(spec)?;
    if !domain.contains(x0) {
        return Err(Error::Precondition(format!(
            "start point {x0:?} is not inside the domain"
        )));
    }
    let fine = PathConfig::new(cfg.dt / 4.0, cfg.horizon, cfg.n_paths, cfg.seed)?;
    let fine_steps = fine.steps();
    // Per path: first observed exit index at subsampling strides 4, 2, 1.
    let per_path = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<[f64; 3]> {
            let mut taus = [cfg.horizon; 3];
            let mut seen = [false; 3];
            walk_path(spec, x0, &fine, i, |k, x| {
                let outside = !domain.contains(x);
                for (level, stride) in [4usize, 2, 1].into_iter().enumerate() {
                    if !seen[level] && k % stride == 0 && outside {
                        seen[level] = true;
                        taus[level] = k as f64 * fine.dt;
                    }
                }
                // The coarsest observer exits last; stop once it has.
                !(seen[0] || k == fine_steps)
            })?;
            Ok(taus)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for (level, stride) in [4usize, 2, 1].into_iter().enumerate() {
        let values: Vec<f64> = per_path.iter().map(|t| t[level].powf(p)).collect();
        let censored = per_path.iter().filter(|t| t[level] >= cfg.horizon).count();
        out.push((
            fine.dt * stride as f64,
            McEstimate::from_values(&values, cfg.seed, censored),
        ));
    }
    Ok(out)
}

/// Estimate the survival probability `P^{x0}(tau_D > t)`.
///
/// `t = 0` returns 1 exactly; a start point outside the domain returns 0 with
/// a warning rather than an error, mirroring how the killed semigroup treats
/// exterior points.
pub fn estimate_survival(
    spec: &BernsteinSpec,
    domain: &ConvexDomain,
    x0: &[f64],
    t: f64,
    cfg: &PathConfig,
) -> Result<McEstimate> {
    require_sampler(spec)?;
    cfg.validate()?;
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("t must be >= 0, got {t}")));
    }
    if !domain.contains(x0) {
        return Ok(McEstimate {
            mean: 0.0,
            stderr: 0.0,
            n: cfg.n_paths,
            seed: cfg.seed,
            censored: 0,
            warnings: vec![format!("start point {x0:?} lies outside the domain")],
        });
    }
    if t == 0.0 {
        return Ok(McEstimate {
            mean: 1.0,
            stderr: 0.0,
            n: cfg.n_paths,
            seed: cfg.seed,
            censored: 0,
            warnings: Vec::new(),
        });
    }
    let steps_to_t = (t / cfg.dt).round().max(1.0) as usize;
    if steps_to_t > cfg.steps() {
        return Err(Error::Precondition(format!(
            "t={t} exceeds the configured horizon {}",
            cfg.horizon
        )));
    }
    let run = PathConfig { horizon: steps_to_t as f64 * cfg.dt, ..*cfg };
    let values = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut alive = 1.0;
            walk_path(spec, x0, &run, i, |_, x| {
                if !domain.contains(x) {
                    alive = 0.0;
                    return false;
                }
                true
            })?;
            Ok(alive)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_values(&values, cfg.seed, 0))
}

/// Estimate the Feynman-Kac functional
/// `E^{x0}[exp(-int_0^t V(X_s) ds) f(X_t) 1_{tau_D > t}]`,
/// with the potential integral as a left-endpoint Riemann sum on the grid.
///
/// Pass `domain = None` for whole-space problems (no killing). The caller
/// asserts `|V| <= v_bound` on the relevant region; a path evaluation outside
/// that bound is a contract violation.
#[allow(clippy::too_many_arguments)]
pub fn estimate_feynman_kac<V, F>(
    spec: &BernsteinSpec,
    domain: Option<&ConvexDomain>,
    v: &V,
    v_bound: f64,
    f: &F,
    x0: &[f64],
    t: f64,
    cfg: &PathConfig,
) -> Result<McEstimate>
where
    V: Fn(&[f64]) -> f64 + Sync,
    F: Fn(&[f64]) -> f64 + Sync,
{
    require_sampler(spec)?;
    cfg.validate()?;
    if let Some(d) = domain {
        if !d.contains(x0) {
            return Err(Error::Precondition(format!(
                "start point {x0:?} is not inside the domain"
            )));
        }
    }
    let steps_to_t = (t / cfg.dt).round().max(1.0) as usize;
    if steps_to_t > cfg.steps() {
        return Err(Error::Precondition(format!(
            "t={t} exceeds the configured horizon {}",
            cfg.horizon
        )));
    }
    let run = PathConfig { horizon: steps_to_t as f64 * cfg.dt, ..*cfg };
    let bound_ok = |val: f64| val.is_finite() && val.abs() <= v_bound + 1e-12 * v_bound.abs().max(1.0);
    let values = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut integral = 0.0_f64;
            let mut prev = x0.to_vec();
            let mut killed = false;
            let mut violated = None;
            let mut last: Vec<f64> = prev.clone();
            walk_path(spec, x0, &run, i, |_, x| {
                // Left endpoint: accumulate V at the previous grid position.
                let val = v(&prev);
                if !bound_ok(val) {
                    violated = Some((val, prev.clone()));
                    return false;
                }
                integral += cfg.dt * val;
                prev.copy_from_slice(x);
                last.copy_from_slice(x);
                if let Some(d) = domain {
                    if !d.contains(x) {
                        killed = true;
                        return false;
                    }
                }
                true
            })?;
            if let Some((val, at)) = violated {
                return Err(Error::Contract(format!(
                    "potential value {val} at {at:?} exceeds the declared bound {v_bound}"
                )));
            }
            Ok(if killed { 0.0 } else { (-integral).exp() * f(&last) })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_values(&values, cfg.seed, 0))
}

/// Estimate the potential-weighted mean survival time
/// `E^{x0}[int_0^{tau_D} exp(-int_0^t V(X_s) ds) dt]`,
/// truncated at the horizon (censoring counted). With `V = 0` this is the
/// first exit moment at `p = 1`.
pub fn estimate_fk_survival_time<V>(
    spec: &BernsteinSpec,
    domain: &ConvexDomain,
    v: &V,
    v_bound: f64,
    x0: &[f64],
    cfg: &PathConfig,
) -> Result<McEstimate>
where
    V: Fn(&[f64]) -> f64 + Sync,
{
    require_sampler(spec)?;
    cfg.validate()?;
    if !domain.contains(x0) {
        return Err(Error::Precondition(format!(
            "start point {x0:?} is not inside the domain"
        )));
    }
    let bound_ok = |val: f64| val.is_finite() && val.abs() <= v_bound + 1e-12 * v_bound.abs().max(1.0);
    let results = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, bool)> {
            let mut acc = 0.0_f64;
            let mut integral = 0.0_f64;
            let mut prev = x0.to_vec();
            let mut censored = true;
            let mut violated = None;
            walk_path(spec, x0, cfg, i, |_, x| {
                let val = v(&prev);
                if !bound_ok(val) {
                    violated = Some((val, prev.clone()));
                    return false;
                }
                // The slab [t_{k-1}, t_k) is weighted at its left endpoint.
                acc += cfg.dt * (-integral).exp();
                integral += cfg.dt * val;
                prev.copy_from_slice(x);
                if !domain.contains(x) {
                    censored = false;
                    return false;
                }
                true
            })?;
            if let Some((val, at)) = violated {
                return Err(Error::Contract(format!(
                    "potential value {val} at {at:?} exceeds the declared bound {v_bound}"
                )));
            }
            Ok((acc, censored))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let censored = results.iter().filter(|r| r.1).count();
    Ok(McEstimate::from_values(&values, cfg.seed, censored))
}
