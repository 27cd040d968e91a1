//! Bernstein-function symbols: the catalog of kinetic-term generators.
//!
//! A symbol here is a Bernstein function `psi` vanishing at zero, evaluated as
//! `psi(u) = catalog(u) + drift * u`. The catalog covers the usual subordinate
//! Brownian motion families:
//!
//! | kind             | catalog formula                         | range                       |
//! |------------------|-----------------------------------------|-----------------------------|
//! | `Linear`         | `u`                                     |                             |
//! | `Stable`         | `u^(a/2)`                               | `a in (0,2]`                |
//! | `Relativistic`   | `(u + m^(2/a))^(a/2) - m`               | `a in (0,2)`, `m >= 0`      |
//! | `SumOfStables`   | `u^(a/2) + u^(b/2)`                     | `0 < b < a <= 2`            |
//! | `GeometricStable`| `log(1 + u^(a/2))`                      | `a in (0,2]`                |
//! | `LogWeighted`    | `u^(a/2) * log(1+u)^(b/2)`              | `a in (0,2)`, `b in (0,2-a)`|
//! | `LogDamped`      | `u^(a/2) * log(1+u)^(-b/2)`             | `a in (0,2]`, `b in [0,a)`  |
//!
//! Also here: the universal extremum constant `theta` (an explicit 1-D
//! optimization over a Gaussian tail functional), weak-local-scaling and
//! tail-growth diagnostics, and the Mittag-Leffler function used as a
//! heat-bound diagnostic.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Catalog entry selector; see the module table for formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BernsteinKind {
    Linear,
    Stable,
    Relativistic,
    SumOfStables,
    GeometricStable,
    LogWeighted,
    LogDamped,
}

impl std::fmt::Display for BernsteinKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BernsteinKind::Linear => "linear",
            BernsteinKind::Stable => "stable",
            BernsteinKind::Relativistic => "relativistic",
            BernsteinKind::SumOfStables => "sum_of_stables",
            BernsteinKind::GeometricStable => "geometric_stable",
            BernsteinKind::LogWeighted => "log_weighted",
            BernsteinKind::LogDamped => "log_damped",
        };
        f.write_str(s)
    }
}

/// A validated Bernstein function from the catalog.
///
/// Construct through the named constructors (or deserialize and call
/// [`BernsteinSpec::validate`]); evaluation assumes the parameters are in
/// range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BernsteinSpec {
    pub kind: BernsteinKind,
    /// Primary exponent `a`; ignored by `Linear`.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Secondary exponent `b`; used by `SumOfStables`, `LogWeighted`, `LogDamped`.
    #[serde(default)]
    pub beta: f64,
    /// Mass parameter; used by `Relativistic` only.
    #[serde(default)]
    pub m: f64,
    /// Linear drift coefficient added as `drift * u`.
    #[serde(default)]
    pub drift: f64,
}

fn default_alpha() -> f64 {
    2.0
}

impl BernsteinSpec {
    pub fn linear() -> Self {
        BernsteinSpec {
            kind: BernsteinKind::Linear,
            alpha: 2.0,
            beta: 0.0,
            m: 0.0,
            drift: 0.0,
        }
    }

    pub fn stable(alpha: f64) -> Result<Self> {
        BernsteinSpec {
            kind: BernsteinKind::Stable,
            alpha,
            beta: 0.0,
            m: 0.0,
            drift: 0.0,
        }
        .validated()
    }

    pub fn relativistic(alpha: f64, m: f64) -> Result<Self> {
        BernsteinSpec {
            kind: BernsteinKind::Relativistic,
            alpha,
            beta: 0.0,
            m,
            drift: 0.0,
        }
        .validated()
    }

    pub fn sum_of_stables(alpha: f64, beta: f64) -> Result<Self> {
        BernsteinSpec {
            kind: BernsteinKind::SumOfStables,
            alpha,
            beta,
            m: 0.0,
            drift: 0.0,
        }
        .validated()
    }

    pub fn geometric_stable(alpha: f64) -> Result<Self> {
        BernsteinSpec {
            kind: BernsteinKind::GeometricStable,
            alpha,
            beta: 0.0,
            m: 0.0,
            drift: 0.0,
        }
        .validated()
    }

    pub fn log_weighted(alpha: f64, beta: f64) -> Result<Self> {
        BernsteinSpec {
            kind: BernsteinKind::LogWeighted,
            alpha,
            beta,
            m: 0.0,
            drift: 0.0,
        }
        .validated()
    }

    pub fn log_damped(alpha: f64, beta: f64) -> Result<Self> {
        BernsteinSpec {
            kind: BernsteinKind::LogDamped,
            alpha,
            beta,
            m: 0.0,
            drift: 0.0,
        }
        .validated()
    }

    pub fn with_drift(mut self, drift: f64) -> Result<Self> {
        self.drift = drift;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// Check the kind-dependent parameter ranges of the catalog.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::ParameterDomain(msg));
        let a = self.alpha;
        let b = self.beta;
        if !(a.is_finite() && b.is_finite() && self.m.is_finite() && self.drift.is_finite()) {
            return fail(format!("non-finite parameter in {self:?}"));
        }
        if self.drift < 0.0 {
            return fail(format!("drift must be >= 0, got {}", self.drift));
        }
        match self.kind {
            BernsteinKind::Linear => Ok(()),
            BernsteinKind::Stable => {
                if a <= 0.0 || a > 2.0 {
                    return fail(format!("stable: alpha must be in (0,2], got {a}"));
                }
                Ok(())
            }
            BernsteinKind::Relativistic => {
                if a <= 0.0 || a >= 2.0 {
                    return fail(format!("relativistic: alpha must be in (0,2), got {a}"));
                }
                if self.m < 0.0 {
                    return fail(format!("relativistic: m must be >= 0, got {}", self.m));
                }
                Ok(())
            }
            BernsteinKind::SumOfStables => {
                if !(0.0 < b && b < a && a <= 2.0) {
                    return fail(format!("sum_of_stables: need 0 < beta < alpha <= 2, got alpha={a} beta={b}"));
                }
                Ok(())
            }
            BernsteinKind::GeometricStable => {
                if a <= 0.0 || a > 2.0 {
                    return fail(format!("geometric_stable: alpha must be in (0,2], got {a}"));
                }
                Ok(())
            }
            BernsteinKind::LogWeighted => {
                if a <= 0.0 || a >= 2.0 {
                    return fail(format!("log_weighted: alpha must be in (0,2), got {a}"));
                }
                if !(0.0 < b && b < 2.0 - a) {
                    return fail(format!("log_weighted: beta must be in (0, 2-alpha), got {b}"));
                }
                Ok(())
            }
            BernsteinKind::LogDamped => {
                if a <= 0.0 || a > 2.0 {
                    return fail(format!("log_damped: alpha must be in (0,2], got {a}"));
                }
                if !(0.0 <= b && b < a) {
                    return fail(format!("log_damped: beta must be in [0, alpha), got {b}"));
                }
                Ok(())
            }
        }
    }

    /// Evaluate `psi(u)` for `u >= 0`. Exact zero at `u = 0`.
    pub fn eval(&self, u: f64) -> f64 {
        assert!(u >= 0.0, "psi is only defined for u >= 0, got {u}");
        if u == 0.0 {
            return 0.0;
        }
        let a2 = 0.5 * self.alpha;
        let b2 = 0.5 * self.beta;
        let core = match self.kind {
            BernsteinKind::Linear => u,
            BernsteinKind::Stable => u.powf(a2),
            BernsteinKind::Relativistic => {
                if self.m == 0.0 {
                    u.powf(a2)
                } else {
                    (u + self.m.powf(1.0 / a2)).powf(a2) - self.m
                }
            }
            BernsteinKind::SumOfStables => u.powf(a2) + u.powf(b2),
            BernsteinKind::GeometricStable => u.powf(a2).ln_1p(),
            BernsteinKind::LogWeighted => u.powf(a2) * u.ln_1p().powf(b2),
            BernsteinKind::LogDamped => {
                if self.beta == 0.0 {
                    u.powf(a2)
                } else {
                    u.powf(a2) * u.ln_1p().powf(-b2)
                }
            }
        };
        core + self.drift * u
    }

    /// Invert `psi` by bracketed bisection with exponential bracket growth.
    ///
    /// Stops when `|psi(u) - v| <= INV_RTOL * max(v, INV_ATOL)` and returns the
    /// midpoint; `v = 0` maps to `0` exactly. All catalog entries are strictly
    /// increasing, so the bracket is well defined whenever `psi` reaches `v`
    /// within f64 range.
    pub fn invert(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0) {
            return Err(Error::Precondition(format!(
                "psi inverse needs v >= 0, got {v}"
            )));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0_f64;
        let mut grow = 0;
        while self.eval(hi) < v {
            hi *= 2.0;
            grow += 1;
            if grow > 1100 || !hi.is_finite() {
                return Err(Error::Range(format!(
                    "psi never reaches {v} within f64 range (kind {})",
                    self.kind
                )));
            }
        }
        let mut lo = 0.0_f64;
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..INV_MAX_ITER {
            mid = 0.5 * (lo + hi);
            let f = self.eval(mid);
            if (f - v).abs() <= INV_RTOL * v.max(INV_ATOL) {
                return Ok(mid);
            }
            if f < v {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi.max(1.0) {
                // Bracket exhausted in f64; accept the midpoint if the residual
                // is merely at roundoff scale, otherwise report failure below.
                let f = self.eval(mid);
                if (f - v).abs() <= 64.0 * f64::EPSILON * v.max(1.0) + INV_RTOL * v.max(INV_ATOL) {
                    return Ok(mid);
                }
                break;
            }
        }
        Err(Error::Numerical(format!(
            "psi inverse did not converge for v={v} (kind {}, last residual {:.3e})",
            self.kind,
            (self.eval(mid) - v).abs()
        )))
    }

    /// Whether a subordinator increment sampler exists for this symbol.
    ///
    /// `LogWeighted`/`LogDamped` have no known elementary sampler, and the
    /// geometric family is sampled only at `alpha = 2` (the Gamma subordinator).
    pub fn sampler_supported(&self) -> bool {
        match self.kind {
            BernsteinKind::Linear
            | BernsteinKind::Stable
            | BernsteinKind::Relativistic
            | BernsteinKind::SumOfStables => true,
            BernsteinKind::GeometricStable => self.alpha == 2.0,
            BernsteinKind::LogWeighted | BernsteinKind::LogDamped => false,
        }
    }

    /// Local scaling exponent `mu` stated by the catalog, when there is one.
    pub fn catalog_mu(&self) -> Option<f64> {
        match self.kind {
            BernsteinKind::Linear => Some(1.0),
            BernsteinKind::Stable | BernsteinKind::Relativistic | BernsteinKind::LogWeighted => {
                Some(0.5 * self.alpha)
            }
            BernsteinKind::SumOfStables => Some(0.5 * self.alpha.min(self.beta)),
            BernsteinKind::LogDamped => Some(0.5 * (self.alpha - self.beta)),
            BernsteinKind::GeometricStable => None,
        }
    }
}

const INV_RTOL: f64 = 1e-10;
const INV_ATOL: f64 = 1e-14;
const INV_MAX_ITER: usize = 200;

/// Finite-grid scaling diagnostics for a symbol.
///
/// These are grid checks of limit statements, so a pass means "no violation
/// observed on the documented grids", never a certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingDiagnostics {
    /// Scaling exponent: the catalog value when stated, otherwise an
    /// empirical grid infimum of `log(psi(gu)/psi(u)) / log(g)`.
    pub mu: f64,
    pub mu_from_catalog: bool,
    /// Empirical weak-local-scaling constant: grid infimum of
    /// `psi(gu) / (g^mu * psi(u))` over `g >= 1`. Reported, not certified.
    pub c_lower: f64,
    /// Tail monotonicity of `psi(u^2)/log(u)` (growth needed for bounded,
    /// continuous transition densities).
    pub hw_passed: bool,
    /// For each `s`, the grid sup of `psi(s*g)/psi(g)`; vanishing as `s -> 0`
    /// is the small-argument uniformity used by the shell-distance bound.
    pub ht41_sup_curve: Vec<(f64, f64)>,
    /// Set when the empirical exponent is indistinguishable from zero.
    pub degenerate: bool,
}

/// Run the scaling diagnostics on caller-supplied grids.
///
/// Grids must be finite, strictly positive and (for meaningful tail checks)
/// log-spaced; `gamma_grid` should extend to at least `1/s^2` for the smallest
/// `s` probed, so that slowly varying symbols reveal their non-vanishing sup.
pub fn scaling_diagnostics(
    spec: &BernsteinSpec,
    u_grid: &[f64],
    gamma_grid: &[f64],
    s_grid: &[f64],
) -> ScalingDiagnostics {
    let (mu, mu_from_catalog) = match spec.catalog_mu() {
        Some(m) => (m, true),
        None => (empirical_mu(spec, u_grid, gamma_grid), false),
    };

    let mut c_lower = 1.0_f64;
    for &u in u_grid {
        let pu = spec.eval(u);
        if pu <= 0.0 {
            continue;
        }
        for &g in gamma_grid.iter().filter(|&&g| g >= 1.0) {
            let ratio = spec.eval(g * u) / (g.powf(mu) * pu);
            c_lower = c_lower.min(ratio);
        }
    }

    let ht41_sup_curve = s_grid
        .iter()
        .map(|&s| {
            let sup = gamma_grid
                .iter()
                .map(|&g| spec.eval(s * g) / spec.eval(g))
                .fold(0.0_f64, f64::max);
            (s, sup)
        })
        .collect();

    ScalingDiagnostics {
        mu,
        mu_from_catalog,
        c_lower,
        hw_passed: hartman_wintner_tail(spec, u_grid),
        ht41_sup_curve,
        degenerate: mu <= 1e-9,
    }
}

fn empirical_mu(spec: &BernsteinSpec, u_grid: &[f64], gamma_grid: &[f64]) -> f64 {
    let mut mu = f64::INFINITY;
    for &u in u_grid {
        let pu = spec.eval(u);
        if pu <= 0.0 {
            continue;
        }
        for &g in gamma_grid.iter().filter(|&&g| g > 1.0) {
            let slope = (spec.eval(g * u) / pu).ln() / g.ln();
            mu = mu.min(slope);
        }
    }
    if mu.is_finite() {
        mu.max(0.0)
    } else {
        0.0
    }
}

fn hartman_wintner_tail(spec: &BernsteinSpec, u_grid: &[f64]) -> bool {
    let tail: Vec<f64> = u_grid
        .iter()
        .copied()
        .filter(|&u| u > std::f64::consts::E)
        .map(|u| spec.eval(u * u) / u.ln())
        .collect();
    if tail.len() < 3 {
        return false;
    }
    let take = (tail.len() / 2).max(3).min(tail.len());
    let tail = &tail[tail.len() - take..];
    tail.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12))
}

/// The universal extremum constant and its optimizer.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThetaResult {
    /// `theta = max_{k>1} -(1/k) log(1 - F(-1)(1 - e^{1-k})) ~ 0.0833`.
    pub theta: f64,
    /// The maximizing `k`.
    pub kappa_star: f64,
    /// `F(-1)` for the N(0,2) distribution function, `~ 0.2398`.
    pub f_minus_one: f64,
}

/// `F(-1)` for N(0,2): the Gaussian tail weight entering `theta`.
pub fn gaussian_n02_cdf_at_minus_one() -> f64 {
    0.5 * erfc(0.5)
}

/// The objective `theta_k = -(1/k) log(1 - F(-1)(1 - e^{1-k}))`, `k > 1`.
///
/// It vanishes at both ends of `(1, inf)` and has a single interior maximum;
/// the universal constant is the maximal value.
pub fn theta_objective(kappa: f64) -> f64 {
    let f = gaussian_n02_cdf_at_minus_one();
    -(1.0 - f * (1.0 - (1.0 - kappa).exp())).ln() / kappa
}

/// Optimize the theta objective over `kappa` in `[lo, hi]`.
///
/// Coarse log-spaced scan to bracket the maximum, then golden-section.
pub fn theta_constant_on(lo: f64, hi: f64) -> ThetaResult {
    assert!(lo > 1.0 && hi > lo, "bracket must satisfy 1 < lo < hi");
    let n = 256;
    let (mut best_i, mut best_v) = (0, f64::NEG_INFINITY);
    let grid: Vec<f64> = (0..=n)
        .map(|i| lo * (hi / lo).powf(i as f64 / n as f64))
        .collect();
    for (i, &k) in grid.iter().enumerate() {
        let v = theta_objective(k);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut a = grid[best_i.saturating_sub(1)];
    let mut b = grid[(best_i + 1).min(n)];
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (theta_objective(c), theta_objective(d));
    while (b - a) > 1e-12 * b {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = theta_objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = theta_objective(d);
        }
    }
    let kappa_star = 0.5 * (a + b);
    ThetaResult {
        theta: theta_objective(kappa_star),
        kappa_star,
        f_minus_one: gaussian_n02_cdf_at_minus_one(),
    }
}

/// The universal constant on the default bracket.
pub fn theta_constant() -> ThetaResult {
    theta_constant_on(1.0 + 1e-6, 64.0)
}

/// Largest admissible argument for [`mittag_leffler`] at a given `eta`.
///
/// The direct series is used only as a proof-side diagnostic, so the argument
/// is capped: at 30 by policy, and earlier when `e^{x^{1/eta}}` (the value's
/// own growth scale) would leave f64 range.
pub fn mittag_leffler_cap(eta: f64) -> f64 {
    30.0_f64.min(700.0_f64.powf(eta))
}

/// Mittag-Leffler function `M_eta(x) = sum_k x^k / Gamma(1 + eta k)` by direct
/// series, for `eta in (0,1]` and `0 <= x <=` [`mittag_leffler_cap`].
pub fn mittag_leffler(eta: f64, x: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::ParameterDomain(format!(
            "mittag_leffler: eta must be in (0,1], got {eta}"
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::Precondition(format!(
            "mittag_leffler: x must be >= 0, got {x}"
        )));
    }
    let cap = mittag_leffler_cap(eta);
    if x > cap {
        return Err(Error::Range(format!(
            "mittag_leffler: x={x} exceeds the admissible cap {cap:.4} for eta={eta}"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let ln_x = x.ln();
    let mut sum = 0.0_f64;
    let mut prev = f64::NEG_INFINITY;
    for k in 0..20_000 {
        let ln_term = k as f64 * ln_x - ln_gamma(1.0 + eta * k as f64);
        let term = ln_term.exp();
        sum += term;
        // Terms rise to a single peak then decay super-geometrically.
        if ln_term < prev && term < 1e-14 * sum.max(1.0) {
            return Ok(sum);
        }
        prev = ln_term;
    }
    Err(Error::Numerical(format!(
        "mittag_leffler series did not settle for eta={eta}, x={x}"
    )))
}

/// Empirical envelope constant `m_eta`: the grid max of
/// `M_eta(x) / exp(x^{1/eta})`. Diagnostic for the bound shape
/// `M_eta(x) <= m_eta * exp(x^{1/eta})`.
pub fn mittag_leffler_envelope(eta: f64, xs: &[f64]) -> Result<f64> {
    let mut m = 0.0_f64;
    for &x in xs {
        let v = mittag_leffler(eta, x)?;
        m = m.max(v / x.powf(1.0 / eta).exp());
    }
    Ok(m)
}

/// Log-spaced grid helper used by diagnostics and tests.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}
