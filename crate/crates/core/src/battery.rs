//! Manifest-driven experiment orchestration: one validated config in, one
//! deterministic bundle of reports, eigenpair summaries, plot tables and
//! metrics out. The CLI and the acceptance suite both run through here.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::{theta_constant, BernsteinKind, BernsteinSpec};
use crate::bounds::{
    check_exit_sandwich, check_extremum_bound, check_faber_krahn, check_hotspot,
    check_kappa_shell_bound, check_moment_bounds, check_nogo, check_sublevel_localization,
    check_survival_lower, check_torsion_comparison, check_well_interior, check_well_support,
    v_stats_on_grid, BoundReport, VStats, WellSpec,
};
use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::spectral::{
    add_potential, assemble_operator, eigensolve, torsion, DiscreteOperator, EigenPair, GridDomain,
};
use crate::subordination::{estimate_survival, exit_times, PathConfig};

/// Config schema version accepted by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Registry of check names a config may reference.
pub const CHECK_NAMES: &[&str] = &[
    "extremum-distance",
    "faber-krahn",
    "survival-lower",
    "moment-bounds",
    "exit-sandwich",
    "hotspot-distance",
    "sublevel-localization",
    "well-support",
    "well-interior",
    "well-threshold-no-go",
    "torsion-comparison",
    "shell-distance",
];

const MC_CHECKS: &[&str] = &["survival-lower", "moment-bounds", "exit-sandwich"];

/// Killed problems restrict to a domain; whole-space problems use the box as
/// a large torus with no killing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Killed,
    FullSpace,
}

/// Grid resolution and embedding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_per_axis: usize,
    #[serde(default = "default_embed_factor")]
    pub embed_factor: f64,
}

fn default_embed_factor() -> f64 {
    4.0
}

/// Potential descriptor; `eval` gives the multiplication operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialConfig {
    None,
    Constant { c: f64 },
    /// Indicator well `V = -depth` on the support.
    Well { support: ConvexDomain, depth: f64 },
    /// `V(x) = coeff * |x - center|^2`.
    Quadratic { coeff: f64, center: Vec<f64> },
    /// Truncated attractive singularity `V(x) = -min(cap, |x-center|^-gamma)`;
    /// place the center off-grid (half-cell offset) so every node is finite.
    KatoTruncated { center: Vec<f64>, gamma: f64, cap: f64 },
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig::None
    }
}

impl PotentialConfig {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            PotentialConfig::None => 0.0,
            PotentialConfig::Constant { c } => *c,
            PotentialConfig::Well { support, depth } => {
                if support.contains(x) {
                    -depth
                } else {
                    0.0
                }
            }
            PotentialConfig::Quadratic { coeff, center } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                coeff * r2
            }
            PotentialConfig::KatoTruncated { center, gamma, cap } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                -(cap.min(r2.sqrt().powf(-gamma)))
            }
        }
    }

    /// A sup-norm bound of `|V|` valid on the grid box.
    pub fn sup_bound(&self, grid: &GridDomain) -> f64 {
        match self {
            PotentialConfig::None => 0.0,
            PotentialConfig::Constant { c } => c.abs(),
            PotentialConfig::Well { depth, .. } => *depth,
            PotentialConfig::Quadratic { coeff, center } => {
                let mut far2 = 0.0_f64;
                for k in 0..grid.dim {
                    let lo = grid.box_lo[k] - center[k];
                    let hi = grid.box_lo[k] + grid.box_side - center[k];
                    far2 += lo.abs().max(hi.abs()).powi(2);
                }
                coeff.abs() * far2
            }
            PotentialConfig::KatoTruncated { cap, .. } => *cap,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, PotentialConfig::None)
    }
}

/// One experiment: spectral solve plus the requested checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub spec: BernsteinSpec,
    pub domain: ConvexDomain,
    #[serde(default)]
    pub potential: PotentialConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub mc: Option<PathConfig>,
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default = "default_k")]
    pub k_eigenpairs: usize,
    /// Times probed by the survival check.
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    /// Moment orders probed by the moment check.
    #[serde(default = "default_p_list")]
    pub p_list: Vec<f64>,
    /// Output path prefix (consumed by the CLI, ignored here).
    #[serde(default)]
    pub output: Option<String>,
}

fn default_k() -> usize {
    1
}

fn default_t_grid() -> Vec<f64> {
    vec![0.0, 0.5, 1.0]
}

fn default_p_list() -> Vec<f64> {
    vec![1.0, 2.0]
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::ParameterDomain(format!(
                "config schema_version {} not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.spec.validate()?;
        if let Some(mc) = &self.mc {
            mc.validate()?;
        }
        if self.k_eigenpairs == 0 || self.k_eigenpairs > 64 {
            return Err(Error::ParameterDomain(format!(
                "k_eigenpairs must be in 1..=64, got {}",
                self.k_eigenpairs
            )));
        }
        for check in &self.checks {
            if !CHECK_NAMES.contains(&check.as_str()) {
                return Err(Error::ParameterDomain(format!(
                    "unknown check `{check}`; known checks: {}",
                    CHECK_NAMES.join(", ")
                )));
            }
            if MC_CHECKS.contains(&check.as_str()) && self.mc.is_none() {
                return Err(Error::ParameterDomain(format!(
                    "check `{check}` needs Monte Carlo parameters (`mc`)"
                )));
            }
        }
        let has = |name: &str| self.checks.iter().any(|c| c == name);
        if has("hotspot-distance")
            && (self.spec.kind != BernsteinKind::Linear || !self.potential.is_none())
        {
            return Err(Error::Precondition(
                "hotspot-distance applies to the linear symbol without potential".into(),
            ));
        }
        if has("sublevel-localization")
            && !matches!(self.potential, PotentialConfig::Quadratic { .. })
        {
            return Err(Error::Precondition(
                "sublevel-localization expects the quadratic (convex increasing) potential".into(),
            ));
        }
        if (has("well-support") || has("well-interior") || has("well-threshold-no-go"))
            && !(self.mode == Mode::FullSpace
                && matches!(self.potential, PotentialConfig::Well { .. }))
        {
            return Err(Error::Precondition(
                "well checks need full-space mode with an indicator-well potential".into(),
            ));
        }
        if has("shell-distance")
            && !(self.mode == Mode::Killed && matches!(self.potential, PotentialConfig::Well { .. }))
        {
            return Err(Error::Precondition(
                "shell-distance needs a killed problem with a compactly supported well".into(),
            ));
        }
        if has("torsion-comparison") && !self.potential.is_none() {
            return Err(Error::Precondition(
                "torsion-comparison needs the free operator (no potential)".into(),
            ));
        }
        if self.mode == Mode::FullSpace {
            let (lo, hi) = self.domain.bounding_box();
            let extents: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
            let spread = extents.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - extents.iter().cloned().fold(f64::INFINITY, f64::min);
            if spread > 1e-12 {
                return Err(Error::Precondition(
                    "full-space mode needs a cubic box domain".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Compact eigenpair record for reports and JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub index: usize,
    pub lambda: f64,
    pub x_star: Vec<f64>,
    pub r_star: f64,
    pub residual: f64,
    pub argmax_ties: usize,
}

impl From<&EigenPair> for PairSummary {
    fn from(p: &EigenPair) -> Self {
        PairSummary {
            index: p.index,
            lambda: p.lambda,
            x_star: p.x_star.clone(),
            r_star: p.r_star,
            residual: p.residual,
            argmax_ties: p.argmax_ties,
        }
    }
}

/// A rectangular data table destined for CSV emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Grid metadata embedded in outputs for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub n_per_axis: usize,
    pub embed_factor: f64,
    pub h: f64,
    pub box_side: f64,
    pub interior_count: usize,
    pub full_space: bool,
}

/// Everything one experiment produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub name: String,
    pub reports: Vec<BoundReport>,
    pub pairs: Vec<PairSummary>,
    pub tables: Vec<NamedTable>,
    pub metrics: BTreeMap<String, f64>,
    pub grid: GridMeta,
}

/// Classical principal eigenvalue of the unit ball, by the same pipeline
/// (analytic on the line, computed once in the plane).
pub fn lambda1_unit_ball(d: usize) -> Result<f64> {
    match d {
        1 => Ok(std::f64::consts::PI.powi(2) / 4.0),
        2 => {
            static CACHE: OnceLock<f64> = OnceLock::new();
            if let Some(v) = CACHE.get() {
                return Ok(*v);
            }
            let dom = ConvexDomain::ball(vec![0.0, 0.0], 1.0)?;
            let grid = GridDomain::new(dom, 64, 4.0)?;
            let op = assemble_operator(&grid, &BernsteinSpec::linear())?;
            let lam = eigensolve(&op, 1)?[0].lambda;
            Ok(*CACHE.get_or_init(|| lam))
        }
        _ => Err(Error::Precondition(format!(
            "unit-ball reference eigenvalue computed for d <= 2, got d={d}"
        ))),
    }
}

fn build_grid(cfg: &ExperimentConfig) -> Result<GridDomain> {
    match cfg.mode {
        Mode::Killed => GridDomain::new(
            cfg.domain.clone(),
            cfg.grid.n_per_axis,
            cfg.grid.embed_factor,
        ),
        Mode::FullSpace => {
            let (lo, hi) = cfg.domain.bounding_box();
            let side = hi[0] - lo[0];
            GridDomain::in_box(cfg.domain.clone(), lo, side, cfg.grid.n_per_axis, true)
        }
    }
}

fn eigenfunction_table(grid: &GridDomain, pair: &EigenPair) -> NamedTable {
    let d = grid.dim;
    let mut header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
    header.push("phi".into());
    let rows = (0..grid.interior_count())
        .map(|i| {
            let mut row = grid.interior_point(i);
            row.push(pair.phi[i]);
            row
        })
        .collect();
    NamedTable {
        name: format!("eigenfunction-k{}", pair.index),
        header,
        rows,
    }
}

/// Run one validated experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let theta = theta_constant().theta;
    let grid = build_grid(cfg)?;
    let free_op = assemble_operator(&grid, &cfg.spec)?;
    let op: DiscreteOperator = if cfg.potential.is_none() {
        free_op.clone()
    } else {
        add_potential(&free_op, |x| cfg.potential.eval(x))?
    };
    let pairs = eigensolve(&op, cfg.k_eigenpairs)?;
    let v_stats: VStats = v_stats_on_grid(&grid, |x| cfg.potential.eval(x));
    let v_bound = cfg.potential.sup_bound(&grid);

    let mut reports: Vec<BoundReport> = Vec::new();
    let mut tables: Vec<NamedTable> = Vec::new();
    let mut metrics: BTreeMap<String, f64> = BTreeMap::new();
    metrics.insert("lambda1".into(), pairs[0].lambda);
    metrics.insert("r_star1".into(), pairs[0].r_star);
    metrics.insert("theta".into(), theta);

    for check in &cfg.checks {
        match check.as_str() {
            "extremum-distance" => {
                for pair in &pairs {
                    reports.push(check_extremum_bound(
                        pair, &cfg.spec, &cfg.domain, &v_stats, theta, grid.h,
                    ));
                }
            }
            "faber-krahn" => {
                for pair in &pairs {
                    reports.push(check_faber_krahn(
                        pair, &cfg.spec, &cfg.domain, &v_stats, theta,
                    )?);
                }
            }
            "survival-lower" => {
                let mc = cfg.mc.as_ref().unwrap();
                reports.extend(check_survival_lower(
                    &pairs[0],
                    &cfg.spec,
                    &cfg.domain,
                    &|x: &[f64]| cfg.potential.eval(x),
                    v_bound,
                    &v_stats,
                    &cfg.t_grid,
                    mc,
                )?);
                // Plot data for the probed times.
                let mut rows = Vec::new();
                for &t in cfg.t_grid.iter().filter(|&&t| t > 0.0) {
                    let est = estimate_survival(&cfg.spec, &cfg.domain, &pairs[0].x_star, t, mc)?;
                    rows.push(vec![t, est.mean, est.stderr]);
                }
                tables.push(NamedTable {
                    name: "survival-curve".into(),
                    header: vec!["t".into(), "survival".into(), "stderr".into()],
                    rows,
                });
            }
            "moment-bounds" => {
                let mc = cfg.mc.as_ref().unwrap();
                reports.extend(check_moment_bounds(
                    pairs[0].lambda,
                    &cfg.spec,
                    &cfg.domain,
                    &cfg.p_list,
                    mc,
                )?);
            }
            "exit-sandwich" => {
                let mc = cfg.mc.as_ref().unwrap();
                let rep = check_exit_sandwich(&cfg.spec, &cfg.domain, mc)?;
                if let Some(note) = &rep.note {
                    if let Some(rho) = note
                        .split("rho = ")
                        .nth(1)
                        .and_then(|s| s.split_whitespace().next())
                        .and_then(|s| s.parse::<f64>().ok())
                    {
                        metrics.insert("exit_sandwich_rho".into(), rho);
                    }
                }
                reports.push(rep);
            }
            "hotspot-distance" => {
                let lam_ball = lambda1_unit_ball(grid.dim)?;
                reports.push(check_hotspot(&pairs[0], &cfg.domain, theta, lam_ball, grid.h));
            }
            "sublevel-localization" => {
                reports.push(check_sublevel_localization(
                    &pairs[0],
                    &|x: &[f64]| cfg.potential.eval(x),
                    &grid,
                )?);
            }
            "well-support" | "well-interior" | "well-threshold-no-go" => {
                let PotentialConfig::Well { support, depth } = &cfg.potential else {
                    unreachable!("validated");
                };
                let well = WellSpec::indicator(support.clone(), *depth)?;
                let rep = match check.as_str() {
                    "well-support" => check_well_support(&pairs[0], &well, grid.h),
                    "well-interior" => check_well_interior(&pairs[0], &well, &cfg.spec, grid.h),
                    _ => {
                        let lambdas: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
                        check_nogo(&well, &cfg.spec, &lambdas)
                    }
                };
                reports.push(rep);
            }
            "torsion-comparison" => {
                let v = torsion(&free_op)?;
                let sup = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let c = pairs[0].lambda * sup;
                metrics.insert("torsion_sup".into(), sup);
                reports.push(check_torsion_comparison(&v, &pairs[0], c, &grid));
                let mut header: Vec<String> = (0..grid.dim).map(|k| format!("x{k}")).collect();
                header.push("torsion".into());
                tables.push(NamedTable {
                    name: "torsion".into(),
                    header,
                    rows: (0..grid.interior_count())
                        .map(|i| {
                            let mut row = grid.interior_point(i);
                            row.push(v[i]);
                            row
                        })
                        .collect(),
                });
            }
            "shell-distance" => {
                let PotentialConfig::Well { support, .. } = &cfg.potential else {
                    unreachable!("validated");
                };
                reports.push(check_kappa_shell_bound(
                    &pairs[0], &cfg.spec, &cfg.domain, support, grid.h,
                )?);
            }
            other => unreachable!("validated check `{other}`"),
        }
    }

    for pair in &pairs {
        tables.push(eigenfunction_table(&grid, pair));
    }

    Ok(ExperimentOutput {
        name: cfg.name.clone(),
        reports,
        pairs: pairs.iter().map(PairSummary::from).collect(),
        tables,
        metrics,
        grid: GridMeta {
            n_per_axis: grid.n_per_axis,
            embed_factor: cfg.grid.embed_factor,
            h: grid.h,
            box_side: grid.box_side,
            interior_count: grid.interior_count(),
            full_space: grid.full_space,
        },
    })
}

/// Per-path exit times for the `--dump-paths` CSV flag.
pub fn dump_exit_times(cfg: &ExperimentConfig, x0: &[f64]) -> Result<Vec<f64>> {
    let mc = cfg
        .mc
        .as_ref()
        .ok_or_else(|| Error::Precondition("dump-paths needs Monte Carlo parameters".into()))?;
    exit_times(&cfg.spec, &cfg.domain, x0, mc)
}

/// A battery: named list of experiments run as one reproducible unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryManifest {
    pub schema_version: u32,
    pub name: String,
    pub entries: Vec<ExperimentConfig>,
}

/// Battery result: per-entry outputs plus battery-level derived reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryOutput {
    pub name: String,
    pub entries: Vec<ExperimentOutput>,
    /// Cross-entry reports (e.g. the exit-sandwich spread at fixed dimension).
    pub derived: Vec<BoundReport>,
    pub hard_failures: usize,
}

impl BatteryManifest {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::ParameterDomain(format!(
                "manifest schema_version {} not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.entries.is_empty() {
            return Err(Error::ParameterDomain("battery has no entries".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.entries {
            e.validate()?;
            if !seen.insert(&e.name) {
                return Err(Error::ParameterDomain(format!(
                    "duplicate battery entry name `{}`",
                    e.name
                )));
            }
        }
        Ok(())
    }
}

/// Run every entry (entries are independent and run in parallel), then build
/// battery-level derived reports. Entry outputs keep manifest order; reports
/// inside an entry are sorted by name for deterministic emission.
pub fn run_battery(manifest: &BatteryManifest) -> Result<BatteryOutput> {
    manifest.validate()?;
    let mut entries: Vec<ExperimentOutput> = manifest
        .entries
        .par_iter()
        .map(run_experiment)
        .collect::<Result<Vec<_>>>()?;
    for out in &mut entries {
        out.reports.sort_by(|a, b| a.name.cmp(&b.name));
    }

    let mut derived = Vec::new();
    // Spread of the exit-sandwich ratio at fixed dimension: the shape of
    // "constants depending only on d" that is actually testable at desk
    // scale. Two orders of magnitude is the declared stability bracket.
    let mut rho_by_dim: BTreeMap<usize, Vec<(String, f64)>> = BTreeMap::new();
    for (out, cfg) in entries.iter().zip(&manifest.entries) {
        if let Some(rho) = out.metrics.get("exit_sandwich_rho") {
            rho_by_dim
                .entry(cfg.domain.dim())
                .or_default()
                .push((out.name.clone(), *rho));
        }
    }
    for (d, rhos) in rho_by_dim {
        if rhos.len() < 2 {
            continue;
        }
        let max = rhos.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        let min = rhos.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let spread = (max / min).log10();
        let mut rep = BoundReport {
            name: format!("exit-sandwich-spread[d={d}]"),
            lhs: 2.0,
            rhs: spread,
            slack: 2.0 - spread,
            pass: spread <= 2.0,
            tolerance: 0.0,
            diagnostic: false,
            skipped: false,
            inputs: Vec::new(),
            note: None,
        };
        rep.note = Some(format!(
            "rho range [{min:.4}, {max:.4}] over {} entries: {}",
            rhos.len(),
            rhos.iter()
                .map(|(n, r)| format!("{n}={r:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ));
        derived.push(rep);
    }

    let hard_failures = entries
        .iter()
        .flat_map(|e| e.reports.iter())
        .chain(derived.iter())
        .filter(|r| r.is_hard_failure())
        .count();

    Ok(BatteryOutput {
        name: manifest.name.clone(),
        entries,
        derived,
        hard_failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config(name: &str, checks: &[&str]) -> ExperimentConfig {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            spec: BernsteinSpec::stable(1.0).unwrap(),
            domain: ConvexDomain::interval(-1.0, 1.0).unwrap(),
            potential: PotentialConfig::None,
            grid: GridConfig { n_per_axis: 256, embed_factor: 4.0 },
            mode: Mode::Killed,
            mc: Some(PathConfig::new(2e-3, 10.0, 800, 7).unwrap()),
            checks: checks.iter().map(|s| s.to_string()).collect(),
            k_eigenpairs: 2,
            t_grid: vec![0.0, 0.5],
            p_list: vec![1.0],
            output: None,
        }
    }

    #[test]
    fn unknown_check_is_named_in_the_error() {
        let mut cfg = quick_config("bad", &["extremum-distance"]);
        cfg.checks.push("no-such-check".into());
        let err = cfg.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("no-such-check"), "{msg}");
    }

    #[test]
    fn mc_checks_require_mc_config() {
        let mut cfg = quick_config("needs-mc", &["moment-bounds"]);
        cfg.mc = None;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn check_compatibility_rules() {
        // Hotspot on a non-linear symbol is rejected up front.
        let cfg = quick_config("hs", &["hotspot-distance"]);
        assert!(cfg.validate().is_err());
        // Well checks need full-space mode and a well.
        let cfg2 = quick_config("well", &["well-support"]);
        assert!(cfg2.validate().is_err());
    }

    #[test]
    fn run_experiment_end_to_end() {
        let cfg = quick_config("e2e", &["extremum-distance", "faber-krahn", "exit-sandwich"]);
        let out = run_experiment(&cfg).unwrap();
        // 2 pairs x 2 deterministic checks + 1 sandwich.
        assert_eq!(out.reports.len(), 5);
        assert!(out.reports.iter().all(|r| r.pass || r.skipped));
        assert_eq!(out.pairs.len(), 2);
        assert!(out.metrics.contains_key("exit_sandwich_rho"));
        assert!(out.tables.iter().any(|t| t.name == "eigenfunction-k1"));
        assert_eq!(out.grid.interior_count, out.tables.last().unwrap().rows.len());
    }

    #[test]
    fn experiment_outputs_are_deterministic() {
        let cfg = quick_config("det", &["extremum-distance", "moment-bounds"]);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn battery_runs_and_derives_spread() {
        let manifest = BatteryManifest {
            schema_version: SCHEMA_VERSION,
            name: "mini".into(),
            entries: vec![
                {
                    let mut c = quick_config("a", &["exit-sandwich"]);
                    c.spec = BernsteinSpec::linear();
                    c
                },
                {
                    let mut c = quick_config("b", &["exit-sandwich"]);
                    c.spec = BernsteinSpec::linear();
                    c.domain = ConvexDomain::interval(-0.5, 0.5).unwrap();
                    c.mc = Some(PathConfig::new(5e-4, 4.0, 800, 7).unwrap());
                    c
                },
            ],
        };
        let out = run_battery(&manifest).unwrap();
        assert_eq!(out.entries.len(), 2);
        assert_eq!(out.derived.len(), 1);
        assert!(out.derived[0].name.contains("d=1"));
        assert!(out.derived[0].pass, "{:?}", out.derived[0]);
        assert_eq!(out.hard_failures, 0);
    }

    #[test]
    fn duplicate_entry_names_rejected() {
        let manifest = BatteryManifest {
            schema_version: SCHEMA_VERSION,
            name: "dup".into(),
            entries: vec![
                quick_config("same", &["extremum-distance"]),
                quick_config("same", &["faber-krahn"]),
            ],
        };
        assert!(manifest.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = quick_config("json", &["extremum-distance"]);
        let s = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(cfg, back);
        // Unknown fields must be rejected (schema strictness).
        let broken = s.replace("\"name\"", "\"bogus_field\": 1, \"name\"");
        assert!(serde_json::from_str::<ExperimentConfig>(&broken).is_err());
    }

    #[test]
    fn full_space_well_pipeline() {
        let cfg = ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            name: "well".into(),
            spec: BernsteinSpec::linear(),
            domain: ConvexDomain::interval(-8.0, 8.0).unwrap(),
            potential: PotentialConfig::Well {
                support: ConvexDomain::interval(-1.0, 1.0).unwrap(),
                depth: 10.0,
            },
            grid: GridConfig { n_per_axis: 512, embed_factor: 1.0 },
            mode: Mode::FullSpace,
            mc: None,
            checks: vec!["well-support".into(), "well-threshold-no-go".into()],
            k_eigenpairs: 3,
            t_grid: default_t_grid(),
            p_list: default_p_list(),
            output: None,
        };
        let out = run_experiment(&cfg).unwrap();
        assert!(out.pairs[0].lambda < 0.0);
        let support = out.reports.iter().find(|r| r.name == "well-support").unwrap();
        assert!(support.pass && !support.skipped);
        let nogo = out.reports.iter().find(|r| r.name == "well-threshold-no-go").unwrap();
        assert!(nogo.diagnostic);
    }
}
