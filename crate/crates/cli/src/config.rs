use std::path::PathBuf;

use khessian_core::analysis::AtomPattern;
use khessian_core::fixedpoint::{FinderOptions, Polytope};
use khessian_core::grid::{GridSpec, MAX_DIM};
use khessian_core::solver::{Datum, Operator, ProblemSpec, SolverOptions, Space};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Sweep,
    LinearCheck,
    KhessianCheck,
    Analysis,
    FixedpointDemo,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::LinearCheck => "linear-check",
            Command::KhessianCheck => "khessian-check",
            Command::Analysis => "analysis",
            Command::FixedpointDemo => "fixedpoint-demo",
        }
    }
}

/// One run. Only the sections the command reads may be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_check: Option<LinearCheckConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub khessian_check: Option<KhessianCheckConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixedpoint: Option<FixedpointConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub points: usize,
    pub half_length: f64,
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec, CliError> {
        Ok(GridSpec::new(self.dim, self.points, self.half_length)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub grid: GridConfig,
    pub k: usize,
    pub operator: Operator,
    pub lambda: f64,
    pub datum: Datum,
    #[serde(default = "default_space")]
    pub space: Space,
}

fn default_space() -> Space {
    Space::USpace
}

impl ProblemConfig {
    pub fn spec(&self) -> Result<ProblemSpec, CliError> {
        let grid = self.grid.spec()?;
        let p = ProblemSpec {
            k: self.k,
            operator: self.operator,
            lambda: self.lambda,
            datum: self.datum.clone(),
            grid,
            space: self.space,
        };
        p.validate()?;
        p.datum.validate(&grid)?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub ball_radius: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            tol: o.tol,
            max_iter: o.max_iter,
            ball_radius: o.ball_radius,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> Result<SolverOptions, CliError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return invalid("solver.tol must be positive");
        }
        if self.max_iter == 0 {
            return invalid("solver.max_iter must be positive");
        }
        if let Some(r) = self.ball_radius {
            if !(r > 0.0 && r.is_finite()) {
                return invalid("solver.ball_radius must be positive");
            }
        }
        Ok(SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            ball_radius: self.ball_radius,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    /// Seeds `c·u₀` for the uniqueness probe; empty skips it.
    pub uniqueness_scales: Vec<f64>,
    /// PDE residual bound relative to `‖λf‖₂`.
    pub residual_tol: f64,
    pub write_solution: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            uniqueness_scales: Vec::new(),
            residual_tol: 1e-6,
            write_solution: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub expect_transition: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCase {
    pub grid: GridConfig,
    pub m: u32,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobolevConfig {
    pub grid: GridConfig,
    pub m: u32,
    pub p: f64,
    pub radius: f64,
    pub dilations: Vec<f64>,
    pub control_q: f64,
    #[serde(default = "default_control_drift")]
    pub control_drift: f64,
}

fn default_control_drift() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RieszCase {
    pub grid: GridConfig,
    pub n: u32,
    pub cutoff: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RieszConfig {
    pub seed: u64,
    pub fields: usize,
    pub cases: Vec<RieszCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearCheckConfig {
    #[serde(default)]
    pub oracle: Vec<OracleCase>,
    /// Compare the Λ and polyharmonic constants for `N ≤ green_max_dim`; 0 skips.
    #[serde(default)]
    pub green_max_dim: usize,
    #[serde(default)]
    pub sobolev: Option<SobolevConfig>,
    #[serde(default)]
    pub riesz: Option<RieszConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldCheckConfig {
    pub grid: GridConfig,
    pub k: usize,
    pub cutoff: usize,
    pub fields: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KhessianCheckConfig {
    pub seed: u64,
    pub matrices: usize,
    #[serde(default = "two")]
    pub min_dim: usize,
    #[serde(default = "six")]
    pub max_dim: usize,
    #[serde(default)]
    pub divergence: Option<FieldCheckConfig>,
}

fn two() -> usize {
    2
}

fn six() -> usize {
    MAX_DIM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BmoConfig {
    pub grid: GridConfig,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareConfig {
    pub grid: GridConfig,
    pub radius: f64,
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub grid: GridConfig,
    pub side_cells: usize,
    pub pattern: AtomPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundednessConfig {
    pub grid: GridConfig,
    pub fields: usize,
    pub cubes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub seed: u64,
    #[serde(default)]
    pub bmo: Option<BmoConfig>,
    #[serde(default)]
    pub poincare: Option<PoincareConfig>,
    #[serde(default)]
    pub atom: Option<AtomConfig>,
    #[serde(default)]
    pub boundedness: Option<BoundednessConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectorConfig {
    pub polytopes: Vec<Polytope>,
    pub deltas: Vec<f64>,
    pub points: usize,
    #[serde(default = "default_candidates")]
    pub candidates: usize,
}

fn default_candidates() -> usize {
    FinderOptions::default().candidates
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoMap {
    ConvolutionSquare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    pub map: DemoMap,
    pub dim: usize,
    pub deltas: Vec<f64>,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(default)]
    pub finder: FinderOptions,
}

fn default_residual_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedpointConfig {
    pub metric_seed: u64,
    /// Test vectors beyond the dimension.
    #[serde(default = "default_extra")]
    pub extra_tests: usize,
    #[serde(default)]
    pub projector_seed: u64,
    #[serde(default)]
    pub projector: Option<ProjectorConfig>,
    #[serde(default)]
    pub demo: Option<DemoConfig>,
}

fn default_extra() -> usize {
    4
}

fn invalid<T>(msg: &str) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        invalid(&format!("{name} must be positive and finite"))
    }
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<(), CliError> {
    if v.is_empty() {
        invalid(&format!("{name} must not be empty"))
    } else {
        Ok(())
    }
}

fn decreasing(name: &str, v: &[f64]) -> Result<(), CliError> {
    nonempty(name, v)?;
    for &d in v {
        positive(name, d)?;
    }
    if v.windows(2).any(|w| w[1] >= w[0]) {
        return invalid(&format!("{name} must be strictly decreasing"));
    }
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    fn sections(&self) -> [(&'static str, bool); 8] {
        [
            ("problem", self.problem.is_some()),
            ("solver", self.solver.is_some()),
            ("solve", self.solve.is_some()),
            ("sweep", self.sweep.is_some()),
            ("linear_check", self.linear_check.is_some()),
            ("khessian_check", self.khessian_check.is_some()),
            ("analysis", self.analysis.is_some()),
            ("fixedpoint", self.fixedpoint.is_some()),
        ]
    }

    fn allowed(&self) -> (&'static [&'static str], &'static [&'static str]) {
        match self.command {
            Command::Solve => (&["problem"], &["solver", "solve"]),
            Command::Sweep => (&["problem", "sweep"], &["solver"]),
            Command::LinearCheck => (&["linear_check"], &[]),
            Command::KhessianCheck => (&["khessian_check"], &[]),
            Command::Analysis => (&["analysis"], &[]),
            Command::FixedpointDemo => (&["fixedpoint"], &[]),
        }
    }

    /// Every check that can be made without computing.
    pub fn validate(&self) -> Result<(), CliError> {
        self.check_fields().map_err(|e| match e {
            CliError::Compute(m) => CliError::Config(m),
            e => e,
        })
    }

    fn check_fields(&self) -> Result<(), CliError> {
        let (required, optional) = self.allowed();
        for (name, present) in self.sections() {
            if present && !required.contains(&name) && !optional.contains(&name) {
                return invalid(&format!("section `{name}` is not used by `{}`", self.command.name()));
            }
            if !present && required.contains(&name) {
                return invalid(&format!("`{}` needs a `{name}` section", self.command.name()));
            }
        }
        if let Some(p) = &self.problem {
            p.spec()?;
        }
        if let Some(s) = &self.solver {
            s.options()?;
        }
        if let Some(s) = &self.solve {
            positive("solve.residual_tol", s.residual_tol)?;
            if s.uniqueness_scales.iter().any(|c| !c.is_finite()) {
                return invalid("solve.uniqueness_scales must be finite");
            }
        }
        if let Some(s) = &self.sweep {
            nonempty("sweep.lambdas", &s.lambdas)?;
            if s.lambdas.iter().any(|l| !l.is_finite()) {
                return invalid("sweep.lambdas must be finite");
            }
            if s.lambdas.windows(2).any(|w| w[1].abs() < w[0].abs()) {
                return invalid("sweep.lambdas must be ascending in |λ|");
            }
        }
        if let Some(l) = &self.linear_check {
            validate_linear(l)?;
        }
        if let Some(k) = &self.khessian_check {
            if k.min_dim < 1 || k.min_dim > k.max_dim || k.max_dim > MAX_DIM {
                return invalid("khessian_check dims must satisfy 1 <= min_dim <= max_dim <= 6");
            }
            if let Some(d) = &k.divergence {
                let g = d.grid.spec()?;
                if d.k == 0 || d.k > d.grid.dim {
                    return invalid("divergence.k must lie in 1..=dim");
                }
                if d.cutoff == 0 || 2 * d.cutoff >= g.points() {
                    return invalid("divergence.cutoff must lie in 1..points/2");
                }
            }
        }
        if let Some(a) = &self.analysis {
            validate_analysis(a)?;
        }
        if let Some(f) = &self.fixedpoint {
            validate_fixedpoint(f)?;
        }
        Ok(())
    }

    /// Canonical JSON used for the output hash; the output directory is excluded.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        serde_json::to_string(&c).expect("config serializes")
    }
}

fn validate_linear(l: &LinearCheckConfig) -> Result<(), CliError> {
    for c in &l.oracle {
        c.grid.spec()?;
        positive("oracle.radius", c.radius)?;
        if c.m == 0 || 2 * c.m as usize > c.grid.dim {
            return invalid("oracle.m must satisfy 1 <= 2m <= dim");
        }
    }
    if l.green_max_dim > MAX_DIM {
        return invalid("green_max_dim must be at most 6");
    }
    if let Some(s) = &l.sobolev {
        s.grid.spec()?;
        positive("sobolev.radius", s.radius)?;
        positive("sobolev.control_q", s.control_q)?;
        positive("sobolev.control_drift", s.control_drift)?;
        nonempty("sobolev.dilations", &s.dilations)?;
        for &d in &s.dilations {
            positive("sobolev.dilations", d)?;
        }
        khessian_core::solver::sobolev_exponent(s.grid.dim, s.m, s.p)?;
    }
    if let Some(r) = &l.riesz {
        if r.fields == 0 {
            return invalid("riesz.fields must be positive");
        }
        for c in &r.cases {
            let g = c.grid.spec()?;
            if c.n == 0 || c.n as usize > c.grid.dim {
                return invalid("riesz.n must lie in 1..=dim");
            }
            if c.cutoff == 0 || 2 * c.cutoff >= g.points() {
                return invalid("riesz.cutoff must lie in 1..points/2");
            }
        }
    }
    Ok(())
}

fn validate_analysis(a: &AnalysisConfig) -> Result<(), CliError> {
    if let Some(b) = &a.bmo {
        b.grid.spec()?;
        nonempty("bmo.counts", &b.counts)?;
        if b.counts.iter().any(|&c| c == 0) {
            return invalid("bmo.counts must be positive");
        }
    }
    if let Some(p) = &a.poincare {
        p.grid.spec()?;
        positive("poincare.radius", p.radius)?;
        nonempty("poincare.scales", &p.scales)?;
        for &s in &p.scales {
            positive("poincare.scales", s)?;
            if p.radius * s >= p.grid.half_length {
                return invalid("poincare ball must lie inside the box");
            }
        }
    }
    if let Some(t) = &a.atom {
        t.grid.spec()?;
        if t.side_cells < 2 || t.side_cells > t.grid.points {
            return invalid("atom.side_cells must lie in 2..=points");
        }
    }
    if let Some(b) = &a.boundedness {
        b.grid.spec()?;
        if b.fields == 0 || b.cubes == 0 {
            return invalid("boundedness.fields and cubes must be positive");
        }
        if b.grid.points < 6 {
            return invalid("boundedness needs at least 6 points");
        }
    }
    Ok(())
}

fn validate_fixedpoint(f: &FixedpointConfig) -> Result<(), CliError> {
    if let Some(p) = &f.projector {
        nonempty("projector.polytopes", &p.polytopes)?;
        for poly in &p.polytopes {
            poly.validate()?;
        }
        decreasing("projector.deltas", &p.deltas)?;
        if p.candidates == 0 {
            return invalid("projector.candidates must be positive");
        }
    }
    if let Some(d) = &f.demo {
        if d.dim < 2 {
            return invalid("demo.dim must be at least 2");
        }
        decreasing("demo.deltas", &d.deltas)?;
        positive("demo.residual_tol", d.residual_tol)?;
        let o = &d.finder;
        positive("finder.tol", o.tol)?;
        if !(o.damping > 0.0 && o.damping <= 1.0) {
            return invalid("finder.damping must lie in (0, 1]");
        }
        if o.max_iter == 0 || o.candidates == 0 {
            return invalid("finder.max_iter and candidates must be positive");
        }
    }
    Ok(())
}
