//! Picard iteration for `L u = S_k[-u] + λ f`, where `L` is `(-Δ)^m` or
//! `Λ^n`, with contraction diagnostics, λ-continuation, local-uniqueness and
//! branch-continuity probes, and the linear Sobolev dilation check.
//!
//! Two iteration spaces are offered. In `u_space` the map is
//! `u ↦ L^{-1}(S_k[-u] + λf)`; in `v_space` it is `v ↦ S_k[-L^{-1}v] + λf`
//! with `v = L u`. Convergence is measured in the working seminorm
//! `‖L u‖₂`, which is the plain `L²` norm of `v`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{lp_norm, make_atom, AtomPattern, CubeSample};
use crate::error::{Error, Result};
use crate::grid::{random_band_limited, sample, GridSpec, RealField, MAX_DIM};
use crate::khessian::s_k_field;
use crate::scalar::Scalar;
use crate::spectral_ops::{
    check_mean_zero, lambda_apply, lambda_invert, laplacian_power_apply, laplacian_power_invert,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Operator {
    Polyharmonic { m: u32 },
    Lambda { n: u32 },
}

impl Operator {
    /// Total differential order: `2m` or `n`.
    pub fn order(&self) -> u32 {
        match *self {
            Operator::Polyharmonic { m } => 2 * m,
            Operator::Lambda { n } => n,
        }
    }

    pub fn apply<T: Scalar>(&self, u: &RealField<T>) -> Result<RealField<T>> {
        match *self {
            Operator::Polyharmonic { m } => laplacian_power_apply(u, m),
            Operator::Lambda { n } => lambda_apply(u, n),
        }
    }

    pub fn invert<T: Scalar>(&self, f: &RealField<T>) -> Result<RealField<T>> {
        match *self {
            Operator::Polyharmonic { m } => laplacian_power_invert(f, m),
            Operator::Lambda { n } => lambda_invert(f, n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    USpace,
    VSpace,
}

/// Right-hand side descriptors. Analytic kinds are sampled at the origin of
/// the box and demeaned on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Datum {
    /// `amplitude · (-Δ) exp(-|x|²/(2 width²))`.
    Gaussian { width: f64, amplitude: f64 },
    /// `amplitude · (-Δ)(1 - |x|²/radius²)^4`.
    Bump { radius: f64, amplitude: f64 },
    /// `amplitude ·` an `L^∞` atom on the centered cube.
    Atom {
        side_cells: usize,
        pattern: AtomPattern,
        amplitude: f64,
    },
    /// `amplitude ·` a seeded random field with modes `max_j |κ_j| ≤ cutoff`.
    RandomBandLimited {
        cutoff: usize,
        seed: u64,
        amplitude: f64,
    },
}

impl Datum {
    /// Pointwise value for the analytic kinds.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let dim = x.len() as f64;
        match *self {
            Datum::Gaussian { width, amplitude } => {
                let w2 = width * width;
                Some(amplitude * (-r2 / (2.0 * w2)).exp() * (dim / w2 - r2 / (w2 * w2)))
            }
            Datum::Bump { radius, amplitude } => {
                let a2 = radius * radius;
                let t = r2 / a2;
                if t >= 1.0 {
                    return Some(0.0);
                }
                let s = 1.0 - t;
                Some(amplitude * (8.0 * dim * s * s * s - 48.0 * t * s * s) / a2)
            }
            _ => None,
        }
    }

    /// Radius outside which the datum vanishes (numerically, for Gaussians).
    pub fn support_radius(&self) -> Option<f64> {
        match *self {
            Datum::Gaussian { width, .. } => Some(6.0 * width),
            Datum::Bump { radius, .. } => Some(radius),
            _ => None,
        }
    }

    /// Parameter checks that need no sampling.
    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidProblem(m.into()));
        match *self {
            Datum::Gaussian { width, amplitude } | Datum::Bump { radius: width, amplitude } => {
                if !(width > 0.0 && width.is_finite()) {
                    return bad("datum width must be positive");
                }
                if !amplitude.is_finite() {
                    return bad("datum amplitude must be finite");
                }
            }
            Datum::Atom { side_cells, amplitude, .. } => {
                if side_cells < 2 || side_cells > spec.points() {
                    return bad("atom side must lie in 2..=points");
                }
                if !amplitude.is_finite() {
                    return bad("datum amplitude must be finite");
                }
            }
            Datum::RandomBandLimited { cutoff, amplitude, .. } => {
                if cutoff == 0 || 2 * cutoff >= spec.points() {
                    return bad("band cutoff must lie in 1..points/2");
                }
                if !amplitude.is_finite() {
                    return bad("datum amplitude must be finite");
                }
            }
        }
        Ok(())
    }

    pub fn field<T: Scalar>(&self, spec: &GridSpec) -> Result<RealField<T>> {
        match *self {
            Datum::Gaussian { width, .. } | Datum::Bump { radius: width, .. } => {
                if !(width > 0.0) {
                    return Err(Error::InvalidProblem("datum width must be positive".into()));
                }
                sampled(spec, |x| self.eval(x).unwrap_or(0.0))
            }
            Datum::Atom {
                side_cells,
                pattern,
                amplitude,
            } => {
                let cube = CubeSample::centered(spec, side_cells)?;
                Ok(make_atom::<T>(&cube, pattern)?.field().scale(T::of(amplitude)))
            }
            Datum::RandomBandLimited {
                cutoff,
                seed,
                amplitude,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(random_band_limited::<T, _>(spec, cutoff, &mut rng)?.scale(T::of(amplitude)))
            }
        }
    }
}

fn sampled<T: Scalar>(spec: &GridSpec, g: impl Fn(&[f64]) -> f64) -> Result<RealField<T>> {
    let f = sample(spec, |x: &[T]| {
        let mut buf = [0.0; MAX_DIM];
        for (b, v) in buf.iter_mut().zip(x) {
            *b = v.to_f64_lossy();
        }
        T::of(g(&buf[..x.len()]))
    })?;
    Ok(f.demean())
}

/// `L u = S_k[-u] + λ f` on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub k: usize,
    pub operator: Operator,
    pub lambda: f64,
    pub datum: Datum,
    pub grid: GridSpec,
    pub space: Space,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// `1 ≤ k ≤ N`, `N ≥ 2m` for `(-Δ)^m`, `1 ≤ n ≤ N` for `Λ^n`.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if self.k == 0 || self.k > dim {
            return Err(Error::BadK { k: self.k, dim });
        }
        match self.operator {
            Operator::Polyharmonic { m } => {
                if m == 0 || 2 * m as usize > dim {
                    return Err(Error::InvalidProblem(format!("(-Δ)^{m} needs N >= 2m, N = {dim}")));
                }
            }
            Operator::Lambda { n } => {
                if n == 0 || n as usize > dim {
                    return Err(Error::InvalidProblem(format!("Λ^{n} needs 1 <= n <= N, N = {dim}")));
                }
            }
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidProblem("λ must be finite".into()));
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn with_space(&self, space: Space) -> Self {
        Self {
            space,
            ..self.clone()
        }
    }
}

/// An order from the admissibility formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AdmissibleOrder {
    pub order: u32,
    /// `N = 2k`, where the polyharmonic order is always `N/2`.
    pub critical: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderKind {
    Polyharmonic,
    Lambda,
}

/// `m = 1 + N(k-1)/(2pk)` (with `p = 1` when absent) for `(-Δ)^m`;
/// `n = 2 + N(k-1)/k` for `Λ^n`.
pub fn admissible_order(dim: usize, k: usize, p: Option<f64>, kind: OrderKind) -> Result<AdmissibleOrder> {
    if dim < 2 || k < 2 {
        return Err(Error::InvalidArgument(format!("need N, k >= 2, got N={dim}, k={k}")));
    }
    let critical = dim == 2 * k;
    let num = dim * (k - 1);
    let order = match (kind, p) {
        (OrderKind::Polyharmonic, None) => {
            if num % (2 * k) != 0 {
                return Err(Error::NotAdmissible { dim, k });
            }
            1 + num / (2 * k)
        }
        (OrderKind::Polyharmonic, Some(p)) => {
            if !(p > 1.0) {
                return Err(Error::InvalidArgument(format!("p = {p} must exceed 1")));
            }
            let m = 1.0 + num as f64 / (2.0 * p * k as f64);
            let r = m.round();
            if (m - r).abs() > 1e-12 * m {
                return Err(Error::NotAdmissible { dim, k });
            }
            r as usize
        }
        (OrderKind::Lambda, _) => {
            if num % k != 0 {
                return Err(Error::NotAdmissible { dim, k });
            }
            2 + num / k
        }
    };
    Ok(AdmissibleOrder {
        order: order as u32,
        critical,
    })
}

fn l2<T: Scalar>(f: &RealField<T>) -> T {
    lp_norm(f, T::of(2.0)).expect("p = 2 is valid")
}

/// A problem with its datum materialized.
struct Compiled<T> {
    prob: ProblemSpec,
    forcing: RealField<T>,
}

impl<T: Scalar> Compiled<T> {
    fn new(prob: &ProblemSpec, f: RealField<T>) -> Result<Self> {
        prob.validate()?;
        if *f.spec() != prob.grid {
            return Err(Error::GridMismatch);
        }
        check_mean_zero(&f)?;
        Ok(Self {
            prob: prob.clone(),
            forcing: f.scale(T::of(prob.lambda)),
        })
    }

    fn nonlinear(&self, u: &RealField<T>) -> Result<RealField<T>> {
        let s = s_k_field(&u.scale(-T::one()), self.prob.k)?;
        check_mean_zero(&s)?;
        Ok(s)
    }

    /// `S_k[-u] + λf`.
    fn source(&self, u: &RealField<T>) -> Result<RealField<T>> {
        self.nonlinear(u)?.add(&self.forcing)
    }

    fn map(&self, x: &RealField<T>) -> Result<RealField<T>> {
        let op = self.prob.operator;
        match self.prob.space {
            Space::USpace => op.invert(&self.source(x)?),
            Space::VSpace => self.source(&op.invert(x)?),
        }
    }
}

/// One application of the iteration map in the problem's space.
pub fn rhs_map<T: Scalar>(x: &RealField<T>, prob: &ProblemSpec) -> Result<RealField<T>> {
    let c = Compiled::new(prob, prob.datum.field::<T>(&prob.grid)?)?;
    if *x.spec() != prob.grid {
        return Err(Error::GridMismatch);
    }
    c.map(x)
}

/// `‖L u - S_k[-u] - λ f‖₂` assembled directly.
pub fn fixed_point_residual<T: Scalar>(prob: &ProblemSpec, f: &RealField<T>, u: &RealField<T>) -> Result<T> {
    let c = Compiled::new(prob, f.clone())?;
    let lu = prob.operator.apply(u)?;
    Ok(l2(&lu.sub(&c.source(u)?)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Ball radius around `u₀ = λ L^{-1} f`; `2‖u₀‖` when absent.
    pub ball_radius: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200,
            ball_radius: None,
        }
    }
}

pub const DIVERGENCE_FACTOR: f64 = 10.0;
pub const DIVERGENCE_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Diverged,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `‖L u_j‖₂`.
    pub norm: f64,
    /// `‖L(u_{j+1} - u_j)‖₂`.
    pub step: f64,
    /// `step_j / step_{j-1}`.
    pub ratio: Option<f64>,
    /// `‖L u_j - S_k[-u_j] - λf‖₂`.
    pub residual: f64,
    /// `‖L(u_j - u₀)‖₂`.
    pub ball_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace<T> {
    pub records: Vec<IterationRecord>,
    pub verdict: Verdict,
    /// The last iterate, mapped back to `u`.
    pub solution: RealField<T>,
    pub ball_radius: f64,
}

impl<T: Scalar> SolverTrace<T> {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Median of the last five defined contraction ratios.
    pub fn contraction_ratio(&self) -> Option<f64> {
        let mut tail: Vec<f64> = self
            .records
            .iter()
            .filter_map(|r| r.ratio)
            .filter(|r| r.is_finite())
            .collect();
        if tail.is_empty() {
            return None;
        }
        let start = tail.len().saturating_sub(5);
        tail.drain(..start);
        tail.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
        Some(tail[tail.len() / 2])
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.residual)
    }

    /// Whether every iterate stayed within the ball radius of `u₀`.
    pub fn stayed_in_ball(&self) -> bool {
        self.records.iter().all(|r| r.ball_distance <= self.ball_radius)
    }

    /// `Ok` with the solution when converged, the verdict as an error otherwise.
    pub fn into_result(self) -> Result<RealField<T>> {
        let iterations = self.iterations();
        match self.verdict {
            Verdict::Converged => Ok(self.solution),
            Verdict::Diverged => Err(Error::Diverged { iterations }),
            Verdict::MaxIter => Err(Error::MaxIter { iterations }),
        }
    }
}

fn diverging(steps: &[f64]) -> bool {
    if steps.len() <= DIVERGENCE_WINDOW {
        return false;
    }
    let w = &steps[steps.len() - DIVERGENCE_WINDOW - 1..];
    w.windows(2).all(|p| p[1] > p[0]) && w[DIVERGENCE_WINDOW] > DIVERGENCE_FACTOR * w[0]
}

/// Picard iteration from `u0` with the datum of `prob`.
pub fn picard_solve<T: Scalar>(prob: &ProblemSpec, u0: &RealField<T>, opts: &SolverOptions) -> Result<SolverTrace<T>> {
    let f = prob.datum.field::<T>(&prob.grid)?;
    picard_solve_with(prob, &f, u0, opts)
}

/// Picard iteration with an explicit datum field in place of `prob.datum`.
///
/// Converged iff `step ≤ tol(1 + ‖L u_j‖)` and the assembled residual is at
/// most `10·tol·‖λf‖₂` (the seed's norm stands in when `λf = 0`). The step
/// and the residual agree in exact arithmetic; they are computed along
/// separate paths. Diverged on a non-finite value or when the step grows at
/// each of five consecutive iterations by more than 10× overall.
pub fn picard_solve_with<T: Scalar>(
    prob: &ProblemSpec,
    f: &RealField<T>,
    u0: &RealField<T>,
    opts: &SolverOptions,
) -> Result<SolverTrace<T>> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidArgument("tol must be positive and max_iter nonzero".into()));
    }
    let c = Compiled::new(prob, f.clone())?;
    if *u0.spec() != prob.grid {
        return Err(Error::GridMismatch);
    }
    let op = prob.operator;
    let v_center = c.forcing.demean();
    let ball_radius = opts
        .ball_radius
        .unwrap_or_else(|| 2.0 * l2(&v_center).to_f64_lossy());
    let v_seed = op.apply(u0)?;
    let forcing_norm = l2(&c.forcing).to_f64_lossy();
    let scale = if forcing_norm > 0.0 {
        forcing_norm
    } else {
        l2(&v_seed).to_f64_lossy()
    };
    let tol = opts.tol;
    if scale == 0.0 {
        return Ok(SolverTrace {
            records: vec![IterationRecord {
                iteration: 0,
                norm: 0.0,
                step: 0.0,
                ratio: None,
                residual: 0.0,
                ball_distance: 0.0,
            }],
            verdict: Verdict::Converged,
            solution: RealField::zeros(prob.grid),
            ball_radius,
        });
    }

    let mut x = match prob.space {
        Space::USpace => u0.clone(),
        Space::VSpace => v_seed,
    };
    let mut records = Vec::new();
    let mut steps = Vec::new();
    for iteration in 0..opts.max_iter {
        let outcome = (|| -> Result<(RealField<T>, RealField<T>, RealField<T>, T, T)> {
            let (u, v) = match prob.space {
                Space::USpace => (x.clone(), op.apply(&x)?),
                Space::VSpace => (op.invert(&x)?, x.clone()),
            };
            let w = c.source(&u)?;
            let residual = l2(&v.sub(&w)?);
            let next = match prob.space {
                Space::USpace => op.invert(&w)?,
                Space::VSpace => w,
            };
            let step = match prob.space {
                Space::USpace => l2(&op.apply(&next.sub(&x)?)?),
                Space::VSpace => l2(&next.sub(&x)?),
            };
            Ok((u, v, next, residual, step))
        })();
        let (u, v, next, residual, step) = match outcome {
            Ok(parts) => parts,
            Err(Error::NonFinite(_)) => {
                return Ok(diverged(records, prob, ball_radius));
            }
            Err(e) => return Err(e),
        };
        let norm = l2(&v).to_f64_lossy();
        let step = step.to_f64_lossy();
        let residual = residual.to_f64_lossy();
        let ball_distance = l2(&v.sub(&v_center)?).to_f64_lossy();
        if !(norm.is_finite() && step.is_finite() && residual.is_finite()) {
            return Ok(diverged(records, prob, ball_radius));
        }
        let ratio = steps.last().map(|&prev: &f64| step / prev);
        records.push(IterationRecord {
            iteration,
            norm,
            step,
            ratio,
            residual,
            ball_distance,
        });
        steps.push(step);
        if step <= tol * (1.0 + norm) && residual <= 10.0 * tol * scale {
            return Ok(SolverTrace {
                records,
                verdict: Verdict::Converged,
                solution: u,
                ball_radius,
            });
        }
        if diverging(&steps) {
            return Ok(SolverTrace {
                records,
                verdict: Verdict::Diverged,
                solution: u,
                ball_radius,
            });
        }
        x = next;
    }
    let solution = match prob.space {
        Space::USpace => x,
        Space::VSpace => op.invert(&x)?,
    };
    Ok(SolverTrace {
        records,
        verdict: Verdict::MaxIter,
        solution,
        ball_radius,
    })
}

fn diverged<T: Scalar>(records: Vec<IterationRecord>, prob: &ProblemSpec, ball_radius: f64) -> SolverTrace<T> {
    SolverTrace {
        records,
        verdict: Verdict::Diverged,
        solution: RealField::constant(prob.grid, T::nan()),
        ball_radius,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuationRow {
    pub lambda: f64,
    pub verdict: Verdict,
    pub iterations: usize,
    pub residual: f64,
    pub contraction_ratio: Option<f64>,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationReport {
    pub rows: Vec<ContinuationRow>,
    pub last_converged: Option<f64>,
    /// First λ that did not converge; the sweep stops there.
    pub first_failure: Option<f64>,
    /// Converged rows form a prefix of the sweep.
    pub monotone: bool,
}

/// Warm-started sweep over `lambdas` (ascending in `|λ|`), stopping at the
/// first non-converged row.
pub fn lambda_continuation<T: Scalar>(
    prob: &ProblemSpec,
    lambdas: &[f64],
    opts: &SolverOptions,
) -> Result<ContinuationReport> {
    if lambdas.windows(2).any(|w| w[1].abs() < w[0].abs()) {
        return Err(Error::InvalidArgument("λ grid must be ascending in |λ|".into()));
    }
    let f = prob.datum.field::<T>(&prob.grid)?;
    let mut seed = RealField::zeros(prob.grid);
    let mut rows = Vec::new();
    let mut first_failure = None;
    for &lambda in lambdas {
        let p = prob.with_lambda(lambda);
        let trace = picard_solve_with(&p, &f, &seed, opts)?;
        rows.push(ContinuationRow {
            lambda,
            verdict: trace.verdict,
            iterations: trace.iterations(),
            residual: trace.final_residual(),
            contraction_ratio: trace.contraction_ratio(),
            norm: trace.records.last().map_or(0.0, |r| r.norm),
        });
        if trace.verdict != Verdict::Converged {
            first_failure = Some(lambda);
            break;
        }
        seed = trace.solution;
    }
    let last_converged = rows
        .iter()
        .filter(|r| r.verdict == Verdict::Converged)
        .map(|r| r.lambda)
        .last();
    let converged: Vec<bool> = rows.iter().map(|r| r.verdict == Verdict::Converged).collect();
    let monotone = converged.windows(2).all(|w| w[0] || !w[1]);
    Ok(ContinuationReport {
        rows,
        last_converged,
        first_failure,
        monotone,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub verdicts: Vec<Verdict>,
    /// Largest pairwise `‖L(u_a - u_b)‖₂` among converged limits.
    pub max_distance: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Solve from each seed; PASS iff every seed converges and the limits
/// agree pairwise within `10·tol·(1 + max ‖L u‖₂)` in the working seminorm,
/// the scale of the stopping rule.
pub fn uniqueness_probe<T: Scalar>(
    prob: &ProblemSpec,
    seeds: &[RealField<T>],
    opts: &SolverOptions,
) -> Result<UniquenessReport> {
    let f = prob.datum.field::<T>(&prob.grid)?;
    let c = Compiled::new(prob, f.clone())?;
    let v_center = c.forcing.demean();
    let radius = opts
        .ball_radius
        .unwrap_or_else(|| 2.0 * l2(&v_center).to_f64_lossy());
    let op = prob.operator;
    for s in seeds {
        let d = l2(&op.apply(s)?.sub(&v_center)?).to_f64_lossy();
        if d > radius {
            return Err(Error::InvalidArgument(format!(
                "seed at distance {d:e} lies outside the ball of radius {radius:e}"
            )));
        }
    }
    let mut verdicts = Vec::new();
    let mut limits = Vec::new();
    for s in seeds {
        let trace = picard_solve_with(prob, &f, s, opts)?;
        verdicts.push(trace.verdict);
        if trace.verdict == Verdict::Converged {
            limits.push(op.apply(&trace.solution)?);
        }
    }
    let mut max_distance = 0.0f64;
    for i in 0..limits.len() {
        for j in i + 1..limits.len() {
            max_distance = max_distance.max(l2(&limits[i].sub(&limits[j])?).to_f64_lossy());
        }
    }
    let top = limits.iter().fold(0.0f64, |m, v| m.max(l2(v).to_f64_lossy()));
    let threshold = 10.0 * opts.tol * (1.0 + top);
    let all = verdicts.iter().all(|v| *v == Verdict::Converged);
    Ok(UniquenessReport {
        verdicts,
        max_distance,
        threshold,
        pass: all && max_distance <= threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchRow {
    /// `‖δf‖₂`.
    pub delta_f: f64,
    /// `‖L δu‖₂`.
    pub delta_u: f64,
    pub ratio: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchReport {
    pub rows: Vec<BranchRow>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub pass: bool,
}

/// Allowed spread `max/min` of the response ratios.
pub const BRANCH_RATIO_SPREAD: f64 = 10.0;

/// Solve for `f` and for each `f + δf`, warm-started from the base solution.
/// PASS iff every solve converges and the nonzero response ratios
/// `‖L δu‖₂/‖δf‖₂` stay within a factor of 10 of each other.
pub fn branch_continuity_probe<T: Scalar>(
    prob: &ProblemSpec,
    perturbations: &[RealField<T>],
    opts: &SolverOptions,
) -> Result<BranchReport> {
    let f = prob.datum.field::<T>(&prob.grid)?;
    let base = picard_solve_with(prob, &f, &RealField::zeros(prob.grid), opts)?.into_result()?;
    let base_v = prob.operator.apply(&base)?;
    let mut rows = Vec::new();
    for df in perturbations {
        let pf = f.add(df)?;
        let trace = picard_solve_with(prob, &pf, &base, opts)?;
        let delta_f = l2(df).to_f64_lossy();
        let (delta_u, ratio) = if trace.verdict == Verdict::Converged {
            let du = l2(&prob.operator.apply(&trace.solution)?.sub(&base_v)?).to_f64_lossy();
            (du, (delta_f > 0.0).then(|| du / delta_f))
        } else {
            (f64::NAN, None)
        };
        rows.push(BranchRow {
            delta_f,
            delta_u,
            ratio,
            verdict: trace.verdict,
        });
    }
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let converged = rows.iter().all(|r| r.verdict == Verdict::Converged);
    let pass = converged && (ratios.is_empty() || max_ratio <= BRANCH_RATIO_SPREAD * min_ratio);
    Ok(BranchReport {
        rows,
        max_ratio,
        min_ratio,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DilationRow {
    pub s: f64,
    pub f_norm: f64,
    pub u_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolevReport {
    pub p: f64,
    pub q: f64,
    pub rows: Vec<DilationRow>,
    /// `max ratio / min ratio - 1`.
    pub spread: f64,
    pub pass: bool,
}

pub const SOBOLEV_SPREAD_TOL: f64 = 0.10;

/// `q = Np/(N - 2mp)`.
pub fn sobolev_exponent(dim: usize, m: u32, p: f64) -> Result<f64> {
    let crit = dim as f64 / (2.0 * m as f64);
    if !(p > 1.0 && p < crit) {
        return Err(Error::InvalidArgument(format!("p = {p} must lie in (1, {crit})")));
    }
    Ok(dim as f64 * p / (dim as f64 - 2.0 * m as f64 * p))
}

/// Linear dilation check for `(-Δ)^m u = f_s`, `f_s(x) = f(x/s)`: reports
/// `‖u_s‖_q/‖f_s‖_p` per `s`. PASS iff the ratios agree within 10%. `q`
/// defaults to the Sobolev exponent; other values serve as controls.
pub fn sobolev_scaling_check<T: Scalar>(
    prob: &ProblemSpec,
    p: f64,
    q: Option<f64>,
    dilations: &[f64],
) -> Result<SobolevReport> {
    prob.validate()?;
    let Operator::Polyharmonic { m } = prob.operator else {
        return Err(Error::InvalidProblem("the dilation check needs a polyharmonic operator".into()));
    };
    let q_formula = sobolev_exponent(prob.dim(), m, p)?;
    let q = q.unwrap_or(q_formula);
    let radius = prob
        .datum
        .support_radius()
        .ok_or_else(|| Error::InvalidProblem("the dilation check needs an analytic datum".into()))?;
    if dilations.is_empty() {
        return Err(Error::InvalidArgument("no dilations given".into()));
    }
    let limit = prob.grid.half_length();
    let mut rows = Vec::new();
    for &s in dilations {
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(format!("dilation {s} must be positive")));
        }
        if radius * s > limit {
            return Err(Error::SupportTooLarge {
                radius: radius * s,
                limit,
            });
        }
        let fs = sampled::<T>(&prob.grid, |x| {
            let mut scaled = [0.0; MAX_DIM];
            for (d, v) in scaled.iter_mut().zip(x) {
                *d = v / s;
            }
            prob.datum.eval(&scaled[..x.len()]).unwrap_or(0.0)
        })?;
        let us = laplacian_power_invert(&fs, m)?;
        let f_norm = lp_norm(&fs, T::of(p))?.to_f64_lossy();
        let u_norm = lp_norm(&us, T::of(q))?.to_f64_lossy();
        rows.push(DilationRow {
            s,
            f_norm,
            u_norm,
            ratio: u_norm / f_norm,
        });
    }
    let max = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let spread = max / min - 1.0;
    Ok(SobolevReport {
        p,
        q,
        rows,
        spread,
        pass: spread <= SOBOLEV_SPREAD_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_problem(lambda: f64, space: Space) -> ProblemSpec {
        ProblemSpec {
            k: 2,
            operator: Operator::Polyharmonic { m: 1 },
            lambda,
            datum: Datum::Gaussian {
                width: 0.5,
                amplitude: 1.0,
            },
            grid: GridSpec::new(2, 16, 2.0).unwrap(),
            space,
        }
    }

    #[test]
    fn admissible_examples() {
        let a = admissible_order(4, 2, None, OrderKind::Polyharmonic).unwrap();
        assert_eq!(a, AdmissibleOrder { order: 2, critical: true });
        assert_eq!(admissible_order(8, 2, None, OrderKind::Polyharmonic).unwrap().order, 3);
        assert!(!admissible_order(8, 2, None, OrderKind::Polyharmonic).unwrap().critical);
        assert_eq!(admissible_order(6, 2, None, OrderKind::Lambda).unwrap().order, 5);
        assert_eq!(
            admissible_order(5, 2, None, OrderKind::Polyharmonic),
            Err(Error::NotAdmissible { dim: 5, k: 2 })
        );
        assert_eq!(admissible_order(8, 2, Some(2.0), OrderKind::Polyharmonic).unwrap().order, 2);
        assert!(admissible_order(8, 2, Some(3.0), OrderKind::Polyharmonic).is_err());
        assert!(admissible_order(8, 2, Some(1.0), OrderKind::Polyharmonic).is_err());
        for k in 2..=4 {
            let a = admissible_order(2 * k, k, None, OrderKind::Polyharmonic).unwrap();
            assert_eq!(a.order as usize, k);
            assert!(a.critical);
        }
    }

    #[test]
    fn validation() {
        let mut p = small_problem(1.0, Space::USpace);
        assert!(p.validate().is_ok());
        p.operator = Operator::Polyharmonic { m: 2 };
        assert!(matches!(p.validate(), Err(Error::InvalidProblem(_))));
        p.operator = Operator::Lambda { n: 3 };
        assert!(p.validate().is_err());
        p.operator = Operator::Lambda { n: 2 };
        p.k = 3;
        assert!(matches!(p.validate(), Err(Error::BadK { .. })));
    }

    #[test]
    fn rhs_map_examples() {
        let p = small_problem(0.0, Space::USpace);
        let z = RealField::<f64>::zeros(p.grid);
        assert_eq!(rhs_map(&z, &p).unwrap().max_abs(), 0.0);
        let p = small_problem(0.7, Space::USpace);
        let f = p.datum.field::<f64>(&p.grid).unwrap();
        let u0 = laplacian_power_invert(&f.scale(0.7), 1).unwrap();
        let got = rhs_map(&z, &p).unwrap();
        assert!(got.sub(&u0).unwrap().max_abs() < 1e-14);
        // parity for even k: datum -f with iterate -u
        let u = u0.scale(3.0);
        let mut neg = p.clone();
        neg.datum = Datum::Gaussian {
            width: 0.5,
            amplitude: -1.0,
        };
        let a = rhs_map(&u, &p).unwrap();
        let b = rhs_map(&u.scale(-1.0), &neg).unwrap();
        let nl = laplacian_power_invert(&s_k_field(&u.scale(-1.0), 2).unwrap(), 1).unwrap();
        assert!(a.add(&b).unwrap().sub(&nl.scale(2.0)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn lambda_zero() {
        let p = small_problem(0.0, Space::USpace);
        let z = RealField::<f64>::zeros(p.grid);
        let t = picard_solve(&p, &z, &SolverOptions::default()).unwrap();
        assert_eq!(t.verdict, Verdict::Converged);
        assert!(t.iterations() <= 2);
        assert_eq!(t.solution.max_abs(), 0.0);
        // small seeds fall to zero
        let seed = Datum::Gaussian {
            width: 0.4,
            amplitude: 1.0,
        }
        .field::<f64>(&p.grid)
        .unwrap();
        let seed = seed.scale(0.1 / l2(&seed));
        let t = picard_solve(&p, &seed, &SolverOptions::default()).unwrap();
        assert_eq!(t.verdict, Verdict::Converged);
        assert!(l2(&t.solution) < 1e-8);
    }

    #[test]
    fn small_lambda_converges_in_both_spaces() {
        let opts = SolverOptions::default();
        let pu = small_problem(0.05, Space::USpace);
        let z = RealField::<f64>::zeros(pu.grid);
        let tu = picard_solve(&pu, &z, &opts).unwrap();
        assert_eq!(tu.verdict, Verdict::Converged);
        assert!(tu.contraction_ratio().unwrap() < 1.0);
        assert!(tu.stayed_in_ball());
        let f = pu.datum.field::<f64>(&pu.grid).unwrap();
        let lf = l2(&f.scale(0.05));
        assert!(fixed_point_residual(&pu, &f, &tu.solution).unwrap() <= 10.0 * opts.tol * lf);
        let tv = picard_solve(&pu.with_space(Space::VSpace), &z, &opts).unwrap();
        assert_eq!(tv.verdict, Verdict::Converged);
        let vu = laplacian_power_apply(&tu.solution, 1).unwrap();
        let vv = laplacian_power_apply(&tv.solution, 1).unwrap();
        assert!(l2(&vu.sub(&vv).unwrap()) <= 10.0 * opts.tol * (1.0 + l2(&vu)));
    }

    #[test]
    fn large_lambda_diverges() {
        let p = small_problem(200.0, Space::USpace);
        let z = RealField::<f64>::zeros(p.grid);
        let t = picard_solve(&p, &z, &SolverOptions::default()).unwrap();
        assert_eq!(t.verdict, Verdict::Diverged);
        assert!(matches!(t.into_result(), Err(Error::Diverged { .. })));
    }

    #[test]
    fn continuation_transition() {
        let p = small_problem(0.0, Space::USpace);
        let grid = [0.0, 0.01, 0.05, 0.2, 0.8, 3.2, 12.8];
        let r = lambda_continuation::<f64>(&p, &grid, &SolverOptions::default()).unwrap();
        assert!(r.monotone);
        assert_eq!(r.rows[0].verdict, Verdict::Converged);
        assert!(r.first_failure.is_some());
        let single = lambda_continuation::<f64>(&p, &[0.0], &SolverOptions::default()).unwrap();
        assert_eq!(single.rows.len(), 1);
        assert_eq!(single.last_converged, Some(0.0));
        assert!(lambda_continuation::<f64>(&p, &[1.0, 0.5], &SolverOptions::default()).is_err());
    }

    #[test]
    fn uniqueness_and_branch() {
        let p = small_problem(0.05, Space::USpace);
        let opts = SolverOptions::default();
        let f = p.datum.field::<f64>(&p.grid).unwrap();
        let u0 = laplacian_power_invert(&f.scale(0.05), 1).unwrap();
        let seeds = vec![RealField::zeros(p.grid), u0.clone(), u0.scale(1.2)];
        let r = uniqueness_probe(&p, &seeds, &opts).unwrap();
        assert!(r.pass, "{r:?}");
        let far = vec![u0.scale(10.0)];
        assert!(uniqueness_probe(&p, &far, &opts).is_err());

        let shape = Datum::Gaussian {
            width: 0.3,
            amplitude: 1.0,
        }
        .field::<f64>(&p.grid)
        .unwrap();
        let perts: Vec<_> = [0.0, 0.1, 0.05, 0.025].iter().map(|&e| shape.scale(e)).collect();
        let b = branch_continuity_probe(&p, &perts, &opts).unwrap();
        assert!(b.pass, "{b:?}");
        assert_eq!(b.rows[0].delta_u, 0.0);
    }

    #[test]
    fn sobolev_dilation() {
        let p = ProblemSpec {
            k: 2,
            operator: Operator::Polyharmonic { m: 1 },
            lambda: 1.0,
            datum: Datum::Bump {
                radius: 0.25,
                amplitude: 1.0,
            },
            grid: GridSpec::new(3, 32, 1.0).unwrap(),
            space: Space::USpace,
        };
        assert!((sobolev_exponent(3, 1, 1.2).unwrap() - 6.0).abs() < 1e-12);
        let r = sobolev_scaling_check::<f64>(&p, 1.2, None, &[1.0, 2.0]).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.rows[0].s, 1.0);
        let bad = sobolev_scaling_check::<f64>(&p, 1.2, Some(3.0), &[1.0, 2.0]).unwrap();
        assert!(bad.spread > 0.25, "{bad:?}");
        assert!(matches!(
            sobolev_scaling_check::<f64>(&p, 1.2, None, &[5.0]),
            Err(Error::SupportTooLarge { .. })
        ));
        assert!(sobolev_scaling_check::<f64>(&p, 1.6, None, &[1.0]).is_err());
    }
}
