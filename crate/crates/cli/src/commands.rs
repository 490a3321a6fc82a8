use std::f64::consts::PI;
use std::path::Path;

use khessian_core::analysis::{
    atom_decay_check, bmo_boundedness_check, bmo_seminorm, lp_norm, make_atom, poincare_ratio, Ball,
    CubeSample, CubeSampler, DECAY_SLOPE_TOL,
};
use khessian_core::fixedpoint::{convolution_square, project, schauder_iterate, NetCover, Polytope, WeakStarMetric};
use khessian_core::grid::{random_band_limited, sample, GridSpec, RealField};
use khessian_core::kernels::{green_lambda, green_polyharmonic, polyharmonic_oracle_gap};
use khessian_core::khessian::{algebra_errors, divergence_residuals, SymMatrix};
use khessian_core::solver::{
    fixed_point_residual, lambda_continuation, picard_solve_with, sobolev_scaling_check, uniqueness_probe, Datum,
    Operator, ProblemSpec, SobolevReport, Space, Verdict,
};
use khessian_core::spectral_ops::{riesz, riesz_factorization_check, MultiIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{
    AnalysisConfig, Command, DemoMap, FixedpointConfig, KhessianCheckConfig, LinearCheckConfig, RunConfig,
};
use crate::report::{Check, RunReport};
use crate::table::{emit_csv, Cell, Table};
use crate::CliError;

pub const SIGMA_TOL: f64 = 1e-10;
pub const EULER_TOL: f64 = 1e-9;
pub const NEWTON_FD_TOL: f64 = 1e-6;
pub const DIVERGENCE_TOL: f64 = 1e-8;
pub const ORACLE_TOL: f64 = 0.05;
pub const GREEN_ULPS: f64 = 4.0;
pub const RIESZ_SQUARE_TOL: f64 = 1e-10;
pub const RIESZ_FACTOR_TOL: f64 = 1e-8;
pub const BMO_DOUBLING_TOL: f64 = 0.15;
pub const POINCARE_TOL: f64 = 0.05;
pub const BOUNDEDNESS_SPREAD: f64 = 10.0;

pub fn dispatch(c: &RunConfig, dir: &Path, rep: &mut RunReport) -> Result<(), CliError> {
    match c.command {
        Command::Solve => solve(c, dir, rep),
        Command::Sweep => sweep(c, dir, rep),
        Command::LinearCheck => linear_check(c.linear_check.as_ref().expect("validated"), dir, rep),
        Command::KhessianCheck => khessian_check(c.khessian_check.as_ref().expect("validated"), dir, rep),
        Command::Analysis => analysis(c.analysis.as_ref().expect("validated"), dir, rep),
        Command::FixedpointDemo => fixedpoint_demo(c.fixedpoint.as_ref().expect("validated"), dir, rep),
    }
}

fn emit(rep: &mut RunReport, dir: &Path, t: &Table) -> Result<(), CliError> {
    emit_csv(t, dir)?;
    rep.files.push(format!("{}.csv", t.name));
    Ok(())
}

/// Non-finite values become empty cells; only for rows of diverged runs.
fn lossy(v: f64) -> Cell {
    if v.is_finite() {
        Cell::Num(v)
    } else {
        Cell::Empty
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Converged => "converged",
        Verdict::Diverged => "diverged",
        Verdict::MaxIter => "max_iter",
    }
}

fn l2(f: &RealField<f64>) -> Result<f64, CliError> {
    Ok(lp_norm(f, 2.0)?)
}

fn max_diff(a: &RealField<f64>, b: &RealField<f64>) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn solve(c: &RunConfig, dir: &Path, rep: &mut RunReport) -> Result<(), CliError> {
    let prob = c.problem.as_ref().expect("validated").spec()?;
    let opts = c.solver.clone().unwrap_or_default().options()?;
    let sc = c.solve.clone().unwrap_or_default();
    let f = rep.stage("datum", |_| Ok(prob.datum.field::<f64>(&prob.grid)?))?;
    let zero = RealField::zeros(prob.grid);
    let trace = rep.stage("picard", |_| Ok(picard_solve_with(&prob, &f, &zero, &opts)?))?;

    let mut t = Table::new("trace", &["iteration", "norm", "step", "ratio", "residual", "ball_distance"]);
    for r in &trace.records {
        t.push(vec![
            r.iteration.into(),
            lossy(r.norm),
            lossy(r.step),
            r.ratio.map_or(Cell::Empty, lossy),
            lossy(r.residual),
            lossy(r.ball_distance),
        ]);
    }
    emit(rep, dir, &t)?;

    let converged = trace.verdict == Verdict::Converged;
    rep.check(
        Check::verdict("picard_converged", converged, Some(trace.iterations() as f64), None)
            .with_detail(verdict_name(trace.verdict)),
    );
    match trace.contraction_ratio() {
        Some(r) => rep.check(Check::verdict("contraction_ratio", r < 1.0, Some(r), Some(1.0))),
        None => rep.check(Check::skipped("contraction_ratio", "fewer than two steps")),
    }
    if converged {
        let residual = rep.stage("residual", |_| Ok(fixed_point_residual(&prob, &f, &trace.solution)?))?;
        let scale = l2(&f.scale(prob.lambda))?;
        rep.check(Check::at_most("pde_residual", residual, sc.residual_tol * scale));
        let worst = trace.records.iter().map(|r| r.ball_distance).fold(0.0, f64::max);
        rep.check(Check::reported("ball_fraction", Some(worst / trace.ball_radius)));
        if sc.write_solution {
            let mut s = Table::new("solution", &["index", "u"]);
            for (i, &v) in trace.solution.values().iter().enumerate() {
                s.push(vec![i.into(), v.into()]);
            }
            emit(rep, dir, &s)?;
        }
    } else {
        rep.check(Check::skipped("pde_residual", "solver did not converge"));
    }

    if sc.uniqueness_scales.is_empty() {
        rep.check(Check::skipped("uniqueness", "no seeds configured"));
        return Ok(());
    }
    let u0 = prob.operator.invert(&f.scale(prob.lambda))?;
    let seeds: Vec<_> = sc.uniqueness_scales.iter().map(|&s| u0.scale(s)).collect();
    let u = rep.stage("uniqueness", |_| Ok(uniqueness_probe(&prob, &seeds, &opts)?))?;
    let mut t = Table::new("uniqueness", &["seed_scale", "verdict"]);
    for (&s, &v) in sc.uniqueness_scales.iter().zip(&u.verdicts) {
        t.push(vec![s.into(), verdict_name(v).into()]);
    }
    emit(rep, dir, &t)?;
    rep.check(Check::verdict("uniqueness", u.pass, Some(u.max_distance), Some(u.threshold)));
    Ok(())
}

fn sweep(c: &RunConfig, dir: &Path, rep: &mut RunReport) -> Result<(), CliError> {
    let prob = c.problem.as_ref().expect("validated").spec()?;
    let opts = c.solver.clone().unwrap_or_default().options()?;
    let sw = c.sweep.as_ref().expect("validated");
    let r = rep.stage("continuation", |_| Ok(lambda_continuation::<f64>(&prob, &sw.lambdas, &opts)?))?;
    let mut t = Table::new(
        "continuation",
        &["lambda", "verdict", "iterations", "residual", "contraction_ratio", "norm"],
    );
    for row in &r.rows {
        t.push(vec![
            row.lambda.into(),
            verdict_name(row.verdict).into(),
            row.iterations.into(),
            lossy(row.residual),
            row.contraction_ratio.map_or(Cell::Empty, lossy),
            lossy(row.norm),
        ]);
    }
    emit(rep, dir, &t)?;
    rep.check(Check::verdict("continuation_monotone", r.monotone, None, None));
    rep.check(Check::reported("last_converged_lambda", r.last_converged));
    if sw.expect_transition {
        rep.check(Check::verdict("divergence_transition", r.first_failure.is_some(), r.first_failure, None));
    } else {
        rep.check(Check::reported("divergence_transition", r.first_failure));
    }
    Ok(())
}

fn linear_check(l: &LinearCheckConfig, dir: &Path, rep: &mut RunReport) -> Result<(), CliError> {
    if !l.oracle.is_empty() {
        let mut t = Table::new("oracle", &["dim", "m", "points", "half_length", "radius", "gap"]);
        for case in &l.oracle {
            let spec = case.grid.spec()?;
            let name = format!("oracle_n{}_m{}", case.grid.dim, case.m);
            let gap = rep.stage(&name, |_| Ok(polyharmonic_oracle_gap::<f64>(&spec, case.m as usize, case.radius)?))?;
            t.push(vec![
                case.grid.dim.into(),
                (case.m as usize).into(),
                case.grid.points.into(),
                case.grid.half_length.into(),
                case.radius.into(),
                gap.into(),
            ]);
            rep.check(Check::at_most(&name, gap, ORACLE_TOL));
        }
        emit(rep, dir, &t)?;
    }

    if l.green_max_dim > 0 {
        let mut t = Table::new(
            "green_constants",
            &["dim", "n", "lambda_coefficient", "polyharmonic_coefficient", "relative_gap", "same_form"],
        );
        let mut worst = 0.0f64;
        let mut same = true;
        for dim in 1..=l.green_max_dim {
            for n in (2..=dim).step_by(2) {
                let a = green_lambda(n, dim)?;
                let b = green_polyharmonic(dim, n / 2)?;
                let gap = (a.coefficient - b.coefficient).abs() / b.coefficient.abs();
                let form = a.form == b.form && a.exponent == b.exponent && a.order == b.order;
                worst = worst.max(gap);
                same &= form;
                t.push(vec![
                    dim.into(),
                    n.into(),
                    a.coefficient.into(),
                    b.coefficient.into(),
                    gap.into(),
                    form.into(),
                ]);
            }
        }
        emit(rep, dir, &t)?;
        rep.check(Check::verdict(
            "green_constants_match",
            same && worst <= GREEN_ULPS * f64::EPSILON,
            Some(worst),
            Some(GREEN_ULPS * f64::EPSILON),
        ));
    }

    if let Some(s) = &l.sobolev {
        let prob = ProblemSpec {
            k: 1,
            operator: Operator::Polyharmonic { m: s.m },
            lambda: 1.0,
            datum: Datum::Bump {
                radius: s.radius,
                amplitude: 1.0,
            },
            grid: s.grid.spec()?,
            space: Space::USpace,
        };
        let (main, control) = rep.stage("sobolev", |_| {
            Ok((
                sobolev_scaling_check::<f64>(&prob, s.p, None, &s.dilations)?,
                sobolev_scaling_check::<f64>(&prob, s.p, Some(s.control_q), &s.dilations)?,
            ))
        })?;
        let mut t = Table::new("sobolev", &["exponent", "p", "q", "s", "f_norm", "u_norm", "ratio"]);
        let mut add = |label: &str, r: &SobolevReport| {
            for row in &r.rows {
                t.push(vec![
                    label.into(),
                    r.p.into(),
                    r.q.into(),
                    row.s.into(),
                    row.f_norm.into(),
                    row.u_norm.into(),
                    row.ratio.into(),
                ]);
            }
        };
        add("sobolev", &main);
        add("control", &control);
        emit(rep, dir, &t)?;
        rep.check(Check::at_most("sobolev_dilation_spread", main.spread, khessian_core::solver::SOBOLEV_SPREAD_TOL));
        rep.check(Check::above("sobolev_control_drift", control.spread, s.control_drift));
    }

    if let Some(r) = &l.riesz {
        let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
        let mut t = Table::new(
            "riesz",
            &["dim", "n", "field", "square_sum_error", "median_ratio", "max_deviation", "points_used"],
        );
        let mut worst_square = 0.0f64;
        rep.stage("riesz", |rep| {
            for case in &r.cases {
                let spec = case.grid.spec()?;
                let dim = case.grid.dim;
                let axes: Vec<usize> = (0..case.n as usize).collect();
                let alpha = MultiIndex::from_axes(dim, &axes)?;
                let mut medians = Vec::new();
                for i in 0..r.fields {
                    let f = random_band_limited::<f64, _>(&spec, case.cutoff, &mut rng)?;
                    let shifted = f.map(|v| v + 0.7);
                    let mut acc = RealField::zeros(spec);
                    for j in 0..dim {
                        acc = acc.add(&riesz(&riesz(&shifted, j)?, j)?)?;
                    }
                    let want = f.scale(-PI * PI);
                    let err = max_diff(&acc, &want) / want.max_abs();
                    worst_square = worst_square.max(err);
                    let fr = riesz_factorization_check(&f, case.n, &alpha)?;
                    medians.push(fr.median_ratio);
                    t.push(vec![
                        dim.into(),
                        (case.n as usize).into(),
                        i.into(),
                        err.into(),
                        fr.median_ratio.into(),
                        fr.max_deviation.into(),
                        fr.points_used.into(),
                    ]);
                }
                let spread = medians.iter().fold(0.0f64, |m, &v| m.max((v - medians[0]).abs()));
                rep.check(Check::at_most(
                    &format!("riesz_factorization_spread_n{}_N{}", case.n, dim),
                    spread,
                    RIESZ_FACTOR_TOL,
                ));
                rep.check(Check::reported(
                    &format!("riesz_factorization_constant_n{}_N{}", case.n, dim),
                    Some(medians[0] * PI.powi(case.n as i32)),
                ));
            }
            Ok(())
        })?;
        emit(rep, dir, &t)?;
        rep.check(Check::at_most("riesz_square_sum", worst_square, RIESZ_SQUARE_TOL));
    }
    Ok(())
}

fn random_symmetric(dim: usize, rng: &mut ChaCha8Rng) -> SymMatrix<f64> {
    let mut a = SymMatrix::zeros(dim);
    for i in 0..dim {
        for j in i..dim {
            a.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    a
}

fn khessian_check(k: &KhessianCheckConfig, dir: &Path, rep: &mut RunReport) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(k.seed);
    let dims = k.max_dim - k.min_dim + 1;
    // per dimension and k: count, σ, Euler, Newton
    let mut acc = vec![vec![(0usize, 0.0f64, 0.0f64, 0.0f64); k.max_dim]; dims];
    rep.stage("algebra", |_| {
        for i in 0..k.matrices {
            let dim = k.min_dim + i % dims;
            let a = random_symmetric(dim, &mut rng);
            for e in algebra_errors(&a) {
                let slot = &mut acc[dim - k.min_dim][e.k - 1];
                slot.0 += 1;
                slot.1 = slot.1.max(e.sigma);
                slot.2 = slot.2.max(e.euler);
                slot.3 = slot.3.max(e.newton);
            }
        }
        Ok(())
    })?;
    let mut t = Table::new("algebra", &["dim", "k", "matrices", "sigma_error", "euler_error", "newton_error"]);
    let (mut s, mut e, mut n) = (0.0f64, 0.0f64, 0.0f64);
    for (di, row) in acc.iter().enumerate() {
        let dim = k.min_dim + di;
        for (ki, slot) in row.iter().enumerate().take(dim) {
            t.push(vec![dim.into(), (ki + 1).into(), slot.0.into(), slot.1.into(), slot.2.into(), slot.3.into()]);
            s = s.max(slot.1);
            e = e.max(slot.2);
            n = n.max(slot.3);
        }
    }
    emit(rep, dir, &t)?;
    rep.check(Check::at_most("sigma_eigen_vs_minors", s, SIGMA_TOL));
    rep.check(Check::at_most("euler_identity", e, EULER_TOL));
    rep.check(Check::at_most("newton_analytic_vs_fd", n, NEWTON_FD_TOL));

    let Some(d) = &k.divergence else {
        return Ok(());
    };
    let spec = d.grid.spec()?;
    let mut t = Table::new("divergence", &["field", "divergence_residual", "null_divergence_residual"]);
    let (mut worst_d, mut worst_n) = (0.0f64, 0.0f64);
    rep.stage("divergence", |_| {
        for i in 0..d.fields {
            let u = random_band_limited::<f64, _>(&spec, d.cutoff, &mut rng)?;
            let (a, b) = divergence_residuals(&u, d.k)?;
            worst_d = worst_d.max(a);
            worst_n = worst_n.max(b);
            t.push(vec![i.into(), a.into(), b.into()]);
        }
        Ok(())
    })?;
    emit(rep, dir, &t)?;
    rep.check(Check::at_most("divergence_form", worst_d, DIVERGENCE_TOL));
    rep.check(Check::at_most("null_divergence", worst_n, DIVERGENCE_TOL));
    Ok(())
}

/// Smooth non-radial profile used for the Poincaré dilation check.
fn poincare_shape(y: &[f64]) -> f64 {
    let tail: f64 = y[1..].iter().map(|v| v * v).sum();
    (-(y[0] - 0.3).powi(2) - 2.0 * tail).exp() * (1.0 + y[0])
}

fn log_field(spec: &GridSpec) -> Result<RealField<f64>, CliError> {
    let h = spec.spacing();
    Ok(sample(spec, |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt().max(h / 2.0).ln())?)
}

fn analysis(a: &AnalysisConfig, dir: &Path, rep: &mut RunReport) -> Result<(), CliError> {
    if let Some(b) = &a.bmo {
        let spec = b.grid.spec()?;
        let f = log_field(&spec)?;
        let c = RealField::constant(spec, 2.5);
        let mut t = Table::new("bmo", &["cubes", "constant", "log_estimate"]);
        let mut est = Vec::new();
        rep.stage("bmo", |_| {
            for &count in &b.counts {
                let cubes = CubeSampler::new(count).draw(&spec, &mut ChaCha8Rng::seed_from_u64(a.seed));
                let zero = bmo_seminorm(&c, &cubes)?.value;
                let v = bmo_seminorm(&f, &cubes)?.value;
                est.push((zero, v));
                t.push(vec![count.into(), zero.into(), v.into()]);
            }
            Ok(())
        })?;
        emit(rep, dir, &t)?;
        let worst_const = est.iter().map(|e| e.0).fold(0.0, f64::max);
        rep.check(Check::verdict("bmo_constant_zero", worst_const == 0.0, Some(worst_const), Some(0.0)));
        if est.len() >= 2 {
            let drift = est.windows(2).map(|w| (w[1].1 / w[0].1 - 1.0).abs()).fold(0.0, f64::max);
            rep.check(Check::at_most("bmo_log_doubling", drift, BMO_DOUBLING_TOL));
        } else {
            rep.check(Check::skipped("bmo_log_doubling", "needs two cube counts"));
        }
    }

    if let Some(p) = &a.poincare {
        let spec = p.grid.spec()?;
        let mut t = Table::new("poincare", &["scale", "radius", "ratio"]);
        let mut ratios = Vec::new();
        rep.stage("poincare", |_| {
            for &s in &p.scales {
                let f = sample(&spec, |x: &[f64]| {
                    let y: Vec<f64> = x.iter().map(|v| v / s).collect();
                    poincare_shape(&y)
                })?;
                let ball = Ball {
                    center: vec![0.0; spec.dim()],
                    radius: p.radius * s,
                };
                let r = poincare_ratio(&f, &ball)?;
                ratios.push(r);
                t.push(vec![s.into(), ball.radius.into(), r.into()]);
            }
            Ok(())
        })?;
        emit(rep, dir, &t)?;
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        rep.check(Check::at_most("poincare_dilation", max / min - 1.0, POINCARE_TOL));
    }

    if let Some(at) = &a.atom {
        let spec = at.grid.spec()?;
        let report = rep.stage("atom_decay", |_| {
            let atom = make_atom::<f64>(&CubeSample::centered(&spec, at.side_cells)?, at.pattern)?;
            Ok(atom_decay_check(&atom)?)
        })?;
        let mut t = Table::new("atom_decay", &["inner", "outer", "constant"]);
        for s in &report.shells {
            t.push(vec![s.inner.into(), s.outer.into(), s.constant.into()]);
        }
        emit(rep, dir, &t)?;
        rep.check(
            Check::verdict("atom_decay_trend_free", report.pass, Some(report.slope), Some(DECAY_SLOPE_TOL))
                .with_detail(format!("max shell / first shell = {:.4}", report.max / report.first)),
        );
    }

    if let Some(b) = &a.boundedness {
        let spec = b.grid.spec()?;
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed ^ 0x5eed);
        let cubes = CubeSampler::new(b.cubes).draw(&spec, &mut rng);
        let mut t = Table::new("boundedness", &["field", "cutoff", "ratio"]);
        let mut ratios = Vec::new();
        rep.stage("boundedness", |_| {
            for i in 0..b.fields {
                let cutoff = rng.gen_range(1..(b.grid.points + 1) / 2);
                let f = random_band_limited::<f64, _>(&spec, cutoff, &mut rng)?;
                let r = bmo_boundedness_check(&f, &cubes)?;
                ratios.push(r);
                t.push(vec![i.into(), cutoff.into(), r.into()]);
            }
            Ok(())
        })?;
        emit(rep, dir, &t)?;
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        rep.check(Check::at_most("bmo_boundedness_spread", max / min, BOUNDEDNESS_SPREAD));
    }
    Ok(())
}

fn polytope_name(p: &Polytope) -> &'static str {
    match p {
        Polytope::Simplex { .. } => "simplex",
        Polytope::Box { .. } => "box",
    }
}

fn fixedpoint_demo(fp: &FixedpointConfig, dir: &Path, rep: &mut RunReport) -> Result<(), CliError> {
    if let Some(p) = &fp.projector {
        let mut rng = ChaCha8Rng::seed_from_u64(fp.projector_seed);
        let mut t = Table::new(
            "projector",
            &["polytope", "dim", "delta", "centers", "points", "max_gap", "violations"],
        );
        let mut total = 0usize;
        rep.stage("projector", |_| {
            for poly in &p.polytopes {
                let dim = poly.dim();
                let metric = WeakStarMetric::<f64>::new(dim, dim + fp.extra_tests, fp.metric_seed)?;
                for &delta in &p.deltas {
                    let net = NetCover::build(*poly, &metric, delta, p.candidates, &mut rng)?;
                    let mut worst = 0.0f64;
                    let mut bad = 0usize;
                    for _ in 0..p.points {
                        let v = poly.sample::<f64, _>(&mut rng);
                        let q = project(&v, &net, &metric)?;
                        let gap = metric.distance(&q, &v);
                        worst = worst.max(gap);
                        if gap > delta || !poly.contains(&q) {
                            bad += 1;
                        }
                    }
                    total += bad;
                    t.push(vec![
                        polytope_name(poly).into(),
                        dim.into(),
                        delta.into(),
                        net.centers().len().into(),
                        p.points.into(),
                        worst.into(),
                        bad.into(),
                    ]);
                }
            }
            Ok(())
        })?;
        emit(rep, dir, &t)?;
        rep.check(Check::at_most("projector_violations", total as f64, 0.0));
    }

    if let Some(d) = &fp.demo {
        let metric = WeakStarMetric::<f64>::new(d.dim, d.dim + fp.extra_tests, fp.metric_seed)?;
        let map = match d.map {
            DemoMap::ConvolutionSquare => convolution_square::<f64>,
        };
        let r = rep.stage("schauder", |_| {
            Ok(schauder_iterate(map, Polytope::Simplex { dim: d.dim }, &metric, &d.deltas, &d.finder)?)
        })?;
        let mut t = Table::new(
            "schauder",
            &["delta", "centers", "residual", "finder_residual", "iterations", "starts"],
        );
        for l in &r.levels {
            t.push(vec![
                l.delta.into(),
                l.centers.into(),
                l.residual.into(),
                l.finder_residual.into(),
                l.iterations.into(),
                l.starts.into(),
            ]);
        }
        emit(rep, dir, &t)?;
        let mut t = Table::new("fixed_point", &["index", "value"]);
        for (i, &v) in r.point.iter().enumerate() {
            t.push(vec![i.into(), v.into()]);
        }
        emit(rep, dir, &t)?;
        let last = r.levels.last().expect("at least one level").residual;
        rep.check(Check::at_most("demo_residual", last, d.residual_tol));
        let (arg, top) = r
            .point
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        rep.check(
            Check::at_most("demo_delta_limit", 1.0 - top, d.residual_tol).with_detail(format!("mass at index {arg}")),
        );
        rep.check(Check::verdict("demo_residual_monotone", r.monotone, None, None));
    }
    Ok(())
}
