use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use khessian_cli::{RunOutput, Status};
use khessian_core::analysis::{bmo_seminorm, CubeSampler};
use khessian_core::fixedpoint::convolution_square;
use khessian_core::grid::{random_band_limited, sample, GridSpec, RealField};
use khessian_core::kernels::{green_polyharmonic, KernelForm};
use khessian_core::khessian::{principal_minor_sum, s_k_field, SymMatrix};
use khessian_core::solver::sobolev_exponent;
use khessian_core::spectral_ops::riesz;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONFIGS: [&str; 6] = ["khessian", "linear", "solve", "sweep", "fixedpoint", "analysis"];

struct Run {
    out: RunOutput,
    seconds: f64,
}

impl Run {
    fn dir(&self) -> &Path {
        self.out.dir.as_deref().expect("run wrote an output directory")
    }

    fn checks_pass(&self, names: &[&str]) -> Result<(), String> {
        let report = self.out.report.as_ref().ok_or("no report")?;
        if let Some(e) = &report.error {
            return Err(e.clone());
        }
        for name in names {
            let c = report
                .checks
                .iter()
                .find(|c| c.name == *name)
                .ok_or(format!("missing check {name}"))?;
            if c.status != Status::Pass {
                return Err(format!("{name} = {:?} (threshold {:?})", c.value, c.threshold));
            }
        }
        Ok(())
    }

    fn prefixed(&self, prefix: &str) -> Vec<String> {
        let report = self.out.report.as_ref().expect("report");
        report
            .checks
            .iter()
            .filter(|c| c.name.starts_with(prefix) && c.status != Status::Reported)
            .map(|c| c.name.clone())
            .collect()
    }

    fn value(&self, name: &str) -> f64 {
        let report = self.out.report.as_ref().expect("report");
        report.checks.iter().find(|c| c.name == name).and_then(|c| c.value).unwrap_or(f64::NAN)
    }

    fn stage(&self, name: &str) -> f64 {
        let report = self.out.report.as_ref().expect("report");
        report.stages.iter().filter(|s| s.name == name).map(|s| s.seconds).sum()
    }
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.json"))
}

fn run_config(name: &str, out: &Path) -> Run {
    let text = fs::read_to_string(config_path(name)).expect("config readable");
    let start = Instant::now();
    let out = khessian_cli::run_text(&text, Some(out));
    Run {
        out,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .expect("output directory")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn within(budget: f64, seconds: f64) -> Result<(), String> {
    if seconds <= budget {
        Ok(())
    } else {
        Err(format!("runtime {seconds:.1}s over {budget:.0}s"))
    }
}

/// σ_k through the characteristic polynomial (Faddeev–LeVerrier).
fn sigma_leverrier(a: &SymMatrix<f64>) -> Vec<f64> {
    let n = a.dim();
    let dense = a.to_dense();
    let mut m = vec![0.0; n * n];
    let mut coeff = vec![0.0; n + 1];
    coeff[n] = 1.0;
    for k in 1..=n {
        let mut next = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                next[i * n + j] = (0..n).map(|l| dense[i * n + l] * m[l * n + j]).sum::<f64>();
            }
            next[i * n + i] += coeff[n - k + 1];
        }
        m = next;
        let trace: f64 = (0..n)
            .map(|i| (0..n).map(|l| dense[i * n + l] * m[l * n + i]).sum::<f64>())
            .sum();
        coeff[n - k] = -trace / k as f64;
    }
    (0..=n).map(|k| if k % 2 == 0 { coeff[n - k] } else { -coeff[n - k] }).collect()
}

fn criterion_1(kh: &Run) -> Result<(), String> {
    kh.checks_pass(&["sigma_eigen_vs_minors", "euler_identity", "newton_analytic_vs_fd"])?;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for t in 0..2000 {
        let dim = 2 + t % 5;
        let mut a = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                a.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        let want = sigma_leverrier(&a);
        for k in 1..=dim {
            let scale = a.frobenius().powi(k as i32).max(1.0);
            let got = principal_minor_sum(&a, k).map_err(|e| e.to_string())?;
            worst = worst.max((got - want[k]).abs() / scale);
        }
    }
    if worst > 1e-10 {
        return Err(format!("minor sums vs characteristic polynomial {worst:.3e}"));
    }
    within(60.0, kh.stage("algebra"))
}

fn criterion_2(kh: &Run) -> Result<(), String> {
    kh.checks_pass(&["divergence_form", "null_divergence"])?;
    // a divergence has zero mean on the torus
    let spec = GridSpec::new(4, 16, 1.0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let u = random_band_limited::<f64, _>(&spec, 7, &mut rng).map_err(|e| e.to_string())?;
    let s2 = s_k_field(&u, 2).map_err(|e| e.to_string())?;
    let mean = s2.mean().abs() / s2.rms();
    if mean > 1e-8 {
        return Err(format!("mean of S_2 {mean:.3e}"));
    }
    within(60.0, kh.stage("divergence"))
}

fn criterion_3(lin: &Run) -> Result<(), String> {
    lin.checks_pass(&["oracle_n3_m1", "oracle_n4_m1", "oracle_n4_m2", "green_constants_match"])?;
    let g31 = green_polyharmonic(3, 1).map_err(|e| e.to_string())?;
    let g41 = green_polyharmonic(4, 1).map_err(|e| e.to_string())?;
    let g42 = green_polyharmonic(4, 2).map_err(|e| e.to_string())?;
    let checks = [
        (g31.eval(2.0f64), 1.0 / (8.0 * PI)),
        (g41.eval(2.0f64), 1.0 / (16.0 * PI * PI)),
        (g42.eval(2.0f64) - g42.eval(1.0f64), -(2.0f64).ln() / (8.0 * PI * PI)),
    ];
    for (got, want) in checks {
        if (got - want).abs() > 1e-14 * want.abs() {
            return Err(format!("kernel value {got} vs closed form {want}"));
        }
    }
    if g42.form != KernelForm::Log {
        return Err("N = 2m kernel is not logarithmic".into());
    }
    within(300.0, lin.seconds)
}

fn criterion_4(lin: &Run) -> Result<(), String> {
    let mut names = vec!["riesz_square_sum".to_string()];
    names.extend(lin.prefixed("riesz_factorization_spread"));
    if names.len() != 3 {
        return Err(format!("expected two factorization cases, got {:?}", names));
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    lin.checks_pass(&refs)?;
    // R_0 cos(πx_0/L) = -π sin(πx_0/L) in this normalization
    let spec = GridSpec::new(3, 16, 1.5).map_err(|e| e.to_string())?;
    let l = spec.half_length();
    let c = sample(&spec, |x: &[f64]| (PI * x[0] / l).cos()).map_err(|e| e.to_string())?;
    let s = sample(&spec, |x: &[f64]| -PI * (PI * x[0] / l).sin()).map_err(|e| e.to_string())?;
    let r = riesz(&c, 0).map_err(|e| e.to_string())?;
    let err = r.sub(&s).map_err(|e| e.to_string())?.max_abs();
    if err > 1e-12 {
        return Err(format!("single-mode Riesz transform off by {err:.3e}"));
    }
    within(60.0, lin.stage("riesz"))
}

fn criterion_5(lin: &Run) -> Result<(), String> {
    lin.checks_pass(&["sobolev_dilation_spread", "sobolev_control_drift"])?;
    let q = sobolev_exponent(4, 1, 1.5).map_err(|e| e.to_string())?;
    if (q - 6.0).abs() > 1e-12 {
        return Err(format!("q = {q}, expected 6"));
    }
    within(120.0, lin.stage("sobolev"))
}

fn criterion_6(solve: &Run, sweep: &Run) -> Result<(), String> {
    solve.checks_pass(&["picard_converged", "contraction_ratio", "pde_residual", "uniqueness"])?;
    sweep.checks_pass(&["continuation_monotone", "divergence_transition"])?;
    let text = fs::read_to_string(solve.dir().join("uniqueness.csv")).map_err(|e| e.to_string())?;
    let seeds = text.lines().count() - 1;
    if seeds < 3 {
        return Err(format!("uniqueness used {seeds} seeds"));
    }
    within(600.0, solve.seconds + sweep.seconds)
}

/// Cyclic convolution on Z_d written out directly.
fn cyclic_square(mu: &[f64]) -> Vec<f64> {
    let d = mu.len();
    (0..d)
        .map(|i| (0..d).map(|j| mu[j] * mu[(i + d - j) % d]).sum())
        .collect()
}

fn criterion_7(fp: &Run) -> Result<(), String> {
    fp.checks_pass(&["projector_violations", "demo_residual", "demo_delta_limit"])?;
    if fp.value("projector_violations") != 0.0 {
        return Err("projector violations reported".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut mu: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|v| *v /= total);
    let got = convolution_square(&mu);
    let want = cyclic_square(&mu);
    let err = got.iter().zip(&want).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if err > 1e-15 {
        return Err(format!("convolution square off by {err:.3e}"));
    }
    within(60.0, fp.seconds)
}

fn criterion_8(an: &Run) -> Result<(), String> {
    an.checks_pass(&[
        "bmo_constant_zero",
        "bmo_log_doubling",
        "poincare_dilation",
        "atom_decay_trend_free",
        "bmo_boundedness_spread",
    ])?;
    let spec = GridSpec::new(2, 256, 4.0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let cubes = CubeSampler::new(500).draw(&spec, &mut rng);
    let est = bmo_seminorm(&RealField::constant(spec, -2.75f64), &cubes).map_err(|e| e.to_string())?;
    if est.value != 0.0 {
        return Err(format!("bmo of a constant is {}", est.value));
    }
    within(600.0, an.seconds)
}

fn criterion_9(first: &[(&str, Run)], scratch: &Path) -> Result<(), String> {
    for (name, run) in first {
        let again = run_config(name, scratch);
        if again.out.dir.as_ref().map(|d| d.file_name()) != run.out.dir.as_ref().map(|d| d.file_name()) {
            return Err(format!("{name}: output hash changed"));
        }
        let (a, b) = (csv_files(run.dir()), csv_files(again.dir()));
        if a.is_empty() {
            return Err(format!("{name}: no tables written"));
        }
        if a != b {
            let names: Vec<_> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| x.0.clone()).collect();
            return Err(format!("{name}: tables differ {names:?}"));
        }
    }
    Ok(())
}

#[test]
fn acceptance() {
    let first_dir = tempfile::tempdir().unwrap();
    let second_dir = tempfile::tempdir().unwrap();
    let runs: Vec<(&str, Run)> = CONFIGS.iter().map(|&c| (c, run_config(c, first_dir.path()))).collect();
    let get = |name: &str| &runs.iter().find(|(n, _)| *n == name).unwrap().1;

    let results = [
        ("1 k-Hessian algebra", criterion_1(get("khessian"))),
        ("2 divergence form", criterion_2(get("khessian"))),
        ("3 linear oracle", criterion_3(get("linear"))),
        ("4 Riesz machinery", criterion_4(get("linear"))),
        ("5 Sobolev scaling", criterion_5(get("linear"))),
        ("6 fixed-point solve", criterion_6(get("solve"), get("sweep"))),
        ("7 projector and demo", criterion_7(get("fixedpoint"))),
        ("8 harmonic analysis", criterion_8(get("analysis"))),
        ("9 determinism", criterion_9(&runs, second_dir.path())),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(()) => println!("PASS  criterion {name}"),
            Err(e) => {
                failed += 1;
                println!("FAIL  criterion {name}: {e}");
            }
        }
    }
    for (name, run) in &runs {
        println!("      {name}: {:.1}s", run.seconds);
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
