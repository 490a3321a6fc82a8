use khessian_core::grid::{forward_transform, inverse_transform, random_band_limited, GridSpec};
use khessian_core::khessian::{divergence_residuals, principal_minor_sum, s_k_field, SymMatrix};
use khessian_core::solver::{picard_solve, Datum, Operator, ProblemSpec, SolverOptions, Space, Verdict};
use khessian_core::spectral_ops::{laplacian_power_apply, laplacian_power_invert};
use khessian_core::{RealField32, RealField64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair(dim: usize, n: usize, seed: u64) -> (RealField64, RealField32) {
    let spec = GridSpec::new(dim, n, 1.0).unwrap();
    let wide: RealField64 = random_band_limited(&spec, 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let narrow = RealField32::new(spec, wide.values().iter().map(|&v| v as f32).collect()).unwrap();
    (wide, narrow)
}

fn rel_gap(a: &RealField64, b: &RealField32) -> f64 {
    let d = a
        .values()
        .iter()
        .zip(b.values())
        .fold(0.0f64, |m, (x, y)| m.max((x - *y as f64).abs()));
    d / a.max_abs()
}

#[test]
fn transforms_in_f32() {
    let (_, f) = pair(3, 8, 1);
    let back = inverse_transform(&forward_transform(&f)).unwrap();
    let err = f.sub(&back).unwrap().max_abs();
    assert!(err < 1e-5 * f.max_abs(), "{err}");
}

#[test]
fn operators_track_f64() {
    let (w, n) = pair(3, 8, 2);
    let gw = laplacian_power_invert(&w, 1).unwrap();
    let gn = laplacian_power_invert(&n, 1).unwrap();
    assert!(rel_gap(&gw, &gn) < 1e-4);
    let back = laplacian_power_apply(&gn, 1).unwrap();
    assert!(n.sub(&back).unwrap().max_abs() < 1e-4 * n.max_abs());
    let sw = s_k_field(&w, 2).unwrap();
    let sn = s_k_field(&n, 2).unwrap();
    assert!(rel_gap(&sw, &sn) < 1e-3);
}

#[test]
fn minors_in_f32() {
    let mut a = SymMatrix::<f32>::zeros(3);
    a.set(0, 0, 2.0);
    a.set(1, 1, 3.0);
    a.set(2, 2, 4.0);
    a.set(0, 1, 1.0);
    // σ_2 = 6 + 8 + 12 - 1
    assert_eq!(principal_minor_sum(&a, 2).unwrap(), 25.0);
    assert_eq!(principal_minor_sum(&a, 3).unwrap(), 20.0);
}

#[test]
fn divergence_identities_in_f32() {
    let (_, n) = pair(3, 8, 3);
    let (a, b) = divergence_residuals(&n, 2).unwrap();
    assert!(a < 1e-5 && b < 1e-5, "{a} {b}");
}

#[test]
fn picard_in_f32() {
    let prob = ProblemSpec {
        k: 2,
        operator: Operator::Polyharmonic { m: 1 },
        lambda: 0.05,
        datum: Datum::Gaussian {
            width: 0.5,
            amplitude: 1.0,
        },
        grid: GridSpec::new(2, 16, 2.0).unwrap(),
        space: Space::USpace,
    };
    let opts = SolverOptions {
        tol: 1e-5,
        ..SolverOptions::default()
    };
    let zero = RealField32::zeros(prob.grid);
    let t32 = picard_solve(&prob, &zero, &opts).unwrap();
    assert_eq!(t32.verdict, Verdict::Converged);
    let t64 = picard_solve(&prob, &RealField64::zeros(prob.grid), &SolverOptions::default()).unwrap();
    assert!(rel_gap(&t64.solution, &t32.solution) < 1e-3);
}
