//! Fundamental solutions of `(-Δ)^m` and `Λ^n` in closed form, and a direct
//! free-space convolution used as an oracle for the spectral inverses.
//!
//! Power kernels are `c |x|^{order - N}`; log kernels (order = N) are
//! `c log|x|`, with the sign folded into `c`.
//!
//! In the direct sum the node `y = x` of a power kernel gets the weight
//! `-c Z_N(s) h^{order-N}`, `s = (N - order)/2`, where `Z_N` is the Epstein
//! zeta function of the integer lattice. This is the local correction that
//! makes `Σ_{y≠x} |x-y|^{-2s} g(y) h^N + w g(x)` match the integral for
//! smooth `g`. Log kernels use `log(h/2)` at that node.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample, GridSpec, RealField};
use crate::scalar::Scalar;

/// Direct convolution refuses grids with `n^{2N}` above this.
pub const CONVOLUTION_COST_CAP: f64 = 17_179_869_184.0; // 2^34

/// Outer radius of the compensating bump in [`mollified_delta`], relative
/// to the inner radius.
pub const COMPENSATION_FACTOR: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelForm {
    Power,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialKernel {
    pub dim: usize,
    pub order: usize,
    pub form: KernelForm,
    pub coefficient: f64,
    /// `order - N` for power kernels, 0 for log kernels.
    pub exponent: f64,
}

impl RadialKernel {
    fn new(dim: usize, order: usize, coefficient: f64) -> Self {
        let form = if order == dim {
            KernelForm::Log
        } else {
            KernelForm::Power
        };
        let exponent = match form {
            KernelForm::Power => order as f64 - dim as f64,
            KernelForm::Log => 0.0,
        };
        Self {
            dim,
            order,
            form,
            coefficient,
            exponent,
        }
    }

    /// Kernel value at radius `r > 0`.
    pub fn eval<T: Scalar>(&self, r: T) -> T {
        let c = T::of(self.coefficient);
        match self.form {
            KernelForm::Power => c * r.powf(T::of(self.exponent)),
            KernelForm::Log => c * r.ln(),
        }
    }

    /// Weight of the singular node on a grid of spacing `h`.
    pub fn singular_weight(&self, h: f64) -> f64 {
        match self.form {
            KernelForm::Power => {
                let s = (self.dim as f64 - self.order as f64) / 2.0;
                -self.coefficient * epstein_zeta(self.dim, s) * h.powf(self.exponent)
            }
            KernelForm::Log => self.coefficient * (h / 2.0).ln(),
        }
    }
}

/// `Γ(j/2)` for integer `j` that is not a pole, by exact recursion from
/// `Γ(1) = 1` and `Γ(1/2) = √π`.
pub fn gamma_half(j: i64) -> f64 {
    assert!(j > 0 || j % 2 != 0, "Gamma has a pole at {}", j as f64 / 2.0);
    let (mut x, mut g) = if j % 2 == 0 { (2, 1.0) } else { (1, PI.sqrt()) };
    while x < j {
        g *= x as f64 / 2.0;
        x += 2;
    }
    while x > j {
        x -= 2;
        g /= x as f64 / 2.0;
    }
    g
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Volume of the unit ball in ℝ^N.
pub fn unit_ball_volume(dim: usize) -> f64 {
    PI.powf(dim as f64 / 2.0) / gamma_half(dim as i64 + 2)
}

/// Fundamental solution of `(-Δ)^m` in ℝ^N for `N ≥ 2m`.
pub fn green_polyharmonic(dim: usize, m: usize) -> Result<RadialKernel> {
    if m == 0 || dim < 2 * m {
        return Err(Error::InadmissibleOrder(format!(
            "polyharmonic kernel needs N >= 2m >= 2, got N={dim}, m={m}"
        )));
    }
    let fm = factorial(m - 1);
    let c = if dim == 2 * m {
        -1.0 / (dim as f64
            * unit_ball_volume(dim)
            * 4f64.powi(m as i32 - 1)
            * gamma_half(dim as i64)
            * fm)
    } else {
        gamma_half(dim as i64 - 2 * m as i64)
            / (4f64.powi(m as i32) * PI.powf(dim as f64 / 2.0) * fm)
    };
    Ok(RadialKernel::new(dim, 2 * m, c))
}

/// Log-case constant `C_N` of `Λ^{-N}`, so that `Λ^N (C_N log|x|) = δ`.
pub fn lambda_log_constant(dim: usize) -> f64 {
    // (2 - N) Γ(N/2 - 1) = -2 Γ(N/2), continuous through N = 2
    let d = dim as f64;
    -1.0 / (2.0 * (2.0 * PI).powf(d - 2.0) * PI.powf(2.0 - d / 2.0) * gamma_half(dim as i64))
}

/// Fundamental solution of `Λ^n` in ℝ^N for `0 < n ≤ N`.
pub fn green_lambda(n: usize, dim: usize) -> Result<RadialKernel> {
    if n == 0 || n > dim {
        return Err(Error::InadmissibleOrder(format!(
            "Lambda kernel needs 0 < n <= N, got n={n}, N={dim}"
        )));
    }
    let c = if n == dim {
        lambda_log_constant(dim)
    } else {
        2f64.powi(-(n as i32)) * PI.powf(-(dim as f64) / 2.0) * gamma_half(dim as i64 - n as i64)
            / gamma_half(n as i64)
    };
    Ok(RadialKernel::new(dim, n, c))
}

/// Upper incomplete gamma `Γ(a, x)` for `a ∈ {1/2, 1, 3/2, …}`.
fn upper_gamma_half(twice_a: usize, x: f64) -> f64 {
    let (mut a2, mut g) = if twice_a % 2 == 0 {
        (2, (-x).exp())
    } else {
        (1, PI.sqrt() * libm::erfc(x.sqrt()))
    };
    while a2 < twice_a {
        let a = a2 as f64 / 2.0;
        g = a * g + x.powf(a) * (-x).exp();
        a2 += 2;
    }
    g
}

/// Epstein zeta `Z_N(s) = Σ_{j ∈ ℤ^N, j ≠ 0} |j|^{-2s}`, analytically
/// continued, for half-integer `s ∈ (0, N/2)`.
pub fn epstein_zeta(dim: usize, s: f64) -> f64 {
    let twice_s = (2.0 * s).round() as usize;
    assert!(
        (2.0 * s - twice_s as f64).abs() < 1e-12 && twice_s > 0 && twice_s < dim,
        "s must be a half-integer in (0, N/2)"
    );
    let twice_t = dim - twice_s;
    let t = twice_t as f64 / 2.0;
    const R: i64 = 4;
    let mut sum = -1.0 / s + 1.0 / (s - dim as f64 / 2.0);
    let mut j = vec![-R; dim];
    loop {
        let q: i64 = j.iter().map(|v| v * v).sum();
        if q > 0 && q <= R * R {
            let x = PI * q as f64;
            sum += upper_gamma_half(twice_s, x) * x.powf(-s) + upper_gamma_half(twice_t, x) * x.powf(-t);
        }
        let mut axis = dim;
        loop {
            if axis == 0 {
                return sum * PI.powf(s) / gamma_half(twice_s as i64);
            }
            axis -= 1;
            j[axis] += 1;
            if j[axis] <= R {
                break;
            }
            j[axis] = -R;
        }
    }
}

/// Direct sum `u(x) = Σ_y G(x - y) f(y) h^N` with free-space (non-periodic)
/// offsets.
pub fn convolve_kernel<T: Scalar>(f: &RealField<T>, kernel: &RadialKernel) -> Result<RealField<T>> {
    let spec = *f.spec();
    let dim = spec.dim();
    if kernel.dim != dim {
        return Err(Error::InvalidArgument(format!(
            "kernel dimension {} on a {dim}-dimensional grid",
            kernel.dim
        )));
    }
    let n = spec.points();
    let cost = (n as f64).powi(2 * dim as i32);
    if cost > CONVOLUTION_COST_CAP {
        return Err(Error::CostCapExceeded {
            cost,
            cap: CONVOLUTION_COST_CAP,
        });
    }

    let mut support = Vec::new();
    spec.for_each_index(|flat, idx| {
        if f.values()[flat] != T::zero() {
            support.push((flat, idx.to_vec()));
        }
    });
    let mut out = RealField::zeros(spec);
    if support.is_empty() {
        return Ok(out);
    }
    let radius = support_radius(&spec, &support);
    let limit = spec.half_length() / 2.0;
    if radius > limit {
        return Err(Error::SupportTooLarge { radius, limit });
    }

    let h = spec.spacing();
    let side = 2 * n - 1;
    let table_len = side.pow(dim as u32);
    let mut table = vec![T::zero(); table_len];
    let mut off = vec![0usize; dim];
    for entry in table.iter_mut() {
        let r2: f64 = off
            .iter()
            .map(|&o| {
                let d = (o as f64 - (n - 1) as f64) * h;
                d * d
            })
            .sum();
        *entry = if r2 == 0.0 {
            T::of(kernel.singular_weight(h))
        } else {
            kernel.eval(T::of(r2.sqrt()))
        };
        for j in (0..dim).rev() {
            off[j] += 1;
            if off[j] < side {
                break;
            }
            off[j] = 0;
        }
    }

    let strides: Vec<usize> = (0..dim).map(|j| side.pow((dim - 1 - j) as u32)).collect();
    let mut base = vec![0usize; spec.len()];
    spec.for_each_index(|flat, idx| {
        base[flat] = idx.iter().zip(&strides).map(|(&i, &s)| i * s).sum();
    });
    let cell = T::of(spec.cell_volume());
    let values = f.values();
    let acc: Vec<T> = {
        let mut acc = vec![T::zero(); spec.len()];
        for (flat, idx) in &support {
            let w = values[*flat] * cell;
            // table index of x - y is base[x] + Σ_j (n - 1 - y_j) s_j
            let shift: usize = idx.iter().zip(&strides).map(|(&y, &s)| (n - 1 - y) * s).sum();
            for (a, &b) in acc.iter_mut().zip(&base) {
                *a = *a + w * table[b + shift];
            }
        }
        acc
    };
    out = RealField::new(spec, acc).map_err(|_| Error::NonFinite("convolve_kernel"))?;
    Ok(out)
}

/// Largest distance from the bounding-box center to a support node.
fn support_radius(spec: &GridSpec, support: &[(usize, Vec<usize>)]) -> f64 {
    let dim = spec.dim();
    let mut lo = vec![usize::MAX; dim];
    let mut hi = vec![0usize; dim];
    for (_, idx) in support {
        for j in 0..dim {
            lo[j] = lo[j].min(idx[j]);
            hi[j] = hi[j].max(idx[j]);
        }
    }
    let h = spec.spacing();
    support
        .iter()
        .map(|(_, idx)| {
            (0..dim)
                .map(|j| {
                    let d = (idx[j] as f64 - (lo[j] + hi[j]) as f64 / 2.0) * h;
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

fn bump<T: Scalar>(spec: &GridSpec, a: f64) -> Result<RealField<T>> {
    let a2 = T::of(a * a);
    let raw = sample(spec, |x: &[T]| {
        let t = x.iter().fold(T::zero(), |acc, &v| acc + v * v) / a2;
        if t < T::one() {
            (T::one() - t).powi(4)
        } else {
            T::zero()
        }
    })?;
    let mass = raw.integral();
    if mass == T::zero() {
        return Err(Error::InvalidArgument(format!("bump radius {a} contains no node")));
    }
    Ok(raw.scale(mass.recip()))
}

/// Unit-mass bump `(1 - |x|²/a²)^4` at the origin, discretely normalized.
pub fn unit_bump<T: Scalar>(spec: &GridSpec, a: f64) -> Result<RealField<T>> {
    bump(spec, a)
}

/// Mean-zero mollified delta: the unit-mass bump of radius `a` minus the
/// unit-mass bump of radius `1.25 a`. Its support radius is `1.25 a`.
pub fn mollified_delta<T: Scalar>(spec: &GridSpec, a: f64) -> Result<RealField<T>> {
    let inner = bump(spec, a)?;
    let outer = bump(spec, COMPENSATION_FACTOR * a)?;
    inner.sub(&outer)
}

/// `‖(u - ū) - (r - r̄)‖₂ / ‖r - r̄‖₂` over the nodes of the central half-box
/// `[-L/2, L/2)^N`, bars denoting means over those nodes.
pub fn half_box_gap<T: Scalar>(u: &RealField<T>, reference: &RealField<T>) -> Result<T> {
    if u.spec() != reference.spec() {
        return Err(Error::GridMismatch);
    }
    let spec = *u.spec();
    let n = spec.points();
    let mut a = Vec::new();
    let mut b = Vec::new();
    spec.for_each_index(|flat, idx| {
        if idx.iter().all(|&i| i >= n / 4 && i < 3 * n / 4) {
            a.push(u.values()[flat]);
            b.push(reference.values()[flat]);
        }
    });
    let count = T::of_usize(a.len());
    let ma = a.iter().fold(T::zero(), |acc, &x| acc + x) / count;
    let mb = b.iter().fold(T::zero(), |acc, &x| acc + x) / count;
    let mut num = T::zero();
    let mut den = T::zero();
    for (&x, &y) in a.iter().zip(&b) {
        let d = (x - ma) - (y - mb);
        num = num + d * d;
        den = den + (y - mb) * (y - mb);
    }
    if den == T::zero() {
        return Err(Error::DegenerateRatio);
    }
    Ok((num / den).sqrt())
}

/// Spectral `(-Δ)^{-m}` against direct Green's convolution for the
/// mollified delta of radius `a`: the half-box gap, spectral vs convolution.
pub fn polyharmonic_oracle_gap<T: Scalar>(spec: &GridSpec, m: usize, a: f64) -> Result<T> {
    let f = mollified_delta::<T>(spec, a)?;
    let conv = convolve_kernel(&f, &green_polyharmonic(spec.dim(), m)?)?;
    let spectral = crate::spectral_ops::laplacian_power_invert(&f, m as u32)?;
    half_box_gap(&spectral, &conv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_ops::{lambda_invert, laplacian_power_invert};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma_half_matches_libm() {
        for j in -7i64..=14 {
            if j <= 0 && j % 2 == 0 {
                continue;
            }
            let want = libm::tgamma(j as f64 / 2.0);
            assert!(rel(gamma_half(j), want) < 1e-14, "j={j}");
        }
    }

    #[test]
    fn polyharmonic_constants() {
        let g = green_polyharmonic(4, 1).unwrap();
        assert_eq!(g.form, KernelForm::Power);
        assert_eq!(g.exponent, -2.0);
        assert!(rel(g.coefficient, 1.0 / (4.0 * PI * PI)) < 1e-15);
        let g = green_polyharmonic(4, 2).unwrap();
        assert_eq!(g.form, KernelForm::Log);
        assert!(rel(g.coefficient, -1.0 / (8.0 * PI * PI)) < 1e-15);
        assert!(rel(green_polyharmonic(2, 1).unwrap().coefficient, -1.0 / (2.0 * PI)) < 1e-15);
        assert!(matches!(green_polyharmonic(3, 2), Err(Error::InadmissibleOrder(_))));
        assert!(green_polyharmonic(3, 0).is_err());

        // classical Laplace kernel 1/((N-2)|S^{N-1}|) with libm's Gamma
        for dim in 3..=6 {
            let area = 2.0 * PI.powf(dim as f64 / 2.0) / libm::tgamma(dim as f64 / 2.0);
            let want = 1.0 / ((dim as f64 - 2.0) * area);
            assert!(rel(green_polyharmonic(dim, 1).unwrap().coefficient, want) < 1e-14);
        }
        for dim in 2..=6 {
            for m in 1..=dim / 2 {
                let g = green_polyharmonic(dim, m).unwrap();
                assert_eq!(g.form == KernelForm::Log, dim == 2 * m);
                assert!(g.coefficient.is_finite() && g.coefficient != 0.0);
            }
        }
    }

    #[test]
    fn lambda_constants() {
        let g = green_lambda(1, 3).unwrap();
        assert!(rel(g.coefficient, 1.0 / (2.0 * PI * PI)) < 1e-15);
        assert_eq!(g.exponent, -2.0);
        let g = green_lambda(2, 2).unwrap();
        assert_eq!(g.form, KernelForm::Log);
        assert!(rel(g.coefficient, -1.0 / (2.0 * PI)) < 1e-15);
        assert!(rel(lambda_log_constant(1), -1.0 / PI) < 1e-15);
        assert!(green_lambda(4, 3).is_err());
        assert!(green_lambda(0, 3).is_err());

        for dim in 2..=6 {
            for n in (2..=dim).step_by(2) {
                let a = green_lambda(n, dim).unwrap();
                let b = green_polyharmonic(dim, n / 2).unwrap();
                assert_eq!(a.form, b.form);
                assert_eq!(a.exponent, b.exponent);
                let ulps = (a.coefficient - b.coefficient).abs() / (f64::EPSILON * b.coefficient.abs());
                assert!(ulps <= 4.0, "N={dim} n={n}: {ulps} ulp");
            }
        }
    }

    #[test]
    fn zeta_values() {
        assert!(rel(epstein_zeta(4, 1.0), -4.0 * 4f64.ln()) < 1e-12);
        assert!(rel(epstein_zeta(3, 0.5), -2.837297479480620) < 1e-12);
        // Z_2(1/2) = 4 ζ(1/2) β(1/2)
        assert!(rel(epstein_zeta(2, 0.5), -3.900264920001956) < 1e-12);
    }

    #[test]
    fn scaling_law() {
        for (dim, m) in [(3, 1), (4, 1), (6, 2)] {
            let g = green_polyharmonic(dim, m).unwrap();
            for s in [0.5f64, 2.0, 3.7] {
                let r = 0.83;
                let lhs = g.eval(s * r);
                let rhs = s.powf(g.exponent) * g.eval(r);
                assert!(rel(lhs, rhs) < 1e-14);
            }
        }
    }

    #[test]
    fn convolution_guards() {
        let s = GridSpec::new(4, 20, 1.0).unwrap();
        let z = RealField::<f64>::zeros(s);
        let g = green_polyharmonic(4, 1).unwrap();
        assert!(matches!(convolve_kernel(&z, &g), Err(Error::CostCapExceeded { .. })));
        let s = GridSpec::new(2, 16, 1.0).unwrap();
        let g2 = green_polyharmonic(2, 1).unwrap();
        assert_eq!(convolve_kernel(&RealField::<f64>::zeros(s), &g2).unwrap().max_abs(), 0.0);
        let wide = unit_bump::<f64>(&s, 0.9).unwrap();
        assert!(matches!(convolve_kernel(&wide, &g2), Err(Error::SupportTooLarge { .. })));
        assert!(convolve_kernel(&wide, &g).is_err());
    }

    #[test]
    fn point_source_far_field() {
        let s = GridSpec::new(4, 16, 1.0).unwrap();
        let h = s.spacing();
        let f = unit_bump::<f64>(&s, 1.25 * h).unwrap();
        let g = green_polyharmonic(4, 1).unwrap();
        let u = convolve_kernel(&f, &g).unwrap();
        let mut worst = 0.0f64;
        s.for_each_position::<f64>(|flat, x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r >= 2.0 * h && r <= 0.5 {
                worst = worst.max(rel(u.values()[flat], 1.0 / (4.0 * PI * PI * r * r)));
            }
        });
        assert!(worst < 0.05, "worst {worst}");
    }

    #[test]
    fn radial_input_gives_radial_output() {
        let s = GridSpec::new(3, 16, 1.0).unwrap();
        let f = mollified_delta::<f64>(&s, 0.3).unwrap();
        let u = convolve_kernel(&f, &green_polyharmonic(3, 1).unwrap()).unwrap();
        let scale = u.max_abs();
        for i in 1..16 {
            for j in 1..16 {
                for k in 1..16 {
                    let v = u.get(&[i, j, k]);
                    assert!((v - u.get(&[j, k, i])).abs() < 1e-12 * scale);
                    assert!((v - u.get(&[16 - i, j, k])).abs() < 1e-12 * scale);
                }
            }
        }
    }

    fn spectral_gap(u: &RealField<f64>, v: &RealField<f64>) -> f64 {
        half_box_gap(u, v).unwrap()
    }

    #[test]
    fn convolution_matches_spectral_inverse_n3() {
        let s = GridSpec::new(3, 24, 1.0).unwrap();
        let f = mollified_delta::<f64>(&s, 0.4).unwrap();
        let conv = convolve_kernel(&f, &green_polyharmonic(3, 1).unwrap()).unwrap();
        let spec = laplacian_power_invert(&f, 1).unwrap();
        assert!(spectral_gap(&spec, &conv) < 0.05);

        let conv1 = convolve_kernel(&f, &green_lambda(1, 3).unwrap()).unwrap();
        let spec1 = lambda_invert(&f, 1).unwrap();
        assert!(spectral_gap(&spec1, &conv1) < 0.05);

        // log case of Λ^{-3}: checks the sign and inversion of C_3
        let conv3 = convolve_kernel(&f, &green_lambda(3, 3).unwrap()).unwrap();
        let spec3 = lambda_invert(&f, 3).unwrap();
        assert!(spectral_gap(&spec3, &conv3) < 0.05);
    }

    #[test]
    fn one_dimensional_log_constant() {
        // a field of x₀ alone on a 2-D grid sees Λ as the 1-D operator
        let s = GridSpec::new(2, 512, 16.0).unwrap();
        let h = s.spacing();
        let a2 = 0.25;
        // second difference of (1 - x²/a²)^4: no monopole or dipole moment
        let bump = |x: f64| (1.0 - x * x / a2).max(0.0).powi(4);
        let profile = |x: f64| (bump(x + h) - 2.0 * bump(x) + bump(x - h)) / (h * h);
        let f = sample(&s, |x: &[f64]| profile(x[0])).unwrap();
        let spec = lambda_invert(&f, 1).unwrap();
        let c1 = lambda_log_constant(1);
        // in 1-D the floored node is too crude; log(h/2π) is the lattice-corrected weight
        let n = s.points();
        let xs: Vec<f64> = (0..n).map(|i| s.coordinate(i)).collect();
        let direct: Vec<f64> = xs
            .iter()
            .map(|&x| {
                xs.iter()
                    .map(|&y| {
                        let d = (x - y).abs();
                        let k = if d == 0.0 { (h / (2.0 * PI)).ln() } else { d.ln() };
                        c1 * k * profile(y) * h
                    })
                    .sum()
            })
            .collect();
        let lo = 3 * n / 8;
        let hi = 5 * n / 8;
        let ms = (lo..hi).map(|i| spec.get(&[i, 0])).sum::<f64>() / (hi - lo) as f64;
        let md = direct[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in lo..hi {
            num += (spec.get(&[i, 0]) - ms - direct[i] + md).powi(2);
            den += (direct[i] - md).powi(2);
        }
        assert!((num / den).sqrt() < 0.02, "{}", (num / den).sqrt());
    }

    #[test]
    fn newtonian_potential_bound_is_dilation_stable() {
        let s = GridSpec::new(3, 32, 1.0).unwrap();
        let g = green_polyharmonic(3, 1).unwrap();
        let (p, q) = (1.2, 6.0);
        let ratio = |a: f64| {
            let f = mollified_delta::<f64>(&s, a).unwrap();
            let u = convolve_kernel(&f, &g).unwrap();
            crate::analysis::lp_norm(&u, q).unwrap() / crate::analysis::lp_norm(&f, p).unwrap()
        };
        let r1 = ratio(0.2);
        let r2 = ratio(0.4);
        assert!(rel(r1, r2) < 0.1, "{r1} {r2}");
    }
}
