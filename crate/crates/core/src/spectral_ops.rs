//! Fourier-multiplier operators: polyharmonic powers, `Λ = (-Δ)^{1/2}` and its
//! powers, Riesz transforms, derivatives and homogeneous Sobolev seminorms.
//!
//! Zero-mode policy: every symbol vanishes at `ξ = 0`, and the inverse
//! multipliers refuse input whose mean is not negligible.
//!
//! Nyquist policy: on the planes `κ_j = -n/2` a symbol that is odd in `ξ_j`
//! (first derivatives, Riesz transforms) is set to zero, which is the value
//! the sampled trigonometric interpolant gives and keeps outputs real.
//! Identities that pair an odd symbol with an even one (e.g. `Σ R_j²` against
//! `-π²`) therefore hold exactly for fields without Nyquist content, which is
//! what [`crate::grid::random_band_limited`] produces.

use std::f64::consts::PI;

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::grid::{forward_transform, inverse_unchecked, GridSpec, RealField, SpectralField, MAX_DIM};
use crate::scalar::Scalar;

/// Highest derivative order accepted by [`MultiIndex`].
pub const MAX_ORDER: usize = 2 * MAX_DIM;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(components: Vec<usize>) -> Result<Self> {
        let order: usize = components.iter().sum();
        if components.is_empty() || components.len() > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "multi-index needs 1..={MAX_DIM} components"
            )));
        }
        if order > MAX_ORDER {
            return Err(Error::InvalidArgument(format!(
                "multi-index order {order} exceeds {MAX_ORDER}"
            )));
        }
        Ok(Self(components))
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    /// Unit index `e_axis` in `dim` dimensions.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut c = vec![0; dim];
        c[axis] = 1;
        Self(c)
    }

    /// Build from a list of axes, e.g. `[0, 0, 2]` is `∂₀∂₀∂₂`.
    pub fn from_axes(dim: usize, axes: &[usize]) -> Result<Self> {
        let mut c = vec![0; dim];
        for &a in axes {
            if a >= dim {
                return Err(Error::InvalidArgument(format!("axis {a} >= dimension {dim}")));
            }
            c[a] += 1;
        }
        Self::new(c)
    }

    pub fn components(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.0.len() == dim {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "multi-index has {} components on a {dim}-dimensional grid",
                self.0.len()
            )))
        }
    }
}

/// Per-axis physical angular frequencies `2π ξ` and Nyquist flags.
pub(crate) struct FrequencyTable<T> {
    pub omega: Vec<T>,
    pub nyquist: Vec<bool>,
}

impl<T: Scalar> FrequencyTable<T> {
    pub fn new(spec: &GridSpec) -> Self {
        let n = spec.points();
        let omega = (0..n)
            .map(|k| T::of(2.0 * PI * spec.frequency(spec.wavenumber(k))))
            .collect();
        let nyquist = (0..n).map(|k| spec.wavenumber(k) == spec.nyquist()).collect();
        Self { omega, nyquist }
    }
}

/// Apply a real-output symbol to a spectrum in place.
pub(crate) fn apply_in_place<T: Scalar>(
    spectrum: &mut SpectralField<T>,
    mut symbol: impl FnMut(&[usize], &FrequencyTable<T>) -> Complex<T>,
) {
    let spec = *spectrum.spec();
    let table = FrequencyTable::new(&spec);
    let coeffs = spectrum.coefficients_mut();
    spec.for_each_index(|flat, idx| {
        coeffs[flat] = coeffs[flat] * symbol(idx, &table);
    });
}

fn multiply<T: Scalar>(
    u: &RealField<T>,
    op: &'static str,
    symbol: impl FnMut(&[usize], &FrequencyTable<T>) -> Complex<T>,
) -> Result<RealField<T>> {
    let mut spectrum = forward_transform(u);
    apply_in_place(&mut spectrum, symbol);
    inverse_unchecked(spectrum).0.check_finite(op)
}

#[inline]
fn omega_sq<T: Scalar>(idx: &[usize], table: &FrequencyTable<T>) -> T {
    idx.iter().fold(T::zero(), |acc, &k| acc + table.omega[k] * table.omega[k])
}

/// `(2π|ξ|)^s` with the value 0 at the origin. Even integer powers go through
/// `(4π²|ξ|²)^{s/2}` so that `Λ^{2m}` and `(-Δ)^m` agree bit for bit.
pub(crate) fn radial_power<T: Scalar>(w2: T, s: T) -> T {
    if w2 == T::zero() {
        return T::zero();
    }
    let two = T::of(2.0);
    let half = s / two;
    if half == half.round() {
        w2.powi(half.to_i32().unwrap_or(0))
    } else if s == s.round() {
        w2.powi((s / two).floor().to_i32().unwrap_or(0)) * w2.sqrt()
    } else {
        w2.powf(half)
    }
}

/// |mean| ≤ tol · rms, the zero-mode precondition of every inverse.
pub fn check_mean_zero<T: Scalar>(f: &RealField<T>) -> Result<()> {
    let mean = f.mean();
    let tol = T::of(T::ZERO_MODE_TOL);
    if mean.abs() > tol * f.rms() {
        return Err(Error::NonZeroMean {
            mean: mean.to_f64_lossy(),
            tol: T::ZERO_MODE_TOL,
        });
    }
    Ok(())
}

/// `(-Δ)^m u`, symbol `(4π²|ξ|²)^m`.
pub fn laplacian_power_apply<T: Scalar>(u: &RealField<T>, m: u32) -> Result<RealField<T>> {
    multiply(u, "laplacian_power_apply", |idx, t| {
        Complex::new(omega_sq(idx, t).powi(m as i32), T::zero())
    })
}

/// `(-Δ)^{-m} f` for mean-zero `f`; the output has zero mean.
pub fn laplacian_power_invert<T: Scalar>(f: &RealField<T>, m: u32) -> Result<RealField<T>> {
    check_mean_zero(f)?;
    multiply(f, "laplacian_power_invert", |idx, t| {
        let w2 = omega_sq(idx, t);
        let s = if w2 == T::zero() {
            T::zero()
        } else {
            w2.powi(m as i32).recip()
        };
        Complex::new(s, T::zero())
    })
}

/// `Λ^n u`, symbol `(2π|ξ|)^n`.
pub fn lambda_apply<T: Scalar>(u: &RealField<T>, n: u32) -> Result<RealField<T>> {
    lambda_power(u, T::of(n as f64))
}

/// `Λ^{-n} f` for mean-zero `f`.
pub fn lambda_invert<T: Scalar>(f: &RealField<T>, n: u32) -> Result<RealField<T>> {
    check_mean_zero(f)?;
    lambda_power(f, -T::of(n as f64))
}

/// `Λ^s u` for any real `s`; negative powers annihilate the zero mode
/// without checking the mean.
pub fn lambda_power<T: Scalar>(u: &RealField<T>, s: T) -> Result<RealField<T>> {
    multiply(u, "lambda_power", |idx, t| {
        Complex::new(radial_power(omega_sq(idx, t), s), T::zero())
    })
}

/// Riesz transform along `axis`, symbol `πi ξ_j / |ξ|`.
pub fn riesz<T: Scalar>(f: &RealField<T>, axis: usize) -> Result<RealField<T>> {
    if axis >= f.spec().dim() {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
    }
    multiply(f, "riesz", |idx, t| riesz_symbol(idx, t, axis))
}

fn riesz_symbol<T: Scalar>(idx: &[usize], t: &FrequencyTable<T>, axis: usize) -> Complex<T> {
    let w2 = omega_sq(idx, t);
    if w2 == T::zero() || t.nyquist[idx[axis]] {
        return Complex::zero();
    }
    Complex::new(T::zero(), T::PI() * t.omega[idx[axis]] / w2.sqrt())
}

/// Composite Riesz transform `R^α = Π_j R_j^{α_j}`.
pub fn riesz_multi<T: Scalar>(f: &RealField<T>, alpha: &MultiIndex) -> Result<RealField<T>> {
    alpha.check_dim(f.spec().dim())?;
    multiply(f, "riesz_multi", |idx, t| {
        let mut s = Complex::one();
        for (axis, &a) in alpha.components().iter().enumerate() {
            for _ in 0..a {
                s = s * riesz_symbol(idx, t, axis);
            }
        }
        s
    })
}

pub(crate) fn derivative_symbol<T: Scalar>(
    idx: &[usize],
    t: &FrequencyTable<T>,
    alpha: &[usize],
) -> Complex<T> {
    let mut s = Complex::one();
    for (axis, &a) in alpha.iter().enumerate() {
        if a == 0 {
            continue;
        }
        if a % 2 == 1 && t.nyquist[idx[axis]] {
            return Complex::zero();
        }
        let factor = Complex::new(T::zero(), t.omega[idx[axis]]);
        for _ in 0..a {
            s = s * factor;
        }
    }
    s
}

/// `∂^α u`, symbol `(2πiξ)^α`.
pub fn derivative<T: Scalar>(u: &RealField<T>, alpha: &MultiIndex) -> Result<RealField<T>> {
    alpha.check_dim(u.spec().dim())?;
    if alpha.order() == 0 {
        return Ok(u.clone());
    }
    multiply(u, "derivative", |idx, t| derivative_symbol(idx, t, alpha.components()))
}

/// Derivative of an already-transformed field, returned as a spectrum.
pub(crate) fn derivative_spectrum<T: Scalar>(
    spectrum: &SpectralField<T>,
    alpha: &[usize],
) -> SpectralField<T> {
    let mut out = spectrum.clone();
    apply_in_place(&mut out, |idx, t| derivative_symbol(idx, t, alpha));
    out
}

/// Gradient components `∂_j u`.
pub fn gradient<T: Scalar>(u: &RealField<T>) -> Result<Vec<RealField<T>>> {
    let dim = u.spec().dim();
    let spectrum = forward_transform(u);
    let spectra: Vec<_> = (0..dim)
        .map(|j| derivative_spectrum(&spectrum, MultiIndex::unit(dim, j).components()))
        .collect();
    Ok(crate::grid::inverse_many(&spectra))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationReport<T> {
    pub median_ratio: T,
    pub max_deviation: T,
    /// Points where `R^α f` was large enough to divide by.
    pub points_used: usize,
}

/// Empirical constant in `∂^α Λ^{-n} f = A · R^α f`.
pub fn riesz_factorization_check<T: Scalar>(
    f: &RealField<T>,
    n: u32,
    alpha: &MultiIndex,
) -> Result<FactorizationReport<T>> {
    let dim = f.spec().dim();
    if n == 0 || n as usize > dim {
        return Err(Error::InadmissibleOrder(format!("need 0 < n <= N, got n={n}, N={dim}")));
    }
    if alpha.order() != n as usize {
        return Err(Error::InvalidArgument(format!(
            "|alpha| = {} must equal n = {n}",
            alpha.order()
        )));
    }
    let u = lambda_invert(f, n)?;
    let lhs = derivative(&u, alpha)?;
    let rhs = riesz_multi(f, alpha)?;
    let scale = rhs.max_abs();
    if scale <= T::min_positive_value().sqrt() * f.max_abs().max(T::one()) {
        return Err(Error::DegenerateRatio);
    }
    let floor = scale * T::of(1e-6);
    let mut ratios: Vec<T> = lhs
        .values()
        .iter()
        .zip(rhs.values())
        .filter(|(_, &r)| r.abs() > floor)
        .map(|(&l, &r)| l / r)
        .collect();
    if ratios.is_empty() {
        return Err(Error::DegenerateRatio);
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
    let mid = ratios.len() / 2;
    let median = if ratios.len() % 2 == 1 {
        ratios[mid]
    } else {
        (ratios[mid - 1] + ratios[mid]) / T::of(2.0)
    };
    let max_deviation = ratios
        .iter()
        .fold(T::zero(), |acc, &r| acc.max((r - median).abs()));
    Ok(FactorizationReport {
        median_ratio: median,
        max_deviation,
        points_used: ratios.len(),
    })
}

/// Homogeneous seminorm `‖Λ^s u‖_p` with Riemann-sum quadrature.
pub fn sobolev_seminorm<T: Scalar>(u: &RealField<T>, s: T, p: T) -> Result<T> {
    if s < T::zero() {
        return Err(Error::InvalidArgument(format!("order s={s} must be >= 0")));
    }
    if s == T::zero() {
        return crate::analysis::lp_norm(u, p);
    }
    crate::analysis::lp_norm(&lambda_power(u, s)?, p)
}
