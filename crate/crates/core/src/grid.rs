//! Periodic-box discretization of ℝ^N and the discrete Fourier transform.
//!
//! Layout: values are stored row-major with axis 0 varying slowest, i.e. the
//! flat index of the multi-index `(i_0, …, i_{N-1})` is
//! `Σ_j i_j · n^(N-1-j)`. Node `i` along an axis sits at `x = -L + h·i`.
//!
//! Spectral coefficients use the same layout over FFT ordering: array index
//! `k` along an axis holds the integer frequency `κ = k` for `k < n/2` and
//! `κ = k - n` otherwise, so `κ ∈ [-n/2, n/2)`. The physical frequency is
//! `ξ = κ / (2L)`.
//!
//! The forward transform is normalized so that the zero mode equals the grid
//! mean and the coefficients are the physical Fourier coefficients of the box,
//! `f(x) = Σ_κ F(κ) e^{2πi ξ·x}`.

use num_complex::Complex;
use num_rational::Ratio;
use num_traits::Zero;
use rand::Rng;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_DIM: usize = 6;
pub const MIN_POINTS: usize = 8;

/// Number of lines gathered per strided FFT pass.
const LINE_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    points: usize,
    half_length: f64,
}

impl GridSpec {
    pub fn new(dim: usize, points: usize, half_length: f64) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension {dim} outside 2..={MAX_DIM}"
            )));
        }
        if points < MIN_POINTS || points % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= {MIN_POINTS}, got {points}"
            )));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half length must be positive, got {half_length}"
            )));
        }
        let total = (0..dim).try_fold(1usize, |acc, _| acc.checked_mul(points));
        match total {
            // complex buffers hold 2 scalars per point; keep byte counts addressable
            Some(t) if t.checked_mul(64).is_some() => {}
            _ => {
                return Err(Error::InvalidGrid(format!(
                    "{points}^{dim} points overflow the index range"
                )))
            }
        }
        Ok(Self {
            dim,
            points,
            half_length,
        })
    }

    /// Same box, different lattice size.
    pub fn with_points(&self, points: usize) -> Result<Self> {
        Self::new(self.dim, points, self.half_length)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn points(&self) -> usize {
        self.points
    }

    #[inline]
    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// Grid spacing `h = 2L / n`.
    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    /// Total number of nodes `n^N`.
    #[inline]
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^N`, the quadrature weight of one node.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// `(2L)^N`.
    #[inline]
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_length).powi(self.dim as i32)
    }

    #[inline]
    pub fn coordinate(&self, index: usize) -> f64 {
        -self.half_length + self.spacing() * index as f64
    }

    /// Integer frequency stored at array index `k`.
    #[inline]
    pub fn wavenumber(&self, k: usize) -> i64 {
        let n = self.points as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Array index holding integer frequency `kappa` (taken modulo n).
    #[inline]
    pub fn wavenumber_index(&self, kappa: i64) -> usize {
        kappa.rem_euclid(self.points as i64) as usize
    }

    /// Physical frequency `ξ = κ / (2L)`.
    #[inline]
    pub fn frequency(&self, kappa: i64) -> f64 {
        kappa as f64 / (2.0 * self.half_length)
    }

    #[inline]
    pub fn nyquist(&self) -> i64 {
        -(self.points as i64) / 2
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.dim - 1 - axis) as u32)
    }

    pub fn ravel(&self, index: &[usize]) -> usize {
        index
            .iter()
            .fold(0usize, |acc, &i| acc * self.points + i)
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for j in (0..self.dim).rev() {
            out[j] = flat % self.points;
            flat /= self.points;
        }
    }

    /// Visit every node in storage order with its multi-index.
    pub fn for_each_index(&self, mut visit: impl FnMut(usize, &[usize])) {
        let mut idx = [0usize; MAX_DIM];
        let dim = self.dim;
        for flat in 0..self.len() {
            visit(flat, &idx[..dim]);
            for j in (0..dim).rev() {
                idx[j] += 1;
                if idx[j] < self.points {
                    break;
                }
                idx[j] = 0;
            }
        }
    }

    /// Visit every spectral slot in storage order with its integer frequency.
    pub fn for_each_mode(&self, mut visit: impl FnMut(usize, &[i64])) {
        let mut kappa = [0i64; MAX_DIM];
        let dim = self.dim;
        self.for_each_index(|flat, idx| {
            for j in 0..dim {
                kappa[j] = self.wavenumber(idx[j]);
            }
            visit(flat, &kappa[..dim]);
        });
    }

    /// Visit every node with its physical position.
    pub fn for_each_position<T: Scalar>(&self, mut visit: impl FnMut(usize, &[T])) {
        let coords: Vec<T> = (0..self.points)
            .map(|i| T::of(self.coordinate(i)))
            .collect();
        let mut x = [T::zero(); MAX_DIM];
        let dim = self.dim;
        self.for_each_index(|flat, idx| {
            for j in 0..dim {
                x[j] = coords[idx[j]];
            }
            visit(flat, &x[..dim]);
        });
    }
}

/// Real samples on the nodes of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct RealField<T> {
    spec: GridSpec,
    values: Vec<T>,
}

impl<T: Scalar> RealField<T> {
    pub fn new(spec: GridSpec, values: Vec<T>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                spec.len(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(Self { spec, values })
    }

    pub(crate) fn from_vec_unchecked(spec: GridSpec, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, values }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            values: vec![T::zero(); spec.len()],
        }
    }

    pub fn constant(spec: GridSpec, c: T) -> Self {
        Self {
            spec,
            values: vec![c; spec.len()],
        }
    }

    #[inline]
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, index: &[usize]) -> T {
        self.values[self.spec.ravel(index)]
    }

    pub fn mean(&self) -> T {
        self.sum() / T::of_usize(self.values.len())
    }

    /// Plain left-to-right sum; the fixed order keeps outputs bit-stable.
    pub fn sum(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    /// Grid integral `Σ f h^N`.
    pub fn integral(&self) -> T {
        self.sum() * T::of(self.spec.cell_volume())
    }

    pub fn rms(&self) -> T {
        let s = self.values.iter().fold(T::zero(), |acc, &v| acc + v * v);
        (s / T::of_usize(self.values.len())).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, &v| if v.abs() > acc { v.abs() } else { acc })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_finite(self, op: &'static str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(op))
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: T, other: &Self, b: T) -> Result<Self> {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    /// Subtract the grid mean.
    pub fn demean(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// Periodic translation by whole cells: `out(i) = self(i - shift)`.
    pub fn shift_cells(&self, shift: &[i64]) -> Self {
        let n = self.spec.points as i64;
        let mut out = vec![T::zero(); self.values.len()];
        let mut src = [0usize; MAX_DIM];
        let dim = self.spec.dim;
        self.spec.for_each_index(|flat, idx| {
            for j in 0..dim {
                src[j] = (idx[j] as i64 - shift[j]).rem_euclid(n) as usize;
            }
            out[flat] = self.values[self.spec.ravel(&src[..dim])];
        });
        Self::from_vec_unchecked(self.spec, out)
    }

    pub(crate) fn same_grid(&self, other: &Self) -> Result<()> {
        if self.spec == other.spec {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Complex Fourier coefficients indexed by integer frequency vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField<T> {
    spec: GridSpec,
    coeffs: Vec<Complex<T>>,
}

impl<T: Scalar> SpectralField<T> {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            coeffs: vec![Complex::zero(); spec.len()],
        }
    }

    pub fn from_coefficients(spec: GridSpec, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != spec.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} coefficients, got {}",
                spec.len(),
                coeffs.len()
            )));
        }
        Ok(Self { spec, coeffs })
    }

    #[inline]
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Coefficients in storage (FFT) order.
    #[inline]
    pub fn coefficients(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    #[inline]
    pub(crate) fn coefficients_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    fn flat_of(&self, kappa: &[i64]) -> usize {
        kappa
            .iter()
            .fold(0usize, |acc, &k| acc * self.spec.points + self.spec.wavenumber_index(k))
    }

    /// Coefficient at integer frequency `kappa` (components taken modulo n).
    pub fn coefficient(&self, kappa: &[i64]) -> Complex<T> {
        self.coeffs[self.flat_of(kappa)]
    }

    pub fn set_coefficient(&mut self, kappa: &[i64], value: Complex<T>) {
        let flat = self.flat_of(kappa);
        self.coeffs[flat] = value;
    }

    /// Largest `|F(-κ) - conj F(κ)|` over the lattice.
    pub fn hermitian_defect(&self) -> T {
        let mut worst = T::zero();
        let mut neg = [0i64; MAX_DIM];
        let dim = self.spec.dim;
        self.spec.for_each_mode(|flat, kappa| {
            for j in 0..dim {
                neg[j] = -kappa[j];
            }
            let d = (self.coefficient(&neg[..dim]) - self.coeffs[flat].conj()).norm();
            if d > worst {
                worst = d;
            }
        });
        worst
    }

    /// Multiply every coefficient by `symbol(κ)`.
    pub fn apply_symbol(&mut self, mut symbol: impl FnMut(&[i64]) -> Complex<T>) {
        let spec = self.spec;
        let coeffs = &mut self.coeffs;
        spec.for_each_mode(|flat, kappa| {
            coeffs[flat] = coeffs[flat] * symbol(kappa);
        });
    }

    pub fn l1_mass(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |acc, c| acc + c.norm())
    }
}

fn fft_nd<T: Scalar>(data: &mut [Complex<T>], spec: &GridSpec, direction: FftDirection) {
    let n = spec.points;
    let total = data.len();
    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft(n, direction);
    let mut scratch = vec![Complex::zero(); fft.get_inplace_scratch_len()];

    // innermost axis is contiguous
    fft.process_with_scratch(data, &mut scratch);

    let mut lines = vec![Complex::zero(); n * LINE_BATCH];
    for axis in 0..spec.dim - 1 {
        let stride = spec.stride(axis);
        let block = stride * n;
        for start in (0..total).step_by(block) {
            let mut off = 0;
            while off < stride {
                let batch = LINE_BATCH.min(stride - off);
                let buf = &mut lines[..n * batch];
                for i in 0..n {
                    let row = start + i * stride + off;
                    for l in 0..batch {
                        buf[l * n + i] = data[row + l];
                    }
                }
                fft.process_with_scratch(buf, &mut scratch);
                for i in 0..n {
                    let row = start + i * stride + off;
                    for l in 0..batch {
                        data[row + l] = buf[l * n + i];
                    }
                }
                off += batch;
            }
        }
    }
}

/// Flip the sign of every coefficient with odd index sum; converts between
/// node-origin DFT coefficients and physical ones (the box starts at `-L`).
fn apply_parity<T: Scalar>(data: &mut [Complex<T>], spec: &GridSpec, scale: T) {
    let neg = -scale;
    spec.for_each_index(|flat, idx| {
        let odd = idx.iter().sum::<usize>() % 2 == 1;
        data[flat] = data[flat] * if odd { neg } else { scale };
    });
}

pub fn forward_transform<T: Scalar>(f: &RealField<T>) -> SpectralField<T> {
    let spec = f.spec;
    let mut data: Vec<Complex<T>> = f.values.iter().map(|&v| Complex::new(v, T::zero())).collect();
    fft_nd(&mut data, &spec, FftDirection::Forward);
    let scale = T::one() / T::of_usize(spec.len());
    apply_parity(&mut data, &spec, scale);
    SpectralField { spec, coeffs: data }
}

/// Forward transforms of two real fields through one complex FFT.
pub(crate) fn forward_pair<T: Scalar>(a: &RealField<T>, b: &RealField<T>) -> (SpectralField<T>, SpectralField<T>) {
    let spec = a.spec;
    debug_assert_eq!(spec, b.spec);
    let mut data: Vec<Complex<T>> = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| Complex::new(x, y))
        .collect();
    fft_nd(&mut data, &spec, FftDirection::Forward);
    apply_parity(&mut data, &spec, T::one() / T::of_usize(spec.len()));
    let n = spec.points;
    let half = T::of(0.5);
    let minus_half_i = Complex::new(T::zero(), -half);
    let mut fa = vec![Complex::zero(); data.len()];
    let mut fb = vec![Complex::zero(); data.len()];
    spec.for_each_index(|flat, idx| {
        let mirror = idx.iter().fold(0, |acc, &i| acc * n + (n - i) % n);
        let z = data[flat];
        let w = data[mirror].conj();
        fa[flat] = (z + w) * half;
        fb[flat] = (z - w) * minus_half_i;
    });
    (SpectralField { spec, coeffs: fa }, SpectralField { spec, coeffs: fb })
}

/// Forward-transform a batch of real fields, pairing them up.
pub(crate) fn forward_many<T: Scalar>(fields: &[&RealField<T>]) -> Vec<SpectralField<T>> {
    let mut out = Vec::with_capacity(fields.len());
    for chunk in fields.chunks(2) {
        match chunk {
            [a, b] => {
                let (x, y) = forward_pair(a, b);
                out.push(x);
                out.push(y);
            }
            [a] => out.push(forward_transform(a)),
            _ => unreachable!(),
        }
    }
    out
}

/// Inverse transform without the realness check; the caller guarantees a
/// Hermitian spectrum (e.g. a real field times a real-output symbol).
pub(crate) fn inverse_unchecked<T: Scalar>(f: SpectralField<T>) -> (RealField<T>, T) {
    let spec = f.spec;
    let mut data = f.coeffs;
    apply_parity(&mut data, &spec, T::one());
    fft_nd(&mut data, &spec, FftDirection::Inverse);
    let mut residue = T::zero();
    let values = data
        .iter()
        .map(|c| {
            if c.im.abs() > residue {
                residue = c.im.abs();
            }
            c.re
        })
        .collect();
    (RealField::from_vec_unchecked(spec, values), residue)
}

pub fn inverse_transform<T: Scalar>(f: &SpectralField<T>) -> Result<RealField<T>> {
    let mass = f.l1_mass();
    let (out, residue) = inverse_unchecked(f.clone());
    let tol = T::of(T::HERMITIAN_TOL) * mass;
    if residue > tol {
        return Err(Error::NonHermitianInput {
            residue: residue.to_f64_lossy(),
            tol: tol.to_f64_lossy(),
        });
    }
    out.check_finite("inverse_transform")
}

/// Inverse-transform two Hermitian spectra with one complex FFT.
pub(crate) fn inverse_pair<T: Scalar>(
    a: &SpectralField<T>,
    b: &SpectralField<T>,
) -> (RealField<T>, RealField<T>) {
    let spec = a.spec;
    debug_assert_eq!(spec, b.spec);
    let i = Complex::new(T::zero(), T::one());
    let mut data: Vec<Complex<T>> = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(&x, &y)| x + i * y)
        .collect();
    apply_parity(&mut data, &spec, T::one());
    fft_nd(&mut data, &spec, FftDirection::Inverse);
    let re = data.iter().map(|c| c.re).collect();
    let im = data.iter().map(|c| c.im).collect();
    (
        RealField::from_vec_unchecked(spec, re),
        RealField::from_vec_unchecked(spec, im),
    )
}

/// Inverse-transform a batch of Hermitian spectra, pairing them up.
pub(crate) fn inverse_many<T: Scalar>(spectra: &[SpectralField<T>]) -> Vec<RealField<T>> {
    let mut out = Vec::with_capacity(spectra.len());
    for chunk in spectra.chunks(2) {
        match chunk {
            [a, b] => {
                let (x, y) = inverse_pair(a, b);
                out.push(x);
                out.push(y);
            }
            [a] => out.push(inverse_unchecked(a.clone()).0),
            _ => unreachable!(),
        }
    }
    out
}

/// Periodic convolution `(K ⊛ f)(x) = Σ_y K(x - y) f(y) h^N`, where `kernel`
/// is indexed by displacement: node `i` along an axis holds the offset
/// `h·κ(i)` in FFT ordering (see [`sample_displacement`]).
pub fn circular_convolution<T: Scalar>(
    f: &RealField<T>,
    kernel: &RealField<T>,
) -> Result<RealField<T>> {
    f.same_grid(kernel)?;
    let spec = f.spec;
    let mut k: Vec<Complex<T>> = kernel.values.iter().map(|&v| Complex::new(v, T::zero())).collect();
    fft_nd(&mut k, &spec, FftDirection::Forward);
    let cell = T::of(spec.cell_volume());
    let mut spectrum = forward_transform(f);
    for (c, kk) in spectrum.coeffs.iter_mut().zip(&k) {
        *c = *c * *kk * cell;
    }
    inverse_unchecked(spectrum).0.check_finite("circular_convolution")
}

/// Evaluate `g` at the periodic displacements `h·κ`, `κ ∈ [-n/2, n/2)^N`,
/// stored in FFT ordering so index 0 is the zero offset.
pub fn sample_displacement<T: Scalar>(spec: &GridSpec, g: impl Fn(&[T]) -> T) -> Result<RealField<T>> {
    let h = spec.spacing();
    let dim = spec.dim;
    let mut values = vec![T::zero(); spec.len()];
    let mut x = [T::zero(); MAX_DIM];
    let mut bad = None;
    spec.for_each_mode(|flat, kappa| {
        for j in 0..dim {
            x[j] = T::of(h * kappa[j] as f64);
        }
        let v = g(&x[..dim]);
        if !v.is_finite() && bad.is_none() {
            bad = Some(flat);
        }
        values[flat] = v;
    });
    if let Some(index) = bad {
        return Err(Error::NonFiniteSample { index });
    }
    Ok(RealField::from_vec_unchecked(*spec, values))
}

/// Pointwise evaluation of `g` at the grid nodes.
pub fn sample<T: Scalar>(spec: &GridSpec, g: impl Fn(&[T]) -> T) -> Result<RealField<T>> {
    let mut values = vec![T::zero(); spec.len()];
    let mut bad = None;
    spec.for_each_position::<T>(|flat, x| {
        let v = g(x);
        if !v.is_finite() && bad.is_none() {
            bad = Some(flat);
        }
        values[flat] = v;
    });
    if let Some(index) = bad {
        return Err(Error::NonFiniteSample { index });
    }
    Ok(RealField::from_vec_unchecked(*spec, values))
}

fn scaled_points(factor: Ratio<usize>, points: usize, grow: bool) -> Result<usize> {
    let bad = || Error::BadFactor {
        factor: format!("{factor}"),
        points,
    };
    if *factor.denom() == 0 || factor < Ratio::from_integer(1) {
        return Err(bad());
    }
    let (num, den) = if grow {
        (*factor.numer(), *factor.denom())
    } else {
        (*factor.denom(), *factor.numer())
    };
    let scaled = points.checked_mul(num).ok_or_else(bad)?;
    if scaled % den != 0 || (scaled / den) % 2 != 0 {
        return Err(bad());
    }
    Ok(scaled / den)
}

/// Zero-fill the spectrum onto the lattice of `factor · n` points.
///
/// A Nyquist coefficient (`κ_j = -n/2`) is split evenly between `±n/2` on the
/// larger lattice so that the padded field stays real.
pub fn pad_spectrum<T: Scalar>(f: &SpectralField<T>, factor: Ratio<usize>) -> Result<SpectralField<T>> {
    let small = f.spec;
    let big_n = scaled_points(factor, small.points, true)?;
    if big_n == small.points {
        return Ok(f.clone());
    }
    let big = small.with_points(big_n)?;
    let mut out = SpectralField::zeros(big);
    let nyq = small.nyquist();
    let half = T::of(0.5);
    let dim = small.dim;
    let mut target = [0i64; MAX_DIM];
    small.for_each_mode(|flat, kappa| {
        let c = f.coeffs[flat];
        if c.is_zero() {
            return;
        }
        let split: Vec<usize> = (0..dim).filter(|&j| kappa[j] == nyq).collect();
        let weight = (0..split.len()).fold(T::one(), |w, _| w * half);
        for mask in 0..(1usize << split.len()) {
            target[..dim].copy_from_slice(kappa);
            for (b, &j) in split.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    target[j] = -nyq;
                }
            }
            let t = out.flat_of(&target[..dim]);
            out.coeffs[t] = out.coeffs[t] + c * weight;
        }
    });
    Ok(out)
}

/// Drop every frequency outside the lattice of `n / factor` points; the
/// `+n/2` slab folds onto `-n/2`, which is where sampling would alias it.
pub fn truncate_spectrum<T: Scalar>(
    f: &SpectralField<T>,
    factor: Ratio<usize>,
) -> Result<SpectralField<T>> {
    let big = f.spec;
    let small_n = scaled_points(factor, big.points, false)?;
    if small_n == big.points {
        return Ok(f.clone());
    }
    let small = big.with_points(small_n)?;
    let mut out = SpectralField::zeros(small);
    let half = (small_n / 2) as i64;
    big.for_each_mode(|flat, kappa| {
        if kappa.iter().all(|&k| -half <= k && k <= half) {
            let t = out.flat_of(kappa);
            out.coeffs[t] = out.coeffs[t] + f.coeffs[flat];
        }
    });
    Ok(out)
}

/// Random real field whose spectrum is supported on `0 < max_j |κ_j| ≤ cutoff`.
///
/// The zero mode is left empty, so the field has zero mean, and no mode
/// touches the Nyquist planes as long as `cutoff < n/2`.
pub fn random_band_limited<T: Scalar, R: Rng + ?Sized>(
    spec: &GridSpec,
    cutoff: usize,
    rng: &mut R,
) -> Result<RealField<T>> {
    if cutoff == 0 || cutoff as i64 >= spec.points as i64 / 2 {
        return Err(Error::InvalidArgument(format!(
            "band cutoff {cutoff} must lie in 1..{}",
            spec.points / 2
        )));
    }
    let mut out = SpectralField::zeros(*spec);
    let c = cutoff as i64;
    let dim = spec.dim;
    let half = T::of(0.5);
    let mut neg = [0i64; MAX_DIM];
    spec.for_each_mode(|_, kappa| {
        if kappa.iter().all(|&k| k.abs() <= c) && kappa.iter().any(|&k| k != 0) {
            let z = Complex::new(
                T::of(rng.gen_range(-1.0..1.0)),
                T::of(rng.gen_range(-1.0..1.0)),
            ) * half;
            for j in 0..dim {
                neg[j] = -kappa[j];
            }
            let a = out.flat_of(kappa);
            out.coeffs[a] = out.coeffs[a] + z;
            let b = out.flat_of(&neg[..dim]);
            out.coeffs[b] = out.coeffs[b] + z.conj();
        }
    });
    inverse_transform(&out)
}
