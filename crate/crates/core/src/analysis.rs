//! Norm estimators: `L^p`, weak `L¹`, BMO/VMO by cube sampling, the Hardy
//! maximal function, H¹ atoms, Poincaré ratios and atom decay.
//!
//! Cubes live on the periodic box: a cube is a corner node plus a side
//! measured in cells, and its points are gathered with periodic index
//! arithmetic, so sampling commutes exactly with whole-cell shifts.
//!
//! The Hardy test function is `Φ(x) = c_N (1 - |x|²)²` on `|x| ≤ 1`, with
//! `Φ_s(x) = s^{-N} Φ(x/s)`. On the grid each `Φ_s` is renormalized to unit
//! discrete mass, so at `s = h` it is the discrete delta and `Mf ≥ |f|`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{circular_convolution, sample_displacement, GridSpec, RealField, MAX_DIM};
use crate::scalar::Scalar;
use crate::spectral_ops::{gradient, lambda_invert, lambda_power};

/// Riemann-sum `‖f‖_p`; `p = ∞` is the grid maximum.
pub fn lp_norm<T: Scalar>(f: &RealField<T>, p: T) -> Result<T> {
    if !(p >= T::one()) {
        return Err(Error::BadP(p.to_f64_lossy()));
    }
    let top = f.max_abs();
    if p.is_infinite() || top == T::zero() {
        return Ok(top);
    }
    let cell = T::of(f.spec().cell_volume());
    let sum = f
        .values()
        .iter()
        .fold(T::zero(), |acc, &v| acc + (v.abs() / top).powf(p));
    Ok(top * (sum * cell).powf(p.recip()))
}

/// `sup_λ λ·|{|f| > λ}|`, attained just below a sample value.
pub fn weak_l1_quasinorm<T: Scalar>(f: &RealField<T>) -> T {
    let mut v: Vec<T> = f.values().iter().map(|x| x.abs()).collect();
    v.sort_by(|a, b| b.partial_cmp(a).expect("finite field"));
    let cell = T::of(f.spec().cell_volume());
    v.iter()
        .enumerate()
        .fold(T::zero(), |acc, (i, &x)| acc.max(x * T::of_usize(i + 1)))
        * cell
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeSample {
    spec: GridSpec,
    corner: Vec<usize>,
    side_cells: usize,
}

impl CubeSample {
    /// Cube of `side_cells` nodes per axis starting at node `corner`,
    /// wrapping periodically.
    pub fn new(spec: &GridSpec, corner: Vec<usize>, side_cells: usize) -> Result<Self> {
        if side_cells < 2 {
            return Err(Error::CubeTooSmall { side: side_cells });
        }
        if side_cells > spec.points() {
            return Err(Error::InvalidCube(format!(
                "side {side_cells} exceeds {} points",
                spec.points()
            )));
        }
        if corner.len() != spec.dim() || corner.iter().any(|&c| c >= spec.points()) {
            return Err(Error::InvalidCube(format!("corner {corner:?} outside the grid")));
        }
        Ok(Self {
            spec: *spec,
            corner,
            side_cells,
        })
    }

    /// Cube whose center is the origin (up to half a cell for odd sides).
    pub fn centered(spec: &GridSpec, side_cells: usize) -> Result<Self> {
        let c = (spec.points() / 2).saturating_sub(side_cells / 2);
        Self::new(spec, vec![c; spec.dim()], side_cells)
    }

    pub fn corner(&self) -> &[usize] {
        &self.corner
    }

    pub fn side_cells(&self) -> usize {
        self.side_cells
    }

    pub fn side(&self) -> f64 {
        self.side_cells as f64 * self.spec.spacing()
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.spec.dim() as i32)
    }

    pub fn center(&self) -> Vec<f64> {
        let h = self.spec.spacing();
        let l = self.spec.half_length();
        self.corner
            .iter()
            .map(|&c| -l + h * (c as f64 + self.side_cells as f64 / 2.0))
            .collect()
    }

    pub fn contains(&self, index: &[usize]) -> bool {
        let n = self.spec.points();
        index
            .iter()
            .zip(&self.corner)
            .all(|(&i, &c)| (i + n - c) % n < self.side_cells)
    }

    /// Visit the flat index of every node in the cube.
    pub fn for_each_point(&self, mut visit: impl FnMut(usize)) {
        let dim = self.spec.dim();
        let n = self.spec.points();
        let s = self.side_cells;
        let mut local = [0usize; MAX_DIM];
        let total = s.pow(dim as u32);
        for _ in 0..total {
            let mut flat = 0;
            for j in 0..dim {
                flat = flat * n + (self.corner[j] + local[j]) % n;
            }
            visit(flat);
            for j in (0..dim).rev() {
                local[j] += 1;
                if local[j] < s {
                    break;
                }
                local[j] = 0;
            }
        }
    }

    pub fn point_count(&self) -> usize {
        self.side_cells.pow(self.spec.dim() as u32)
    }
}

/// Random cube family: dyadic sides `2, 4, …` up to `n/2` cells, cycled,
/// with corners drawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeSampler {
    pub count: usize,
}

impl Default for CubeSampler {
    fn default() -> Self {
        Self { count: 10_000 }
    }
}

impl CubeSampler {
    pub fn new(count: usize) -> Self {
        Self { count }
    }

    pub fn draw<R: Rng + ?Sized>(&self, spec: &GridSpec, rng: &mut R) -> Vec<CubeSample> {
        let sides = dyadic_sides(spec);
        let n = spec.points();
        (0..self.count)
            .map(|i| {
                let corner = (0..spec.dim()).map(|_| rng.gen_range(0..n)).collect();
                CubeSample::new(spec, corner, sides[i % sides.len()]).expect("valid cube")
            })
            .collect()
    }
}

fn dyadic_sides(spec: &GridSpec) -> Vec<usize> {
    let mut sides = Vec::new();
    let mut s = 2;
    while s <= spec.points() / 2 {
        sides.push(s);
        s *= 2;
    }
    sides
}

/// `(1/|Q|) ∫_Q |f - f_Q|` on the grid.
pub fn mean_oscillation<T: Scalar>(f: &RealField<T>, cube: &CubeSample) -> T {
    let values = f.values();
    let count = T::of_usize(cube.point_count());
    let mut sum = T::zero();
    cube.for_each_point(|i| sum = sum + values[i]);
    let mean = sum / count;
    let mut dev = T::zero();
    cube.for_each_point(|i| dev = dev + (values[i] - mean).abs());
    dev / count
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmoEstimate<T> {
    /// Largest mean oscillation seen, a lower bound for the seminorm.
    pub value: T,
    pub cubes: usize,
}

pub fn bmo_seminorm<T: Scalar>(f: &RealField<T>, cubes: &[CubeSample]) -> Result<BmoEstimate<T>> {
    let mut value = T::zero();
    for c in cubes {
        if c.spec != *f.spec() {
            return Err(Error::GridMismatch);
        }
        value = value.max(mean_oscillation(f, c));
    }
    Ok(BmoEstimate {
        value,
        cubes: cubes.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationLevel<T> {
    pub side: T,
    pub oscillation: T,
    pub cubes: usize,
}

/// Largest sampled mean oscillation per cube side, sides decreasing from
/// `n/2` to 2 cells.
pub fn vmo_profile<T: Scalar, R: Rng + ?Sized>(
    f: &RealField<T>,
    cubes_per_side: usize,
    rng: &mut R,
) -> Vec<OscillationLevel<T>> {
    let spec = *f.spec();
    let n = spec.points();
    let mut out = Vec::new();
    for &s in dyadic_sides(&spec).iter().rev() {
        let mut osc = T::zero();
        for _ in 0..cubes_per_side {
            let corner = (0..spec.dim()).map(|_| rng.gen_range(0..n)).collect();
            let cube = CubeSample::new(&spec, corner, s).expect("valid cube");
            osc = osc.max(mean_oscillation(f, &cube));
        }
        out.push(OscillationLevel {
            side: T::of(s as f64 * spec.spacing()),
            oscillation: osc,
            cubes: cubes_per_side,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball<T> {
    pub center: Vec<T>,
    pub radius: T,
}

/// `|B|^{-1/N} ‖f - f_B‖_{L^N(B)} / ‖∇f‖_{L^N(B)}`, the dilation-invariant
/// form of the critical Poincaré inequality. The ball must lie inside the box.
pub fn poincare_ratio<T: Scalar>(f: &RealField<T>, ball: &Ball<T>) -> Result<T> {
    let spec = *f.spec();
    let dim = spec.dim();
    let l = T::of(spec.half_length());
    if ball.center.len() != dim
        || !(ball.radius > T::zero())
        || ball.center.iter().any(|&c| c.abs() + ball.radius > l)
    {
        return Err(Error::InvalidArgument("ball must lie inside the box".into()));
    }
    let mut inside = Vec::new();
    let r2 = ball.radius * ball.radius;
    spec.for_each_position::<T>(|flat, x| {
        let d2 = x
            .iter()
            .zip(&ball.center)
            .fold(T::zero(), |acc, (&a, &c)| acc + (a - c) * (a - c));
        if d2 <= r2 {
            inside.push(flat);
        }
    });
    if inside.is_empty() {
        return Err(Error::EmptyBall);
    }
    let p = T::of_usize(dim);
    let v = f.values();
    let count = T::of_usize(inside.len());
    let mean = inside.iter().fold(T::zero(), |acc, &i| acc + v[i]) / count;
    let num = (inside
        .iter()
        .fold(T::zero(), |acc, &i| acc + (v[i] - mean).abs().powf(p))
        / count)
        .powf(p.recip());
    if num <= T::epsilon() * T::of(16.0) * f.max_abs() {
        return Ok(T::zero());
    }
    let grad = gradient(f)?;
    let cell = T::of(spec.cell_volume());
    let den = (inside.iter().fold(T::zero(), |acc, &i| {
        let g2 = grad.iter().fold(T::zero(), |a, g| a + g.values()[i] * g.values()[i]);
        acc + g2.sqrt().powf(p)
    }) * cell)
        .powf(p.recip());
    if den == T::zero() {
        return Ok(T::infinity());
    }
    Ok(num / den)
}

/// Scales `h·2^j ≤ L`.
pub fn dyadic_scales<T: Scalar>(spec: &GridSpec) -> Vec<T> {
    let mut out = Vec::new();
    let mut s = spec.spacing();
    while s <= spec.half_length() * (1.0 + 1e-12) {
        out.push(T::of(s));
        s *= 2.0;
    }
    out
}

/// `Φ_s` sampled by displacement and normalized to unit grid mass.
pub fn hardy_kernel<T: Scalar>(spec: &GridSpec, s: T) -> Result<RealField<T>> {
    if !(s > T::zero()) {
        return Err(Error::InvalidArgument(format!("scale {s} must be positive")));
    }
    let raw = sample_displacement(spec, |x: &[T]| {
        let t = x.iter().fold(T::zero(), |acc, &v| acc + v * v) / (s * s);
        if t < T::one() {
            (T::one() - t) * (T::one() - t)
        } else {
            T::zero()
        }
    })?;
    let mass = raw.sum() * T::of(spec.cell_volume());
    Ok(raw.scale(mass.recip()))
}

/// `Mf(x) = max_s |Φ_s ∗ f(x)|` over the given scales.
pub fn hardy_maximal<T: Scalar>(f: &RealField<T>, scales: &[T]) -> Result<RealField<T>> {
    let mut out = RealField::zeros(*f.spec());
    for &s in scales {
        let k = hardy_kernel(f.spec(), s)?;
        let conv = circular_convolution(f, &k)?;
        out = out.zip_map(&conv, |m, c| m.max(c.abs()))?;
    }
    Ok(out)
}

/// `‖Mf‖₁` over [`dyadic_scales`].
pub fn h1_norm<T: Scalar>(f: &RealField<T>) -> Result<T> {
    let m = hardy_maximal(f, &dyadic_scales(f.spec()))?;
    lp_norm(&m, T::one())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomPattern {
    /// `+|Q|^{-1}` on the lower half-slabs along axis 0, `-|Q|^{-1}` on the
    /// upper ones; the middle slab of an odd side is zero.
    Dipole,
    /// Alternating signs; with an odd side the corner node is zeroed.
    Checker,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom<T> {
    field: RealField<T>,
    cube: CubeSample,
}

impl<T: Scalar> Atom<T> {
    /// Validate support, sup bound, mean zero and nontriviality.
    pub fn new(field: RealField<T>, cube: CubeSample) -> Result<Self> {
        if cube.spec != *field.spec() {
            return Err(Error::GridMismatch);
        }
        let bound = T::of(1.0 / cube.volume());
        let mut outside = false;
        let mut over = false;
        let mut nonzero = false;
        let mut sum = T::zero();
        let tol = bound * T::of(1e-12);
        field.spec().for_each_index(|flat, idx| {
            let v = field.values()[flat];
            if cube.contains(idx) {
                sum = sum + v;
                over |= v.abs() > bound + tol;
                nonzero |= v != T::zero();
            } else {
                outside |= v != T::zero();
            }
        });
        if outside {
            return Err(Error::InvalidAtom("nonzero values outside the cube".into()));
        }
        if over {
            return Err(Error::InvalidAtom("sup exceeds 1/|Q|".into()));
        }
        if !nonzero {
            return Err(Error::InvalidAtom("zero field".into()));
        }
        let integral = sum * T::of(field.spec().cell_volume());
        if integral.abs() > T::of(1e-12) {
            return Err(Error::InvalidAtom(format!("integral {integral} is not zero")));
        }
        Ok(Self { field, cube })
    }

    pub fn field(&self) -> &RealField<T> {
        &self.field
    }

    pub fn cube(&self) -> &CubeSample {
        &self.cube
    }
}

pub fn make_atom<T: Scalar>(cube: &CubeSample, pattern: AtomPattern) -> Result<Atom<T>> {
    let spec = cube.spec;
    let n = spec.points();
    let s = cube.side_cells;
    let a = T::of(1.0 / cube.volume());
    let half = s / 2;
    let mut values = vec![T::zero(); spec.len()];
    spec.for_each_index(|flat, idx| {
        if !cube.contains(idx) {
            return;
        }
        let local: Vec<usize> = idx
            .iter()
            .zip(&cube.corner)
            .map(|(&i, &c)| (i + n - c) % n)
            .collect();
        values[flat] = match pattern {
            AtomPattern::Dipole => {
                if local[0] < half {
                    a
                } else if local[0] < 2 * half {
                    -a
                } else {
                    T::zero()
                }
            }
            AtomPattern::Checker => {
                if s % 2 == 1 && local.iter().all(|&c| c == 0) {
                    T::zero()
                } else if local.iter().sum::<usize>() % 2 == 0 {
                    a
                } else {
                    -a
                }
            }
        };
    });
    Atom::new(RealField::from_vec_unchecked(spec, values), cube.clone())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellConstant<T> {
    pub inner: T,
    pub outer: T,
    /// `max |u(x)|·(ℓ + |x - c|)/ℓ` over the shell.
    pub constant: T,
}

/// Shell constants of `u` around `center` for cube side `ell`, on
/// `shells` equal-width shells covering `[r_min, r_max]`. Distances are
/// periodic.
pub fn shell_constants<T: Scalar>(
    u: &RealField<T>,
    center: &[T],
    ell: T,
    r_min: T,
    r_max: T,
    shells: usize,
) -> Result<Vec<ShellConstant<T>>> {
    if !(r_max > r_min) || shells == 0 {
        return Err(Error::InvalidArgument(format!(
            "empty shell range [{r_min}, {r_max}]"
        )));
    }
    let spec = *u.spec();
    let period = T::of(2.0 * spec.half_length());
    let width = (r_max - r_min) / T::of_usize(shells);
    let mut out: Vec<ShellConstant<T>> = (0..shells)
        .map(|i| ShellConstant {
            inner: r_min + width * T::of_usize(i),
            outer: r_min + width * T::of_usize(i + 1),
            constant: T::zero(),
        })
        .collect();
    spec.for_each_position::<T>(|flat, x| {
        let r = x
            .iter()
            .zip(center)
            .fold(T::zero(), |acc, (&a, &c)| {
                let mut d = (a - c).abs() % period;
                if d > period / T::of(2.0) {
                    d = period - d;
                }
                acc + d * d
            })
            .sqrt();
        if r < r_min || r > r_max {
            return;
        }
        let i = (((r - r_min) / width).to_usize().unwrap_or(0)).min(shells - 1);
        let c = u.values()[flat].abs() * (ell + r) / ell;
        if c > out[i].constant {
            out[i].constant = c;
        }
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport<T> {
    pub shells: Vec<ShellConstant<T>>,
    pub first: T,
    pub max: T,
    /// Least-squares slope of `log constant` against `log radius`.
    pub slope: T,
    /// Trend-free: slope at most [`DECAY_SLOPE_TOL`] and no shell above
    /// twice the innermost one.
    pub pass: bool,
}

pub const DECAY_SHELLS: usize = 8;
pub const DECAY_SLOPE_TOL: f64 = 0.1;

impl<T: Scalar> DecayReport<T> {
    pub fn from_shells(shells: Vec<ShellConstant<T>>) -> Self {
        let first = shells[0].constant;
        let max = shells.iter().fold(T::zero(), |m, s| m.max(s.constant));
        let pts: Vec<(T, T)> = shells
            .iter()
            .filter(|s| s.constant > T::zero())
            .map(|s| (((s.inner + s.outer) / T::of(2.0)).ln(), s.constant.ln()))
            .collect();
        let slope = if pts.len() < 2 {
            T::zero()
        } else {
            let k = T::of_usize(pts.len());
            let mx = pts.iter().map(|p| p.0).sum::<T>() / k;
            let my = pts.iter().map(|p| p.1).sum::<T>() / k;
            let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<T>();
            let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<T>();
            sxy / sxx
        };
        let pass = max <= T::of(2.0) * first && slope <= T::of(DECAY_SLOPE_TOL);
        Self {
            shells,
            first,
            max,
            slope,
            pass,
        }
    }
}

/// `u - u(c + (L, …, L))`: the potential normalized to vanish at the node
/// farthest from `center_index` on the torus.
fn normalize_far<T: Scalar>(u: RealField<T>, center_index: &[usize]) -> RealField<T> {
    let n = u.spec().points();
    let far: Vec<usize> = center_index.iter().map(|&c| (c + n / 2) % n).collect();
    let v = u.get(&far);
    u.map(|x| x - v)
}

fn nearest_index(spec: &GridSpec, x: &[f64]) -> Vec<usize> {
    let h = spec.spacing();
    let l = spec.half_length();
    let n = spec.points() as i64;
    x.iter()
        .map(|&c| (((c + l) / h).round() as i64).rem_euclid(n) as usize)
        .collect()
}

/// Shell constants of `Λ^{-N} a`, normalized to vanish at the far node, on
/// `|x - c| ∈ [2√N ℓ, L/2]`.
pub fn atom_decay_check<T: Scalar>(a: &Atom<T>) -> Result<DecayReport<T>> {
    let spec = *a.field.spec();
    let dim = spec.dim();
    let ell = a.cube.side();
    let l = spec.half_length();
    if ell > l / 4.0 {
        return Err(Error::InvalidArgument(format!("cube side {ell} exceeds L/4")));
    }
    let center = a.cube.center();
    let u = normalize_far(lambda_invert(&a.field, dim as u32)?, &nearest_index(&spec, &center));
    let center: Vec<T> = center.into_iter().map(T::of).collect();
    let r_min = 2.0 * (dim as f64).sqrt() * ell;
    let shells = shell_constants(&u, &center, T::of(ell), T::of(r_min), T::of(l / 2.0), DECAY_SHELLS)?;
    Ok(DecayReport::from_shells(shells))
}

/// Same report for an arbitrary source; its zero mode is dropped silently.
pub fn source_decay_profile<T: Scalar>(
    f: &RealField<T>,
    center: &[f64],
    ell: f64,
) -> Result<DecayReport<T>> {
    let spec = *f.spec();
    let dim = spec.dim();
    let u = normalize_far(lambda_power(f, -T::of_usize(dim))?, &nearest_index(&spec, center));
    let c: Vec<T> = center.iter().map(|&v| T::of(v)).collect();
    let r_min = 2.0 * (dim as f64).sqrt() * ell;
    let shells = shell_constants(
        &u,
        &c,
        T::of(ell),
        T::of(r_min),
        T::of(spec.half_length() / 2.0),
        DECAY_SHELLS,
    )?;
    Ok(DecayReport::from_shells(shells))
}

/// `bmo(Λ^{-1} f) / ‖f‖_N` on a fixed cube sample.
pub fn bmo_boundedness_check<T: Scalar>(f: &RealField<T>, cubes: &[CubeSample]) -> Result<T> {
    let dim = f.spec().dim();
    let norm = lp_norm(f, T::of_usize(dim))?;
    if norm == T::zero() {
        return Ok(T::zero());
    }
    let u = lambda_invert(f, 1)?;
    Ok(bmo_seminorm(&u, cubes)?.value / norm)
}
