//! The k-Hessian `S_k[u] = σ_k(eigenvalues of D²u)`, its Newton tensor
//! `S_k^{ij} = ∂σ_k/∂a_{ij}`, and the divergence-form identities.
//!
//! Matrix-level routines work on `N ≤ 6` symmetric matrices stored as their
//! upper triangle. Field-level routines evaluate pointwise products on a
//! zero-padded lattice so that degree-k polynomials of band-limited inputs
//! are computed without aliasing.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::grid::{
    forward_many, forward_transform, inverse_many, inverse_unchecked, pad_spectrum, truncate_spectrum, GridSpec,
    RealField, SpectralField, MAX_DIM,
};
use crate::scalar::Scalar;
use crate::spectral_ops::derivative_spectrum;

const TRI: usize = MAX_DIM * (MAX_DIM + 1) / 2;

/// Position of `(i, j)`, `i ≤ j`, in the packed upper triangle.
#[inline]
pub fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    tri(dim, i, j)
}

/// Symmetric `N × N` matrix stored as its upper triangle, row by row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix<T> {
    dim: usize,
    data: [T; TRI],
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "matrix dimension {dim} out of range");
        Self {
            dim,
            data: [T::zero(); TRI],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, T::one());
        }
        m
    }

    /// From a row-major dense matrix; only the upper triangle is read.
    pub fn from_dense(dim: usize, dense: &[T]) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, dense[i * dim + j]);
            }
        }
        m
    }

    pub fn diagonal(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[tri(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[tri(self.dim, i, j)] = v;
    }

    pub fn packed(&self) -> &[T] {
        &self.data[..self.dim * (self.dim + 1) / 2]
    }

    pub fn to_dense(&self) -> Vec<T> {
        let n = self.dim;
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.get(i, j);
            }
        }
        out
    }

    pub fn frobenius(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                s = s + self.get(i, j) * self.get(i, j);
            }
        }
        s.sqrt()
    }

    pub fn trace(&self) -> T {
        (0..self.dim).fold(T::zero(), |acc, i| acc + self.get(i, i))
    }

    pub fn scale(&self, c: T) -> Self {
        let mut m = *self;
        for v in m.data.iter_mut() {
            *v = *v * c;
        }
        m
    }
}

#[inline]
fn tri(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * dim - i + 1) / 2 + (j - i)
}

/// Eigenvalues in the order the Jacobi sweep leaves them on the diagonal,
/// with optional eigenvectors as columns of a row-major matrix.
fn jacobi<T: Scalar>(a: &SymMatrix<T>, mut vectors: Option<&mut [T]>) -> [T; MAX_DIM] {
    let n = a.dim;
    let mut m = [[T::zero(); MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = a.get(i, j);
        }
    }
    if let Some(v) = vectors.as_deref_mut() {
        for i in 0..n {
            for j in 0..n {
                v[i * n + j] = if i == j { T::one() } else { T::zero() };
            }
        }
    }
    let frob2 = (0..n).fold(T::zero(), |acc, i| {
        acc + (0..n).fold(T::zero(), |b, j| b + m[i][j] * m[i][j])
    });
    let eps = T::epsilon();
    for sweep in 0..64 {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off + m[p][q] * m[p][q];
            }
        }
        if off <= eps * eps * frob2 || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p][q];
                if apq == T::zero() {
                    continue;
                }
                if sweep > 2 && apq.abs() <= eps * T::of(1e-2) * m[p][p].abs().min(m[q][q].abs()) {
                    m[p][q] = T::zero();
                    m[q][p] = T::zero();
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (apq + apq);
                let t = if theta.abs() > T::of(1e150) {
                    (theta + theta).recip()
                } else {
                    let r = (theta * theta + T::one()).sqrt();
                    let t = (theta.abs() + r).recip();
                    if theta < T::zero() {
                        -t
                    } else {
                        t
                    }
                };
                let c = (t * t + T::one()).sqrt().recip();
                let s = t * c;
                let tau = s / (T::one() + c);
                m[p][p] = m[p][p] - t * apq;
                m[q][q] = m[q][q] + t * apq;
                m[p][q] = T::zero();
                m[q][p] = T::zero();
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let g = m[r][p];
                    let h = m[r][q];
                    let rp = g - s * (h + g * tau);
                    let rq = h + s * (g - h * tau);
                    m[r][p] = rp;
                    m[p][r] = rp;
                    m[r][q] = rq;
                    m[q][r] = rq;
                }
                if let Some(v) = vectors.as_deref_mut() {
                    for k in 0..n {
                        let kp = v[k * n + p];
                        let kq = v[k * n + q];
                        v[k * n + p] = c * kp - s * kq;
                        v[k * n + q] = s * kp + c * kq;
                    }
                }
            }
        }
    }
    let mut out = [T::zero(); MAX_DIM];
    for i in 0..n {
        out[i] = m[i][i];
    }
    out
}

/// Ascending eigenvalues of a symmetric matrix (cyclic Jacobi).
pub fn symmetric_eigenvalues<T: Scalar>(a: &SymMatrix<T>) -> Vec<T> {
    let mut v = jacobi(a, None)[..a.dim].to_vec();
    v.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    v
}

/// Ascending eigenvalues with unit eigenvectors (columns, row-major).
pub fn symmetric_eigen<T: Scalar>(a: &SymMatrix<T>) -> (Vec<T>, Vec<T>) {
    let n = a.dim;
    let mut vec = vec![T::zero(); n * n];
    let vals = jacobi(a, Some(&mut vec));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| vals[x].partial_cmp(&vals[y]).expect("finite eigenvalues"));
    let values = order.iter().map(|&i| vals[i]).collect();
    let mut vectors = vec![T::zero(); n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + col] = vec[row * n + src];
        }
    }
    (values, vectors)
}

fn check_k(k: usize, dim: usize) -> Result<()> {
    if k == 0 || k > dim {
        Err(Error::BadK { k, dim })
    } else {
        Ok(())
    }
}

/// `e_0, …, e_N` of the given numbers by the product recurrence.
pub fn elementary_symmetric_all<T: Scalar>(values: &[T]) -> Vec<T> {
    esym(values)[..=values.len()].to_vec()
}

fn esym<T: Scalar>(values: &[T]) -> [T; MAX_DIM + 1] {
    let mut e = [T::zero(); MAX_DIM + 1];
    e[0] = T::one();
    for (i, &x) in values.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] = e[j] + x * e[j - 1];
        }
    }
    e
}

/// Index sets of size `k` in `0..dim`, as bit masks.
fn masks(dim: usize, k: usize) -> impl Iterator<Item = ([usize; MAX_DIM], usize)> {
    (0u32..1 << dim)
        .filter(move |m| m.count_ones() as usize == k)
        .map(move |m| {
            let mut set = [0usize; MAX_DIM];
            let mut w = 0;
            for i in 0..dim {
                if m >> i & 1 == 1 {
                    set[w] = i;
                    w += 1;
                }
            }
            (set, w)
        })
}

/// `σ_k(Λ) = Σ_{i₁<…<i_k} Λ_{i₁}⋯Λ_{i_k}`.
pub fn sigma_k<T: Scalar>(values: &[T], k: usize) -> Result<T> {
    check_k(k, values.len())?;
    Ok(esym(values)[k])
}

/// Determinant by cofactor expansion along the first row, `dim ≤ 6`.
pub fn determinant<T: Scalar>(dim: usize, a: &[T]) -> T {
    assert!(dim <= MAX_DIM, "determinant of order {dim} > {MAX_DIM}");
    let idx: [usize; MAX_DIM] = std::array::from_fn(|i| i);
    det_sub(a, dim, &idx[..dim], 0, &idx[..dim])
}

fn det_sub<T: Scalar>(a: &[T], stride: usize, rows_all: &[usize], first: usize, cols: &[usize]) -> T {
    let size = cols.len();
    if size == 0 {
        return T::one();
    }
    let r = rows_all[first];
    if size == 1 {
        return a[r * stride + cols[0]];
    }
    if size == 2 {
        let r2 = rows_all[first + 1];
        return a[r * stride + cols[0]] * a[r2 * stride + cols[1]]
            - a[r * stride + cols[1]] * a[r2 * stride + cols[0]];
    }
    let mut sum = T::zero();
    let mut rest = [0usize; MAX_DIM];
    for c in 0..size {
        let entry = a[r * stride + cols[c]];
        if entry == T::zero() {
            continue;
        }
        let mut w = 0;
        for (cc, &col) in cols.iter().enumerate() {
            if cc != c {
                rest[w] = col;
                w += 1;
            }
        }
        let minor = det_sub(a, stride, rows_all, first + 1, &rest[..size - 1]);
        if c % 2 == 0 {
            sum = sum + entry * minor;
        } else {
            sum = sum - entry * minor;
        }
    }
    sum
}

/// Signed minors `det A[rows, cols]` of a fixed shape, accumulated into
/// packed slots.
struct MinorPlan {
    dim: usize,
    size: usize,
    terms: Vec<(usize, bool, [usize; MAX_DIM], [usize; MAX_DIM])>,
}

impl MinorPlan {
    fn principal(dim: usize, k: usize) -> Self {
        Self {
            dim,
            size: k,
            terms: masks(dim, k).map(|(set, _)| (0, false, set, set)).collect(),
        }
    }

    /// Cofactors of the principal `k`-minors, `k ≥ 2`.
    fn newton(dim: usize, k: usize) -> Self {
        let mut terms = Vec::new();
        for (set, w) in masks(dim, k) {
            let set = &set[..w];
            for (pi, &i) in set.iter().enumerate() {
                for (pj, &j) in set.iter().enumerate().skip(pi) {
                    let mut rows = [0usize; MAX_DIM];
                    let mut cols = [0usize; MAX_DIM];
                    for (slot, &r) in rows.iter_mut().zip(set.iter().filter(|&&r| r != i)) {
                        *slot = r;
                    }
                    for (slot, &c) in cols.iter_mut().zip(set.iter().filter(|&&c| c != j)) {
                        *slot = c;
                    }
                    terms.push((tri(dim, i, j), (pi + pj) % 2 == 1, rows, cols));
                }
            }
        }
        Self { dim, size: k - 1, terms }
    }

    fn eval<T: Scalar>(&self, a: &SymMatrix<T>, out: &mut [T]) {
        let n = self.dim;
        let mut dense = [T::zero(); MAX_DIM * MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                dense[i * n + j] = a.get(i, j);
            }
        }
        for (slot, neg, rows, cols) in &self.terms {
            let d = det_sub(&dense, n, &rows[..self.size], 0, &cols[..self.size]);
            out[*slot] = if *neg { out[*slot] - d } else { out[*slot] + d };
        }
    }

    fn sum<T: Scalar>(&self, a: &SymMatrix<T>) -> T {
        let mut out = [T::zero()];
        self.eval(a, &mut out);
        out[0]
    }

    fn matrix<T: Scalar>(&self, a: &SymMatrix<T>) -> SymMatrix<T> {
        let mut out = SymMatrix::zeros(self.dim);
        self.eval(a, &mut out.data);
        out
    }
}

/// Every `k`-subset of `0..dim` in lexicographic order.
pub fn subsets(dim: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, dim: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..dim {
            cur.push(i);
            rec(i + 1, dim, k, cur, out);
            cur.pop();
        }
    }
    rec(0, dim, k, &mut cur, &mut out);
    out
}

/// Sum of all principal `k × k` minors.
pub fn principal_minor_sum<T: Scalar>(a: &SymMatrix<T>, k: usize) -> Result<T> {
    check_k(k, a.dim)?;
    Ok(MinorPlan::principal(a.dim, k).sum(a))
}

/// `S_k^{ij}(A) = ∂σ_k/∂a_{ij}` by cofactors of the principal `k`-minors
/// containing rows `i` and `j`.
pub fn newton_matrix<T: Scalar>(a: &SymMatrix<T>, k: usize) -> Result<SymMatrix<T>> {
    check_k(k, a.dim)?;
    Ok(newton_with(&newton_plan(a.dim, k), a))
}

fn newton_plan(dim: usize, k: usize) -> Option<MinorPlan> {
    (k > 1).then(|| MinorPlan::newton(dim, k))
}

fn newton_with<T: Scalar>(plan: &Option<MinorPlan>, a: &SymMatrix<T>) -> SymMatrix<T> {
    match plan {
        Some(p) => p.matrix(a),
        None => SymMatrix::identity(a.dim),
    }
}

/// `σ_k` of every order `1..=N` through the eigenvalues.
fn sigma_all_eig<T: Scalar>(a: &SymMatrix<T>) -> Vec<T> {
    let vals = jacobi(a, None);
    esym(&vals[..a.dim])[..=a.dim].to_vec()
}

/// Central finite differences of `σ_k(Λ(A))` in each entry. Off-diagonal
/// entries are perturbed symmetrically and the difference halved.
pub fn newton_matrix_fd<T: Scalar>(a: &SymMatrix<T>, k: usize) -> Result<SymMatrix<T>> {
    check_k(k, a.dim)?;
    Ok(newton_matrix_fd_all(a)[k - 1])
}

/// Finite-difference Newton matrices for every `k = 1..=N` at once.
pub fn newton_matrix_fd_all<T: Scalar>(a: &SymMatrix<T>) -> Vec<SymMatrix<T>> {
    let dim = a.dim;
    let eps = T::of(1e-6) * (T::one() + a.frobenius());
    let mut out = vec![SymMatrix::zeros(dim); dim];
    for i in 0..dim {
        for j in i..dim {
            let mut plus = *a;
            let mut minus = *a;
            plus.set(i, j, a.get(i, j) + eps);
            minus.set(i, j, a.get(i, j) - eps);
            let sp = sigma_all_eig(&plus);
            let sm = sigma_all_eig(&minus);
            let div = if i == j { eps + eps } else { T::of(4.0) * eps };
            for k in 1..=dim {
                out[k - 1].set(i, j, (sp[k] - sm[k]) / div);
            }
        }
    }
    out
}

/// Discrepancies between the independent routes for one matrix and one `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraErrors<T> {
    pub k: usize,
    /// `|σ_k(eig) - Σ minors| / max(‖A‖_F^k, 1)`.
    pub sigma: T,
    /// `|Σ a_ij S^{ij} - k σ_k| / max(‖A‖_F^k, 1)`.
    pub euler: T,
    /// `max |S^{ij} - S^{ij}_FD| / max(‖A‖_F^{k-1}, 1)`.
    pub newton: T,
}

/// All three identities for every `k = 1..=N`.
pub fn algebra_errors<T: Scalar>(a: &SymMatrix<T>) -> Vec<AlgebraErrors<T>> {
    let dim = a.dim;
    let frob = a.frobenius();
    let sig = sigma_all_eig(a);
    let fd = newton_matrix_fd_all(a);
    (1..=dim)
        .map(|k| {
            let scale = frob.powi(k as i32).max(T::one());
            let minors = principal_minor_sum(a, k).expect("k in range");
            let newton = newton_matrix(a, k).expect("k in range");
            let mut euler = T::zero();
            let mut worst = T::zero();
            for i in 0..dim {
                for j in 0..dim {
                    euler = euler + a.get(i, j) * newton.get(i, j);
                    worst = worst.max((newton.get(i, j) - fd[k - 1].get(i, j)).abs());
                }
            }
            AlgebraErrors {
                k,
                sigma: (sig[k] - minors).abs() / scale,
                euler: (euler - T::of_usize(k) * minors).abs() / scale,
                newton: worst / frob.powi(k as i32 - 1).max(T::one()),
            }
        })
        .collect()
}

/// Per-point symmetric matrices over a grid, one field per packed entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrixField<T> {
    spec: GridSpec,
    entries: Vec<Vec<T>>,
}

impl<T: Scalar> SymmetricMatrixField<T> {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn at(&self, point: usize) -> SymMatrix<T> {
        let dim = self.spec.dim();
        let mut m = SymMatrix::zeros(dim);
        for (p, e) in self.entries.iter().enumerate() {
            m.data[p] = e[point];
        }
        m
    }

    /// Entry `(i, j)` as a field.
    pub fn component(&self, i: usize, j: usize) -> RealField<T> {
        let dim = self.spec.dim();
        RealField::from_vec_unchecked(self.spec, self.entries[tri(dim, i, j)].clone())
    }

    fn map_points(&self, f: impl Fn(&SymMatrix<T>) -> SymMatrix<T>) -> Self {
        let dim = self.spec.dim();
        let packed = dim * (dim + 1) / 2;
        let len = self.spec.len();
        let mut entries = vec![vec![T::zero(); len]; packed];
        for x in 0..len {
            let m = f(&self.at(x));
            for (p, e) in entries.iter_mut().enumerate() {
                e[x] = m.data[p];
            }
        }
        Self {
            spec: self.spec,
            entries,
        }
    }

    fn map_scalar(&self, f: impl Fn(&SymMatrix<T>) -> T) -> RealField<T> {
        let values = (0..self.spec.len()).map(|x| f(&self.at(x))).collect();
        RealField::from_vec_unchecked(self.spec, values)
    }

    /// `(Σ_x ‖A(x)‖_F² h^N)^{1/2}`.
    pub fn l2_norm(&self) -> T {
        let dim = self.spec.dim();
        let mut s = T::zero();
        for i in 0..dim {
            for j in 0..dim {
                let e = &self.entries[tri(dim, i, j)];
                s = s + e.iter().fold(T::zero(), |acc, &v| acc + v * v);
            }
        }
        (s * T::of(self.spec.cell_volume())).sqrt()
    }
}

fn hessian_from_spectrum<T: Scalar>(spectrum: &SpectralField<T>) -> SymmetricMatrixField<T> {
    let spec = *spectrum.spec();
    let dim = spec.dim();
    let mut spectra = Vec::with_capacity(dim * (dim + 1) / 2);
    for i in 0..dim {
        for j in i..dim {
            let mut alpha = [0usize; MAX_DIM];
            alpha[i] += 1;
            alpha[j] += 1;
            spectra.push(derivative_spectrum(spectrum, &alpha[..dim]));
        }
    }
    let entries = inverse_many(&spectra).into_iter().map(RealField::into_values).collect();
    SymmetricMatrixField { spec, entries }
}

/// `H_{ij} = ∂_i ∂_j u` by spectral differentiation.
pub fn hessian<T: Scalar>(u: &RealField<T>) -> SymmetricMatrixField<T> {
    hessian_from_spectrum(&forward_transform(u))
}

/// Per-point ascending eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenvalues<T> {
    spec: GridSpec,
    values: Vec<T>,
}

impl<T: Scalar> Eigenvalues<T> {
    pub fn at(&self, point: usize) -> &[T] {
        let d = self.spec.dim();
        &self.values[point * d..(point + 1) * d]
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
}

pub fn eigenvalues<T: Scalar>(h: &SymmetricMatrixField<T>) -> Eigenvalues<T> {
    let mut values = Vec::with_capacity(h.spec.len() * h.spec.dim());
    for x in 0..h.spec.len() {
        values.extend(symmetric_eigenvalues(&h.at(x)));
    }
    Eigenvalues {
        spec: h.spec,
        values,
    }
}

/// `σ_k` of the eigenvalues at every point.
pub fn sigma_k_field<T: Scalar>(ev: &Eigenvalues<T>, k: usize) -> Result<RealField<T>> {
    check_k(k, ev.spec.dim())?;
    let values = (0..ev.spec.len())
        .map(|x| esym(ev.at(x))[k])
        .collect();
    Ok(RealField::from_vec_unchecked(ev.spec, values))
}

/// `⌈(k+1)/2⌉`.
pub fn dealias_factor(k: usize) -> usize {
    (k + 2) / 2
}

fn padded_hessian<T: Scalar>(u: &RealField<T>, factor: usize) -> Result<SymmetricMatrixField<T>> {
    let spectrum = pad_spectrum(&forward_transform(u), Ratio::from_integer(factor))?;
    Ok(hessian_from_spectrum(&spectrum))
}

fn truncate_back<T: Scalar>(f: &RealField<T>, factor: usize) -> Result<RealField<T>> {
    let spectrum = truncate_spectrum(&forward_transform(f), Ratio::from_integer(factor))?;
    inverse_unchecked(spectrum).0.check_finite("truncate_back")
}

fn s_k_padded<T: Scalar>(
    u: &RealField<T>,
    k: usize,
    per_point: impl Fn(&SymMatrix<T>) -> T,
) -> Result<RealField<T>> {
    check_k(k, u.spec().dim())?;
    let factor = dealias_factor(k);
    let h = padded_hessian(u, factor)?;
    truncate_back(&h.map_scalar(per_point), factor)
}

/// `S_k[u]` through per-point eigenvalues on the dealiased lattice.
pub fn s_k_field<T: Scalar>(u: &RealField<T>, k: usize) -> Result<RealField<T>> {
    s_k_padded(u, k, |m| {
        let vals = jacobi(m, None);
        esym(&vals[..m.dim])[k]
    })
}

/// `S_k[u]` as the sum of principal `k`-minors of `D²u`, same lattice.
pub fn s_k_minors<T: Scalar>(u: &RealField<T>, k: usize) -> Result<RealField<T>> {
    check_k(k, u.spec().dim())?;
    let plan = MinorPlan::principal(u.spec().dim(), k);
    s_k_padded(u, k, |m| plan.sum(m))
}

/// `S_k^{ij}[u]` pointwise on the grid of `u` (no padding).
pub fn newton_tensor<T: Scalar>(u: &RealField<T>, k: usize) -> Result<SymmetricMatrixField<T>> {
    check_k(k, u.spec().dim())?;
    let plan = newton_plan(u.spec().dim(), k);
    Ok(hessian(u).map_points(|m| newton_with(&plan, m)))
}

const TINY: f64 = 1e-300;

/// Everything the two identities need, on the lattice padded by `k`.
struct Structural<T> {
    spec: GridSpec,
    gradient: Vec<RealField<T>>,
    hessian: SymmetricMatrixField<T>,
    newton: SymmetricMatrixField<T>,
}

fn structural<T: Scalar>(u: &RealField<T>, k: usize) -> Result<Structural<T>> {
    let dim = u.spec().dim();
    check_k(k, dim)?;
    let spectrum = pad_spectrum(&forward_transform(u), Ratio::from_integer(k))?;
    let spec = *spectrum.spec();
    let grads: Vec<_> = (0..dim)
        .map(|j| {
            let mut alpha = [0usize; MAX_DIM];
            alpha[j] = 1;
            derivative_spectrum(&spectrum, &alpha[..dim])
        })
        .collect();
    let hessian = hessian_from_spectrum(&spectrum);
    let plan = newton_plan(dim, k);
    let newton = hessian.map_points(|m| newton_with(&plan, m));
    Ok(Structural {
        spec,
        gradient: inverse_many(&grads),
        hessian,
        newton,
    })
}

/// Spectrum of `Σ_i ∂_i c_i`.
fn divergence_spectrum<T: Scalar>(components: &[&SpectralField<T>]) -> SpectralField<T> {
    let spec = *components[0].spec();
    let dim = spec.dim();
    let mut sum = SpectralField::zeros(spec);
    for (i, c) in components.iter().enumerate() {
        let mut alpha = [0usize; MAX_DIM];
        alpha[i] = 1;
        let d = derivative_spectrum(c, &alpha[..dim]);
        for (a, b) in sum.coefficients_mut().iter_mut().zip(d.coefficients()) {
            *a = *a + *b;
        }
    }
    sum
}

fn l2<T: Scalar>(f: &RealField<T>) -> T {
    (f.values().iter().fold(T::zero(), |acc, &v| acc + v * v) * T::of(f.spec().cell_volume())).sqrt()
}

impl<T: Scalar> Structural<T> {
    fn divergence_form(&self, k: usize) -> Result<T> {
        let dim = self.spec.dim();
        let plan = MinorPlan::principal(dim, k);
        let sk = self.hessian.map_scalar(|m| plan.sum(m));
        let flux: Vec<RealField<T>> = (0..dim)
            .map(|i| {
                let values = (0..self.spec.len())
                    .map(|x| {
                        (0..dim).fold(T::zero(), |acc, j| {
                            acc + self.gradient[j].values()[x] * self.newton.entries[tri(dim, i, j)][x]
                        })
                    })
                    .collect();
                RealField::from_vec_unchecked(self.spec, values)
            })
            .collect();
        let spectra = forward_many(&flux.iter().collect::<Vec<_>>());
        let div = inverse_unchecked(divergence_spectrum(&spectra.iter().collect::<Vec<_>>()))
            .0
            .scale(T::of_usize(k).recip());
        let num = l2(&sk.sub(&div)?);
        let den = l2(&sk).max(T::of(TINY));
        Ok(num / den)
    }

    fn null_divergence(&self, k: usize) -> T {
        if k == 1 {
            return T::zero();
        }
        let dim = self.spec.dim();
        let entries: Vec<RealField<T>> = self
            .newton
            .entries
            .iter()
            .map(|e| RealField::from_vec_unchecked(self.spec, e.clone()))
            .collect();
        let spectra = forward_many(&entries.iter().collect::<Vec<_>>());
        let rows: Vec<SpectralField<T>> = (0..dim)
            .map(|j| divergence_spectrum(&(0..dim).map(|i| &spectra[tri(dim, i, j)]).collect::<Vec<_>>()))
            .collect();
        let worst = inverse_many(&rows).iter().fold(T::zero(), |m, r| m.max(l2(r)));
        let scale = self.hessian.l2_norm().powi(k as i32 - 1).max(T::of(TINY));
        worst / scale
    }
}

/// `‖S_k[u] - (1/k) Σ_{ij} ∂_i(u_j S_k^{ij})‖₂ / max(‖S_k[u]‖₂, tiny)`,
/// evaluated on the lattice padded by `k`, where the degree-k products are
/// represented exactly.
pub fn divergence_form_residual<T: Scalar>(u: &RealField<T>, k: usize) -> Result<T> {
    structural(u, k)?.divergence_form(k)
}

/// `max_j ‖Σ_i ∂_i S_k^{ij}[u]‖₂ / max(‖D²u‖₂^{k-1}, tiny)` on the lattice
/// padded by `k`.
pub fn null_divergence_residual<T: Scalar>(u: &RealField<T>, k: usize) -> Result<T> {
    Ok(structural(u, k)?.null_divergence(k))
}

/// Both residuals above from one pass over the padded lattice.
pub fn divergence_residuals<T: Scalar>(u: &RealField<T>, k: usize) -> Result<(T, T)> {
    let s = structural(u, k)?;
    Ok((s.divergence_form(k)?, s.null_divergence(k)))
}
