//! Finite-dimensional Schauder step: a weighted weak-star style norm, δ-nets
//! on polytopes, the partition-of-unity projector `P_δ`, and a fixed-point
//! search for `P_δ ∘ Z` along a decreasing sequence of δ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `‖x‖_* = Σ_i 2^{-i} |⟨x, y_i⟩|`, `i = 1..M`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakStarMetric<T> {
    tests: Vec<Vec<T>>,
    weights: Vec<T>,
}

impl<T: Scalar> WeakStarMetric<T> {
    /// `count` test vectors drawn uniformly from the Euclidean unit ball.
    pub fn new(dim: usize, count: usize, seed: u64) -> Result<Self> {
        if dim == 0 || count < dim {
            return Err(Error::InvalidArgument(format!(
                "need at least {dim} test vectors in dimension {dim}, got {count}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tests = (0..count)
            .map(|_| {
                let g: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                let r = rng.gen::<f64>().powf(1.0 / dim as f64);
                g.iter().map(|v| T::of(v / norm * r)).collect()
            })
            .collect();
        Self::from_vectors(tests)
    }

    pub fn from_vectors(tests: Vec<Vec<T>>) -> Result<Self> {
        let dim = tests.first().map_or(0, Vec::len);
        if dim == 0 || tests.iter().any(|y| y.len() != dim) {
            return Err(Error::InvalidArgument("test vectors must share a positive dimension".into()));
        }
        let weights = (1..=tests.len()).map(|i| T::of(0.5f64.powi(i as i32))).collect();
        Ok(Self { tests, weights })
    }

    pub fn dim(&self) -> usize {
        self.tests[0].len()
    }

    pub fn tests(&self) -> &[Vec<T>] {
        &self.tests
    }

    pub fn norm(&self, x: &[T]) -> T {
        self.tests
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (y, &w)| acc + w * dot(x, y).abs())
    }

    pub fn distance(&self, x: &[T], y: &[T]) -> T {
        let d: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
        self.norm(&d)
    }

    /// `c = Σ 2^{-i} ‖y_i‖` with `‖x‖_* ≤ c ‖x‖`.
    pub fn dominance_constant(&self) -> T {
        self.tests
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (y, &w)| acc + w * dot(y, y).sqrt())
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Polytope {
    /// `{x ∈ ℝ^d : x ≥ 0, Σx = 1}`.
    Simplex { dim: usize },
    /// `[lower, upper]^d`.
    Box { dim: usize, lower: f64, upper: f64 },
}

pub const MEMBERSHIP_TOL: f64 = 1e-12;

impl Polytope {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Polytope::Simplex { dim } if dim >= 1 => Ok(()),
            Polytope::Box { dim, lower, upper } if (1..=16).contains(&dim) && lower < upper => Ok(()),
            _ => Err(Error::InvalidArgument(format!("invalid polytope {self:?}"))),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Polytope::Simplex { dim } | Polytope::Box { dim, .. } => dim,
        }
    }

    pub fn vertices<T: Scalar>(&self) -> Vec<Vec<T>> {
        match *self {
            Polytope::Simplex { dim } => (0..dim)
                .map(|i| (0..dim).map(|j| if i == j { T::one() } else { T::zero() }).collect())
                .collect(),
            Polytope::Box { dim, lower, upper } => (0..1usize << dim)
                .map(|mask| {
                    (0..dim)
                        .map(|j| T::of(if mask >> j & 1 == 1 { upper } else { lower }))
                        .collect()
                })
                .collect(),
        }
    }

    /// Uniform sample (flat Dirichlet on the simplex).
    pub fn sample<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        match *self {
            Polytope::Simplex { dim } => {
                let e: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                let s: f64 = e.iter().sum();
                e.iter().map(|v| T::of(v / s)).collect()
            }
            Polytope::Box { dim, lower, upper } => (0..dim)
                .map(|_| T::of(lower + (upper - lower) * rng.gen::<f64>()))
                .collect(),
        }
    }

    pub fn contains<T: Scalar>(&self, x: &[T]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let tol = T::of(MEMBERSHIP_TOL);
        match *self {
            Polytope::Simplex { .. } => {
                let s = x.iter().fold(T::zero(), |a, &v| a + v);
                x.iter().all(|&v| v >= -tol) && (s - T::one()).abs() <= tol * T::of_usize(x.len())
            }
            Polytope::Box { lower, upper, .. } => x
                .iter()
                .all(|&v| v >= T::of(lower) - tol && v <= T::of(upper) + tol),
        }
    }
}

/// Centers of a δ-net on a polytope, in the metric's norm.
#[derive(Debug, Clone, PartialEq)]
pub struct NetCover<T> {
    polytope: Polytope,
    delta: T,
    centers: Vec<Vec<T>>,
    /// Centers whose δ-ball contains the whole polytope.
    whole: Vec<bool>,
    diameter: T,
}

impl<T: Scalar> NetCover<T> {
    /// Greedy farthest-point sampling seeded with the vertices, over the
    /// vertices plus `candidates` uniform samples. Vertices cover radius δ;
    /// added centers cover radius δ/2 and stay more than δ from every
    /// vertex, so `P_δ` fixes the vertices exactly. Sampling stops when every
    /// candidate is covered, which leaves a margin of δ/2 for fresh points.
    pub fn build<R: Rng + ?Sized>(
        polytope: Polytope,
        metric: &WeakStarMetric<T>,
        delta: T,
        candidates: usize,
        rng: &mut R,
    ) -> Result<Self> {
        polytope.validate()?;
        if metric.dim() != polytope.dim() {
            return Err(Error::InvalidArgument("metric and polytope dimensions differ".into()));
        }
        if !(delta > T::zero()) {
            return Err(Error::InvalidArgument("δ must be positive".into()));
        }
        let rho = delta * T::of(0.5);
        let vertices = polytope.vertices::<T>();
        let pool: Vec<Vec<T>> = (0..candidates).map(|_| polytope.sample::<T, _>(rng)).collect();
        let mut gap: Vec<T> = pool
            .iter()
            .map(|p| {
                vertices
                    .iter()
                    .fold(T::infinity(), |m, v| m.min(metric.distance(p, v)))
                    - (delta - rho)
            })
            .collect();
        let mut centers = vertices.clone();
        loop {
            let (far, dist) = gap
                .iter()
                .enumerate()
                .fold((0, T::zero()), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
            if dist <= rho {
                break;
            }
            let c = pool[far].clone();
            for (g, p) in gap.iter_mut().zip(&pool) {
                *g = g.min(metric.distance(p, &c));
            }
            centers.push(c);
        }
        let mut diameter = T::zero();
        for a in &vertices {
            for b in &vertices {
                diameter = diameter.max(metric.distance(a, b));
            }
        }
        let whole = centers
            .iter()
            .map(|c| vertices.iter().all(|v| metric.distance(v, c) < delta))
            .collect();
        Ok(Self {
            polytope,
            delta,
            centers,
            whole,
            diameter,
        })
    }

    pub fn centers(&self) -> &[Vec<T>] {
        &self.centers
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn polytope(&self) -> Polytope {
        self.polytope
    }

    /// Largest distance from a point of `points` to its nearest center.
    pub fn covering_radius(&self, metric: &WeakStarMetric<T>, points: &[Vec<T>]) -> T {
        points.iter().fold(T::zero(), |acc, p| {
            let d = self
                .centers
                .iter()
                .fold(T::infinity(), |m, c| m.min(metric.distance(p, c)));
            acc.max(d)
        })
    }
}

/// `λ_i(v) = max(0, δ - ‖v - v_i‖_*)`, the distance from `v` to the
/// complement of the ball `B_{v_i}(δ)`; `λ_i = diam` when that ball holds
/// the whole polytope.
pub fn partition_weights<T: Scalar>(v: &[T], net: &NetCover<T>, metric: &WeakStarMetric<T>) -> Result<Vec<T>> {
    if !net.polytope.contains(v) {
        return Err(Error::PointOutsideSet);
    }
    let weights: Vec<T> = net
        .centers
        .iter()
        .zip(&net.whole)
        .map(|(c, &whole)| {
            if whole {
                net.diameter
            } else {
                (net.delta - metric.distance(v, c)).max(T::zero())
            }
        })
        .collect();
    if weights.iter().all(|&w| w == T::zero()) {
        return Err(Error::NotCovered);
    }
    Ok(weights)
}

/// `P_δ[v] = Σ λ_i(v) v_i / Σ λ_i(v)`.
pub fn project<T: Scalar>(v: &[T], net: &NetCover<T>, metric: &WeakStarMetric<T>) -> Result<Vec<T>> {
    let w = partition_weights(v, net, metric)?;
    let total = w.iter().fold(T::zero(), |a, &x| a + x);
    let mut out = vec![T::zero(); v.len()];
    for (c, &wi) in net.centers.iter().zip(&w) {
        if wi == T::zero() {
            continue;
        }
        for (o, &x) in out.iter_mut().zip(c) {
            *o = *o + wi * x;
        }
    }
    Ok(out.into_iter().map(|x| x / total).collect())
}

/// Cyclic self-convolution `(μ∗μ)_j = Σ_i μ_i μ_{j-i mod d}`.
pub fn convolution_square<T: Scalar>(mu: &[T]) -> Vec<T> {
    let d = mu.len();
    (0..d)
        .map(|j| (0..d).fold(T::zero(), |acc, i| acc + mu[i] * mu[(j + d - i) % d]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinderOptions {
    /// Stop when `‖x - P_δ Z x‖_* ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Step `x ← (1-α) x + α P_δ Z x`.
    pub damping: f64,
    /// Random starts tried after the warm start, the vertices and the centers.
    pub restarts: usize,
    /// Net candidates per level.
    pub candidates: usize,
    pub seed: u64,
}

impl Default for FinderOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 500,
            damping: 0.5,
            restarts: 8,
            candidates: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelRecord {
    pub delta: f64,
    pub centers: usize,
    /// `‖v_k - Z v_k‖_*`.
    pub residual: f64,
    /// `‖v_k - P_δ Z v_k‖_*`.
    pub finder_residual: f64,
    pub iterations: usize,
    /// Number of starts tried before success.
    pub starts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchauderReport<T> {
    pub levels: Vec<LevelRecord>,
    pub point: Vec<T>,
    /// Residuals are non-increasing along the δ sequence.
    pub monotone: bool,
}

const MAP_SPOT_CHECKS: usize = 16;

/// For each δ in `deltas` (strictly decreasing), build a net and find a fixed
/// point of `P_δ ∘ Z` by damped iteration. Starts are tried in order: the
/// polytope vertices, the previous level's point, the net centers, then
/// random points.
pub fn schauder_iterate<T: Scalar>(
    z: impl Fn(&[T]) -> Vec<T>,
    polytope: Polytope,
    metric: &WeakStarMetric<T>,
    deltas: &[f64],
    opts: &FinderOptions,
) -> Result<SchauderReport<T>> {
    polytope.validate()?;
    if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0)) || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("δ sequence must be positive and strictly decreasing".into()));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidArgument("damping must lie in (0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..MAP_SPOT_CHECKS {
        let x = polytope.sample::<T, _>(&mut rng);
        if !polytope.contains(&z(&x)) {
            return Err(Error::PointOutsideSet);
        }
    }
    let alpha = T::of(opts.damping);
    let tol = T::of(opts.tol);
    let mut levels = Vec::new();
    let mut warm: Option<Vec<T>> = None;
    for &delta in deltas {
        let net = NetCover::build(polytope, metric, T::of(delta), opts.candidates, &mut rng)?;
        let mut starts = polytope.vertices::<T>();
        starts.extend(warm.iter().cloned());
        starts.extend(net.centers.iter().cloned());
        starts.extend((0..opts.restarts).map(|_| polytope.sample::<T, _>(&mut rng)));
        let mut best = (T::infinity(), None);
        let mut found = None;
        'starts: for (attempt, start) in starts.iter().enumerate() {
            let mut x = start.clone();
            for it in 0..opts.max_iter {
                let px = project(&z(&x), &net, metric)?;
                let r = metric.distance(&x, &px);
                if r < best.0 {
                    best = (r, Some(x.clone()));
                }
                if r <= tol {
                    found = Some((x, it, attempt + 1));
                    break 'starts;
                }
                x = x
                    .iter()
                    .zip(&px)
                    .map(|(&a, &b)| (T::one() - alpha) * a + alpha * b)
                    .collect();
            }
        }
        let Some((x, iterations, tried)) = found else {
            return Err(Error::FinderStalled {
                best_residual: best.0.to_f64_lossy(),
            });
        };
        let px = project(&z(&x), &net, metric)?;
        levels.push(LevelRecord {
            delta,
            centers: net.centers.len(),
            residual: metric.distance(&x, &z(&x)).to_f64_lossy(),
            finder_residual: metric.distance(&x, &px).to_f64_lossy(),
            iterations,
            starts: tried,
        });
        warm = Some(x);
    }
    let monotone = levels.windows(2).all(|w| w[1].residual <= w[0].residual);
    Ok(SchauderReport {
        levels,
        point: warm.expect("at least one level"),
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metric(dim: usize) -> WeakStarMetric<f64> {
        WeakStarMetric::new(dim, dim + 4, 7).unwrap()
    }

    #[test]
    fn metric_properties() {
        let m = metric(5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = m.dominance_constant();
        let closed: f64 = m
            .tests()
            .iter()
            .enumerate()
            .map(|(i, y)| 0.5f64.powi(i as i32 + 1) * y.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum();
        assert!((c - closed).abs() < 1e-12);
        for _ in 0..100 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let e = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(m.norm(&x) <= c * e + 1e-15);
        }
        for j in 0..5 {
            let mut e = vec![0.0; 5];
            e[j] = 1.0;
            assert!(m.norm(&e) > 0.0);
        }
        assert!(WeakStarMetric::<f64>::new(5, 3, 0).is_err());
    }

    #[test]
    fn polytope_basics() {
        let s = Polytope::Simplex { dim: 4 };
        let b = Polytope::Box {
            dim: 3,
            lower: 0.0,
            upper: 1.0,
        };
        assert_eq!(s.vertices::<f64>().len(), 4);
        assert_eq!(b.vertices::<f64>().len(), 8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            assert!(s.contains(&s.sample::<f64, _>(&mut rng)));
            assert!(b.contains(&b.sample::<f64, _>(&mut rng)));
        }
        assert!(!s.contains(&[0.5, 0.6, 0.0, 0.0]));
        assert!(!b.contains(&[0.5, 1.5, 0.0]));
    }

    #[test]
    fn projector_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for poly in [
            Polytope::Simplex { dim: 6 },
            Polytope::Box {
                dim: 3,
                lower: 0.0,
                upper: 1.0,
            },
        ] {
            let m = metric(poly.dim());
            let net = NetCover::build(poly, &m, 0.1, 2000, &mut rng).unwrap();
            for _ in 0..500 {
                let v = poly.sample::<f64, _>(&mut rng);
                let p = project(&v, &net, &m).unwrap();
                assert!(m.distance(&p, &v) <= 0.1);
                assert!(poly.contains(&p));
                let w = partition_weights(&v, &net, &m).unwrap();
                for (c, &wi) in net.centers().iter().zip(&w) {
                    if m.distance(&v, c) < 0.1 {
                        assert!(wi >= 0.1 - m.distance(&v, c) - 1e-15 && wi > 0.0);
                    } else {
                        assert_eq!(wi, 0.0);
                    }
                }
                let u = poly.sample::<f64, _>(&mut rng);
                let wu = partition_weights(&u, &net, &m).unwrap();
                for (a, b) in w.iter().zip(&wu) {
                    assert!((a - b).abs() <= m.distance(&u, &v) + 1e-15);
                }
            }
            for v in poly.vertices::<f64>() {
                assert_eq!(project(&v, &net, &m).unwrap(), v);
            }
        }
    }

    #[test]
    fn projector_edge_cases() {
        let poly = Polytope::Simplex { dim: 3 };
        let m = metric(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // δ beyond the diameter: one center per vertex, each ball holds everything
        let net = NetCover::build(poly, &m, 100.0, 50, &mut rng).unwrap();
        assert_eq!(net.centers().len(), 3);
        let v = poly.sample::<f64, _>(&mut rng);
        let w = partition_weights(&v, &net, &m).unwrap();
        assert!(w.iter().all(|&x| x > 0.0));
        assert!(matches!(partition_weights(&[2.0, 0.0, 0.0], &net, &m), Err(Error::PointOutsideSet)));
    }

    #[test]
    fn schauder_trivial_maps() {
        let poly = Polytope::Simplex { dim: 4 };
        let m = metric(4);
        let opts = FinderOptions::default();
        let r = schauder_iterate(|x: &[f64]| x.to_vec(), poly, &m, &[0.3, 0.2], &opts).unwrap();
        assert_eq!(r.levels[0].starts, 1);
        assert!(r.levels.iter().all(|l| l.residual == 0.0));
        let c = vec![0.1, 0.2, 0.3, 0.4];
        let r = schauder_iterate(|_: &[f64]| c.clone(), poly, &m, &[0.3, 0.2, 0.1], &opts).unwrap();
        for l in &r.levels {
            assert!(l.residual <= l.delta + opts.tol);
        }
        assert!(schauder_iterate(|x: &[f64]| x.to_vec(), poly, &m, &[0.1, 0.2], &opts).is_err());
        let out = |_: &[f64]| vec![2.0, 0.0, 0.0, 0.0];
        assert!(matches!(
            schauder_iterate(out, poly, &m, &[0.2], &opts),
            Err(Error::PointOutsideSet)
        ));
    }

    #[test]
    fn convolution_square_demo() {
        let d = 16;
        let poly = Polytope::Simplex { dim: d };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mu = poly.sample::<f64, _>(&mut rng);
            let sq = convolution_square(&mu);
            assert!(sq.iter().all(|&v| v >= 0.0));
            assert!((sq.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
        let m = metric(d);
        let r = schauder_iterate(
            |x: &[f64]| convolution_square(x),
            poly,
            &m,
            &[0.1, 0.05, 0.025],
            &FinderOptions::default(),
        )
        .unwrap();
        assert!(r.levels.last().unwrap().residual <= 1e-6);
        assert!(r.monotone);
        assert!((r.point[0] - 1.0).abs() < 1e-12);
    }
}
