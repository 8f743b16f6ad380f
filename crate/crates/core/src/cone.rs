//! Limit cone, growth indicator, critical exponents, tangent forms,
//! norm-like functions and the norm-ordering constant c_N.
//!
//! Points of the Cartan subspace are handled in flat coordinates: the
//! concatenation of the per-factor diagonal entries, of total length
//! `sum d_f`. [`AlgebraBasis`] converts to and from intrinsic coordinates.

use std::fmt;
use std::sync::Arc;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde_json::Value;

use crate::error::{CensusError, Result};
use crate::linalg::{cholesky, real_det, symmetric_eigenvalues};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn unit(a: &[f64]) -> Vec<f64> {
    let n = norm2(a);
    a.iter().map(|x| x / n).collect()
}

/// Orthonormal basis of the Cartan subspace: per factor, the sum-zero
/// Helmert vectors (e_1 + .. + e_j - j e_{j+1}) / sqrt(j (j + 1)).
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraBasis {
    dims: Vec<usize>,
    vectors: Vec<Vec<f64>>,
}

impl AlgebraBasis {
    pub fn new(dims: &[usize]) -> Self {
        let ambient: usize = dims.iter().sum();
        let mut vectors = Vec::new();
        let mut offset = 0;
        for &d in dims {
            for j in 1..d {
                let mut v = vec![0.0; ambient];
                let s = ((j * (j + 1)) as f64).sqrt();
                for x in &mut v[offset..offset + j] {
                    *x = 1.0 / s;
                }
                v[offset + j] = -(j as f64) / s;
                vectors.push(v);
            }
            offset += d;
        }
        AlgebraBasis { dims: dims.to_vec(), vectors }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn ambient(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn coords(&self, flat: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|v| dot(v, flat)).collect()
    }

    pub fn embed(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient()];
        for (c, v) in coords.iter().zip(&self.vectors) {
            for (o, x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
        }
        out
    }

    /// Orthogonal projection onto the Cartan subspace.
    pub fn project(&self, flat: &[f64]) -> Vec<f64> {
        self.embed(&self.coords(flat))
    }
}

/// Extreme rays (unit vectors, flat coordinates) of the conical hull of samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeHull {
    pub rays: Vec<Vec<f64>>,
    pub sample_count: usize,
    basis: AlgebraBasis,
    /// Rank 2 only: boundary angles (start, end) in intrinsic coordinates,
    /// with end - start in [0, 2pi).
    arc: Option<(f64, f64)>,
}

/// L1 residual of the best nonnegative combination of `gens` approximating `p`.
fn cone_residual(gens: &[Vec<f64>], p: &[f64]) -> f64 {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let lambdas: Vec<_> = gens.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    for (k, &pk) in p.iter().enumerate() {
        let sp = lp.add_var(1.0, (0.0, f64::INFINITY));
        let sm = lp.add_var(1.0, (0.0, f64::INFINITY));
        let mut terms: Vec<_> = lambdas.iter().zip(gens).map(|(&l, g)| (l, g[k])).collect();
        terms.push((sp, 1.0));
        terms.push((sm, -1.0));
        lp.add_constraint(terms, ComparisonOp::Eq, pk);
    }
    match lp.solve() {
        Ok(sol) => sol.objective(),
        Err(_) => f64::INFINITY,
    }
}

fn dedup_rays(rays: Vec<Vec<f64>>, tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for r in rays {
        if !out.iter().any(|q| norm2(&q.iter().zip(&r).map(|(a, b)| a - b).collect::<Vec<_>>()) <= tol) {
            out.push(r);
        }
    }
    out
}

/// Andrew's monotone chain; returns hull vertex indices, collinear points dropped.
fn hull_2d(pts: &[[f64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]).then(pts[a][1].total_cmp(&pts[b][1])));
    if idx.len() < 3 {
        return idx;
    }
    let cross = |o: usize, a: usize, b: usize| {
        (pts[a][0] - pts[o][0]) * (pts[b][1] - pts[o][1]) - (pts[a][1] - pts[o][1]) * (pts[b][0] - pts[o][0])
    };
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], i) <= 1e-15 {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], i) <= 1e-15 {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Smallest closed cone containing the samples (flat coordinates).
pub fn cone_hull(basis: &AlgebraBasis, samples: &[Vec<f64>], tol: f64) -> Result<ConeHull> {
    let coords: Vec<Vec<f64>> = samples.iter().map(|s| basis.coords(s)).collect();
    let scale = coords.iter().map(|c| norm2(c)).fold(0.0, f64::max);
    let units: Vec<Vec<f64>> = coords.iter().filter(|c| norm2(c) > 1e-12 * scale && scale > 0.0).map(|c| unit(c)).collect();
    if units.is_empty() {
        return Err(CensusError::DegenerateCone);
    }
    let r = basis.rank();
    let mut arc = None;
    let rays_coords: Vec<Vec<f64>> = match r {
        1 => {
            let mut rays = Vec::new();
            if units.iter().any(|u| u[0] > 0.0) {
                rays.push(vec![1.0]);
            }
            if units.iter().any(|u| u[0] < 0.0) {
                rays.push(vec![-1.0]);
            }
            rays
        }
        2 => {
            let mut ang: Vec<f64> = units.iter().map(|u| u[1].atan2(u[0])).collect();
            ang.sort_by(|a, b| a.total_cmp(b));
            // the arc is the complement of the largest circular gap
            let n = ang.len();
            let mut best = (std::f64::consts::TAU - (ang[n - 1] - ang[0]), n - 1);
            for i in 0..n - 1 {
                let gap = ang[i + 1] - ang[i];
                if gap > best.0 {
                    best = (gap, i);
                }
            }
            let start = ang[(best.1 + 1) % n];
            let end = ang[best.1];
            let width = (end - start).rem_euclid(std::f64::consts::TAU);
            arc = Some((start, start + width));
            vec![vec![start.cos(), start.sin()], vec![end.cos(), end.sin()]]
        }
        _ => {
            let mean: Vec<f64> = (0..r).map(|k| units.iter().map(|u| u[k]).sum::<f64>()).collect();
            if norm2(&mean) < 1e-12 {
                return Err(CensusError::Precondition("samples do not span a pointed cone".into()));
            }
            let c = unit(&mean);
            if units.iter().any(|u| dot(u, &c) <= 1e-12) {
                return Err(CensusError::Precondition("samples do not span a pointed cone".into()));
            }
            if r == 3 {
                // central projection onto the plane <x, c> = 1
                let mut e1: Vec<f64> = vec![0.0; 3];
                let k = (0..3).min_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs())).unwrap();
                e1[k] = 1.0;
                let p = dot(&e1, &c);
                let e1 = unit(&e1.iter().zip(&c).map(|(x, y)| x - p * y).collect::<Vec<_>>());
                let e2 = vec![c[1] * e1[2] - c[2] * e1[1], c[2] * e1[0] - c[0] * e1[2], c[0] * e1[1] - c[1] * e1[0]];
                let pts: Vec<[f64; 2]> = units
                    .iter()
                    .map(|u| {
                        let s = 1.0 / dot(u, &c);
                        [s * dot(u, &e1), s * dot(u, &e2)]
                    })
                    .collect();
                hull_2d(&pts).into_iter().map(|i| units[i].clone()).collect()
            } else {
                let cand = dedup_rays(units.clone(), tol);
                (0..cand.len())
                    .filter(|&i| {
                        let others: Vec<Vec<f64>> =
                            cand.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.clone()).collect();
                        cone_residual(&others, &cand[i]) > tol
                    })
                    .map(|i| cand[i].clone())
                    .collect()
            }
        }
    };
    let rays = dedup_rays(rays_coords, tol).into_iter().map(|c| basis.embed(&c)).collect();
    Ok(ConeHull { rays, sample_count: samples.len(), basis: basis.clone(), arc })
}

impl ConeHull {
    /// True when `v` lies in the cone, up to an angular tolerance.
    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        let c = self.basis.coords(v);
        let n = norm2(&c);
        if n == 0.0 {
            return true;
        }
        let u: Vec<f64> = c.iter().map(|x| x / n).collect();
        if let Some((start, end)) = self.arc {
            let a = u[1].atan2(u[0]);
            let off = (a - start + tol).rem_euclid(std::f64::consts::TAU);
            return off <= end - start + 2.0 * tol;
        }
        let gens: Vec<Vec<f64>> = self.rays.iter().map(|r| self.basis.coords(r)).collect();
        cone_residual(&gens, &u) <= tol
    }

    /// Boundary angles in intrinsic coordinates (rank 2 only).
    pub fn boundary_angles(&self) -> Option<(f64, f64)> {
        self.arc
    }

    /// Maximum of f(ray) over the extreme rays.
    pub fn max_over_rays(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.rays.iter().map(|r| f(r)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Normalization record of a tangent form: `delta` and a direction `v`
/// with form(v) = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Tangency {
    pub delta: f64,
    pub direction: Vec<f64>,
}

/// A linear form on the Cartan subspace, with coefficients on flat coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearForm {
    pub coefficients: Vec<f64>,
    pub normalization: Option<Tangency>,
}

impl LinearForm {
    pub fn new(coefficients: Vec<f64>) -> Self {
        LinearForm { coefficients, normalization: None }
    }

    /// The simple root t_i - t_{i+1} of one factor (0-based i).
    pub fn simple_root(dims: &[usize], factor: usize, i: usize) -> Result<Self> {
        Self::sum_of_roots(dims, &[(factor, i)])
    }

    pub fn sum_of_roots(dims: &[usize], roots: &[(usize, usize)]) -> Result<Self> {
        let mut c = vec![0.0; dims.iter().sum()];
        for &(f, i) in roots {
            if f >= dims.len() || i + 1 >= dims[f] {
                return Err(CensusError::Validation(format!("no simple root {i} in factor {f}")));
            }
            let off: usize = dims[..f].iter().sum();
            c[off + i] += 1.0;
            c[off + i + 1] -= 1.0;
        }
        Ok(LinearForm::new(c))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.coefficients, x)
    }

    pub fn scaled(&self, s: f64) -> LinearForm {
        LinearForm::new(self.coefficients.iter().map(|c| c * s).collect())
    }

    /// Error unless the form is positive on every hull ray.
    pub fn check_positive(&self, hull: &ConeHull) -> Result<()> {
        let min = hull.rays.iter().map(|r| self.eval(r)).fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            Ok(())
        } else {
            Err(CensusError::NotPositiveOnCone { value: min })
        }
    }
}

pub type CustomNorm = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum NormKind {
    Lp { p: f64 },
    WeightedEuclidean { weights: Vec<f64> },
    Linear { coefficients: Vec<f64> },
    /// Derivatives by central finite differences.
    Custom(CustomNorm),
}

impl fmt::Debug for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::Lp { p } => write!(f, "Lp({p})"),
            NormKind::WeightedEuclidean { weights } => write!(f, "WeightedEuclidean({weights:?})"),
            NormKind::Linear { coefficients } => write!(f, "Linear({coefficients:?})"),
            NormKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Convex, degree-one homogeneous function used to order classes.
#[derive(Clone, Debug)]
pub struct NormLike {
    pub name: String,
    pub kind: NormKind,
}

const FD_STEP: f64 = 1e-5;

impl NormLike {
    pub fn new(name: impl Into<String>, kind: NormKind) -> Result<Self> {
        match &kind {
            NormKind::Lp { p } if !(*p >= 1.0 && p.is_finite()) => {
                return Err(CensusError::Validation(format!("L^p norm needs 1 <= p < inf, got {p}")))
            }
            NormKind::WeightedEuclidean { weights } if weights.iter().any(|w| !(*w > 0.0)) => {
                return Err(CensusError::Validation("weights must be positive".into()))
            }
            _ => {}
        }
        Ok(NormLike { name: name.into(), kind })
    }

    pub fn euclidean(name: impl Into<String>) -> Self {
        NormLike { name: name.into(), kind: NormKind::Lp { p: 2.0 } }
    }

    pub fn linear(name: impl Into<String>, form: &LinearForm) -> Self {
        NormLike { name: name.into(), kind: NormKind::Linear { coefficients: form.coefficients.clone() } }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            NormKind::Lp { p } => {
                if *p == 2.0 {
                    norm2(x)
                } else {
                    x.iter().map(|t| t.abs().powf(*p)).sum::<f64>().powf(1.0 / p)
                }
            }
            NormKind::WeightedEuclidean { weights } => x.iter().zip(weights).map(|(t, w)| w * t * t).sum::<f64>().sqrt(),
            NormKind::Linear { coefficients } => dot(coefficients, x),
            NormKind::Custom(f) => f(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            NormKind::Lp { p } => {
                let n = self.value(x);
                x.iter().map(|t| (t.abs() / n).powf(p - 1.0) * t.signum()).collect()
            }
            NormKind::WeightedEuclidean { weights } => {
                let n = self.value(x);
                x.iter().zip(weights).map(|(t, w)| w * t / n).collect()
            }
            NormKind::Linear { coefficients } => coefficients.clone(),
            NormKind::Custom(f) => (0..x.len())
                .map(|i| {
                    let h = FD_STEP * x[i].abs().max(1.0);
                    let mut a = x.to_vec();
                    let mut b = x.to_vec();
                    a[i] += h;
                    b[i] -= h;
                    (f(&a) - f(&b)) / (2.0 * h)
                })
                .collect(),
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = x.len();
        match &self.kind {
            NormKind::Lp { p } => {
                // (p - 1)/N [diag(|x_i|^{p-2} N^{2-p}) - g g^T]
                let nv = self.value(x);
                let g = self.gradient(x);
                let mut h = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        let diag = if i == j { (x[i].abs() / nv).powf(p - 2.0) } else { 0.0 };
                        h[i][j] = (p - 1.0) / nv * (diag - g[i] * g[j]);
                    }
                }
                h
            }
            NormKind::WeightedEuclidean { weights } => {
                let nv = self.value(x);
                let wx: Vec<f64> = x.iter().zip(weights).map(|(t, w)| w * t).collect();
                let mut h = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        let diag = if i == j { weights[i] } else { 0.0 };
                        h[i][j] = (diag - wx[i] * wx[j] / (nv * nv)) / nv;
                    }
                }
                h
            }
            NormKind::Linear { .. } => vec![vec![0.0; n]; n],
            NormKind::Custom(f) => {
                let step: Vec<f64> = x.iter().map(|t| FD_STEP * t.abs().max(1.0)).collect();
                let eval = |di: usize, si: f64, dj: usize, sj: f64| {
                    let mut y = x.to_vec();
                    y[di] += si * step[di];
                    y[dj] += sj * step[dj];
                    f(&y)
                };
                let mut h = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        h[i][j] = (eval(i, 1.0, j, 1.0) - eval(i, 1.0, j, -1.0) - eval(i, -1.0, j, 1.0)
                            + eval(i, -1.0, j, -1.0))
                            / (4.0 * step[i] * step[j]);
                    }
                }
                for i in 0..n {
                    for j in 0..i {
                        let s = 0.5 * (h[i][j] + h[j][i]);
                        h[i][j] = s;
                        h[j][i] = s;
                    }
                }
                h
            }
        }
    }
}

/// How counts grow with the threshold: plain exponential growth for
/// element counts, or the prime-geodesic form e^{dt}/(dt) for primitive
/// class counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountModel {
    Exponential,
    PrimeGeodesic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentEstimate {
    pub value: f64,
    pub window: (f64, f64),
    /// RMS residual of the log-count regression.
    pub residual: f64,
    pub grid_points: usize,
}

/// Values of one ordering on a census, with the values on its frontier
/// (the classes of maximal word length) for truncation control.
#[derive(Clone, Debug, Default)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub frontier: Vec<Vec<f64>>,
}

impl SampleSet {
    /// Threshold below which the ordering by `f` is complete: every class
    /// with a longer word has a larger value than the cheapest frontier class.
    pub fn completeness(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.frontier.iter().map(|p| f(p)).fold(f64::INFINITY, f64::min)
    }
}

pub const MIN_EXPONENT_SAMPLES: usize = 1000;
pub const MIN_CONE_SAMPLES: usize = 100;
const REGRESSION_POINTS: usize = 64;

/// Upper half of [min value, complete_below].
pub fn default_window(values: &[f64], complete_below: f64) -> Result<(f64, f64)> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hi = complete_below.min(max);
    if !(hi > min) {
        return Err(CensusError::Range(format!("no complete range above the minimum value {min}")));
    }
    Ok((0.5 * (min + hi), hi))
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Least squares fit y = a + b x; returns (a, b, rms residual).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let rms = (x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum::<f64>() / n).sqrt();
    (a, b, rms)
}

fn regress_counts(sorted: &[f64], window: (f64, f64), model: CountModel) -> Result<ExponentEstimate> {
    let (lo, hi) = window;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(CensusError::Range(format!("empty window [{lo}, {hi}]")));
    }
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    if lo < min || hi > max {
        return Err(CensusError::Range(format!("window [{lo}, {hi}] outside data range [{min}, {max}]")));
    }
    let mut xs = Vec::with_capacity(REGRESSION_POINTS);
    let mut ys = Vec::with_capacity(REGRESSION_POINTS);
    for j in 0..REGRESSION_POINTS {
        let t = lo + (hi - lo) * j as f64 / (REGRESSION_POINTS - 1) as f64;
        let count = sorted.partition_point(|&v| v <= t);
        if count == 0 {
            continue;
        }
        let y = match model {
            CountModel::Exponential => (count as f64).ln(),
            CountModel::PrimeGeodesic => (count as f64 * t).ln(),
        };
        xs.push(t);
        ys.push(y);
    }
    if xs.len() < 2 {
        return Err(CensusError::Range("window contains too few populated thresholds".into()));
    }
    let (_, slope, residual) = linear_fit(&xs, &ys);
    Ok(ExponentEstimate { value: slope, window, residual, grid_points: xs.len() })
}

/// Growth rate of N(t) = #{values <= t}, by log-count regression over the window.
pub fn critical_exponent(values: &[f64], window: (f64, f64), model: CountModel) -> Result<ExponentEstimate> {
    if values.len() < MIN_EXPONENT_SAMPLES {
        return Err(CensusError::InsufficientData { count: values.len(), needed: MIN_EXPONENT_SAMPLES });
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(CensusError::Validation(format!("values must be positive, found {v}")));
    }
    regress_counts(&sorted(values), window, model)
}

fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    (dot(a, b) / (norm2(a) * norm2(b))).clamp(-1.0, 1.0).acos()
}

/// Exponential growth rate of Cartan projections inside the open cone of
/// half-angle `aperture` around `direction`, at the unit vector of
/// `direction`. Norms above `limit` are ignored.
pub fn growth_indicator(points: &[Vec<f64>], direction: &[f64], aperture: f64, limit: Option<f64>) -> Result<f64> {
    if !(aperture > 0.0) {
        return Err(CensusError::Validation(format!("aperture must be positive, got {aperture}")));
    }
    let limit = limit.unwrap_or(f64::INFINITY);
    let norms: Vec<f64> = points
        .iter()
        .filter(|p| norm2(p) > 0.0 && angle_between(p, direction) < aperture)
        .map(|p| norm2(p))
        .filter(|&n| n <= limit)
        .collect();
    if norms.len() < MIN_CONE_SAMPLES {
        return Err(CensusError::InsufficientData { count: norms.len(), needed: MIN_CONE_SAMPLES });
    }
    let s = sorted(&norms);
    let (min, max) = (s[0], s[s.len() - 1]);
    Ok(regress_counts(&s, (0.5 * (min + max), max), CountModel::Exponential)?.value)
}

/// Mean of x / f(x) over the points with f(x) in the window.
fn mean_direction(points: &[Vec<f64>], f: impl Fn(&[f64]) -> f64, window: (f64, f64)) -> Result<Vec<f64>> {
    let dim = points.first().map_or(0, Vec::len);
    let mut acc = vec![0.0; dim];
    let mut n = 0usize;
    for p in points {
        let v = f(p);
        if v >= window.0 && v <= window.1 {
            for (a, x) in acc.iter_mut().zip(p) {
                *a += x / v;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(CensusError::Range("no samples in the window".into()));
    }
    Ok(acc.into_iter().map(|a| a / n as f64).collect())
}

/// Scale `psi` by its critical exponent on primitive Jordan projections and
/// record the tangency direction, estimated as the mean of lambda / psi(lambda)
/// over the fitting window (the classes concentrate around it).
pub fn normalize_tangent(psi: &LinearForm, hull: &ConeHull, lambdas: &SampleSet) -> Result<LinearForm> {
    psi.check_positive(hull)?;
    let values: Vec<f64> = lambdas.points.iter().map(|p| psi.eval(p)).collect();
    let window = default_window(&values, lambdas.completeness(|p| psi.eval(p)))?;
    let est = critical_exponent(&values, window, CountModel::PrimeGeodesic)?;
    let delta = est.value;
    if !(delta > 0.0) {
        return Err(CensusError::Numeric(format!("fitted exponent {delta} is not positive")));
    }
    let v = mean_direction(&lambdas.points, |p| psi.eval(p), window)?;
    let mut out = psi.scaled(delta);
    out.normalization = Some(Tangency { delta, direction: v.iter().map(|x| x / delta).collect() });
    Ok(out)
}

/// N-critical exponent from the N-ordered count of primitive classes, and
/// the direction v with N(delta_N v) = 1.
pub fn delta_n(norm: &NormLike, lambdas: &SampleSet, window: Option<(f64, f64)>) -> Result<(ExponentEstimate, Vec<f64>)> {
    let values: Vec<f64> = lambdas.points.iter().map(|p| norm.value(p)).collect();
    let window = match window {
        Some(w) => w,
        None => default_window(&values, lambdas.completeness(|p| norm.value(p)))?,
    };
    let est = critical_exponent(&values, window, CountModel::PrimeGeodesic)?;
    let w = mean_direction(&lambdas.points, |p| norm.value(p), window)?;
    let v = w.iter().map(|x| x / est.value).collect();
    Ok((est, v))
}

/// Basis convention for the matrix of I.
#[derive(Clone, Debug, PartialEq)]
pub enum IBasis {
    /// The deterministic orthonormal basis of ker psi built by [`kernel_basis`].
    Canonical,
    /// Explicit vectors (flat coordinates) spanning ker psi.
    Explicit(Vec<Vec<f64>>),
}

/// The quadratic form I on ker psi, supplied by the user.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticFormI {
    pub matrix: Vec<Vec<f64>>,
    pub basis: IBasis,
}

fn parse_matrix_f64(v: &Value, path: &str) -> Result<Vec<Vec<f64>>> {
    let rows = v.as_array().ok_or_else(|| CensusError::parse(path, "expected an array of rows"))?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            r.as_array()
                .ok_or_else(|| CensusError::parse(format!("{path}[{i}]"), "expected a row"))?
                .iter()
                .enumerate()
                .map(|(j, x)| x.as_f64().ok_or_else(|| CensusError::parse(format!("{path}[{i}][{j}]"), "expected a number")))
                .collect()
        })
        .collect()
}

impl QuadraticFormI {
    /// `{"matrix": [[..]], "basis": "canonical"}` or
    /// `{"matrix": [[..]], "basis": "explicit", "vectors": [[..]]}`.
    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| CensusError::parse("$", "expected an object"))?;
        let matrix = parse_matrix_f64(obj.get("matrix").ok_or_else(|| CensusError::parse("matrix", "missing"))?, "matrix")?;
        let n = matrix.len();
        if matrix.iter().any(|r| r.len() != n) {
            return Err(CensusError::parse("matrix", "expected a square matrix"));
        }
        let basis = match obj.get("basis").and_then(Value::as_str).unwrap_or("canonical") {
            "canonical" => IBasis::Canonical,
            "explicit" => {
                let vecs = parse_matrix_f64(obj.get("vectors").ok_or_else(|| CensusError::parse("vectors", "missing"))?, "vectors")?;
                if vecs.len() != n {
                    return Err(CensusError::parse("vectors", format!("expected {n} vectors")));
                }
                IBasis::Explicit(vecs)
            }
            other => return Err(CensusError::parse("basis", format!("unknown basis {other:?}"))),
        };
        Ok(QuadraticFormI { matrix, basis })
    }
}

/// Orthonormal basis (flat coordinates) of the kernel of the linear form
/// with coefficient vector `normal`, inside the Cartan subspace. Built by
/// Gram-Schmidt over the algebra basis vectors, in order.
pub fn kernel_basis(basis: &AlgebraBasis, normal: &[f64]) -> Vec<Vec<f64>> {
    let n = basis.project(normal);
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut against = vec![unit(&n)];
    for seed in basis.vectors() {
        let mut v = seed.clone();
        for _ in 0..2 {
            for q in &against {
                let p = dot(&v, q);
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= p * y;
                }
            }
        }
        if norm2(&v) > 1e-8 {
            let u = unit(&v);
            against.push(u.clone());
            out.push(u);
        }
        if out.len() + 1 == basis.rank() {
            break;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions { samples: 1_000_000, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CReport {
    pub closed_form: f64,
    pub monte_carlo: Option<f64>,
    pub monte_carlo_stderr: Option<f64>,
    pub a_i: Vec<Vec<f64>>,
    pub a_q: Vec<Vec<f64>>,
}

fn quad(a: &[Vec<f64>], u: &[f64]) -> f64 {
    a.iter().zip(u).map(|(row, ui)| ui * dot(row, u)).sum()
}

fn max_abs(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// sqrt(det A_I / det(A_I + A_Q)), the ratio of the Gaussian integrals of
/// e^{-I-Q} and e^{-I}; exactly 1 when A_Q vanishes within `tol`.
pub fn c_from_matrices(a_i: &[Vec<f64>], a_q: &[Vec<f64>], tol: f64) -> Result<f64> {
    let n = a_i.len();
    if a_q.len() != n || a_i.iter().chain(a_q).any(|r| r.len() != n) {
        return Err(CensusError::Validation("A_I and A_Q must be square of equal size".into()));
    }
    for i in 0..n {
        for j in 0..i {
            let scale = 1.0 + a_i[i][i].abs().max(a_i[j][j].abs());
            if (a_i[i][j] - a_i[j][i]).abs() > tol * scale {
                return Err(CensusError::Validation("matrix of I is not symmetric".into()));
            }
        }
    }
    let min_i = symmetric_eigenvalues(a_i).first().copied().unwrap_or(1.0);
    if !(min_i > tol) {
        return Err(CensusError::InvalidI { min_eig: min_i });
    }
    let min_q = symmetric_eigenvalues(a_q).first().copied().unwrap_or(0.0);
    if min_q < -tol {
        return Err(CensusError::ConvexityViolation { min_eig: min_q });
    }
    if n == 0 || max_abs(a_q) <= tol {
        return Ok(1.0);
    }
    let sum: Vec<Vec<f64>> = a_i.iter().zip(a_q).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect();
    let c = (real_det(a_i) / real_det(&sum)).sqrt();
    Ok(c.min(1.0))
}

const MC_CHUNK: usize = 1 << 14;

/// Monte Carlo estimate of E[exp(-u^T A_Q u)] for u ~ N(0, (2 A_I)^{-1}),
/// which equals the ratio computed by [`c_from_matrices`]. Returns the mean
/// and its standard error. Chunks draw from independent ChaCha streams, so
/// the result does not depend on the thread count.
pub fn monte_carlo_ratio(a_i: &[Vec<f64>], a_q: &[Vec<f64>], opts: &McOptions) -> Result<(f64, f64)> {
    let n = a_i.len();
    if n == 0 {
        return Ok((1.0, 0.0));
    }
    let two_ai: Vec<Vec<f64>> = a_i.iter().map(|r| r.iter().map(|x| 2.0 * x).collect()).collect();
    let l = cholesky(&two_ai).ok_or(CensusError::InvalidI { min_eig: symmetric_eigenvalues(a_i)[0] })?;
    let chunks = opts.samples.div_ceil(MC_CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(opts.samples - c * MC_CHUNK);
            let mut z = vec![0.0; n];
            let mut u = vec![0.0; n];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(&mut rng);
                }
                // solve L^T u = z, so Cov(u) = (L L^T)^{-1}
                for i in (0..n).rev() {
                    let s: f64 = ((i + 1)..n).map(|k| l[k][i] * u[k]).sum();
                    u[i] = (z[i] - s) / l[i][i];
                }
                let w = (-quad(a_q, &u)).exp();
                s1 += w;
                s2 += w * w;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let m = opts.samples as f64;
    let mean = s1 / m;
    let var = (s2 / m - mean * mean).max(0.0);
    Ok((mean, (var / m).sqrt()))
}

/// The norm-ordering constant c_N for the norm-like `norm` with exponent
/// `delta` and direction `v`. The direction is rescaled so N(delta v) = 1;
/// psi is the tangent form, proportional to the gradient of N at delta v.
pub fn c_constant(
    i_form: &QuadraticFormI,
    norm: &NormLike,
    delta: f64,
    v: &[f64],
    basis: &AlgebraBasis,
    tol: f64,
    mc: Option<&McOptions>,
) -> Result<CReport> {
    if !(delta > 0.0) {
        return Err(CensusError::Validation(format!("delta must be positive, got {delta}")));
    }
    let nv = norm.value(v);
    if !(nv > 0.0) {
        return Err(CensusError::Validation("norm-like function is not positive at v".into()));
    }
    let point: Vec<f64> = v.iter().map(|x| x / nv).collect();
    let grad = norm.gradient(&point);
    let kernel = match &i_form.basis {
        IBasis::Canonical => kernel_basis(basis, &grad),
        IBasis::Explicit(vecs) => {
            let gp = unit(&basis.project(&grad));
            for (k, e) in vecs.iter().enumerate() {
                if e.len() != basis.ambient() {
                    return Err(CensusError::Validation(format!("basis vector {k} has wrong length")));
                }
                let off = norm2(&e.iter().zip(basis.project(e)).map(|(a, b)| a - b).collect::<Vec<_>>());
                if off > 1e-8 * norm2(e) || dot(e, &gp).abs() > 1e-8 * norm2(e) {
                    return Err(CensusError::Validation(format!("basis vector {k} is not in ker psi")));
                }
            }
            vecs.clone()
        }
    };
    if i_form.matrix.len() != kernel.len() {
        return Err(CensusError::Validation(format!(
            "I is {}x{} but ker psi has dimension {}",
            i_form.matrix.len(),
            i_form.matrix.len(),
            kernel.len()
        )));
    }
    let h = norm.hessian(&point);
    let k = kernel.len();
    let mut a_q = vec![vec![0.0; k]; k];
    for a in 0..k {
        let hb: Vec<f64> = h.iter().map(|row| dot(row, &kernel[a])).collect();
        for b in 0..k {
            a_q[a][b] = 0.5 * delta * delta * dot(&kernel[b], &hb);
        }
    }
    for a in 0..k {
        for b in 0..a {
            let s = 0.5 * (a_q[a][b] + a_q[b][a]);
            a_q[a][b] = s;
            a_q[b][a] = s;
        }
    }
    let closed_form = c_from_matrices(&i_form.matrix, &a_q, tol)?;
    let (monte_carlo, monte_carlo_stderr) = match mc {
        Some(opts) => {
            let (m, s) = monte_carlo_ratio(&i_form.matrix, &a_q, opts)?;
            (Some(m), Some(s))
        }
        None => (None, None),
    };
    Ok(CReport { closed_form, monte_carlo, monte_carlo_stderr, a_i: i_form.matrix.clone(), a_q })
}
