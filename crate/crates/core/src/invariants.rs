//! Spectral invariants of group elements: Cartan and Jordan projections,
//! holonomy, opposition involution, eigenflags, and the two Bruhat-cell
//! coordinate systems on SL2 factors.

use std::f64::consts::TAU;

use crate::error::{CensusError, Result};
use crate::census::cyclic_core;
use crate::group::{evaluate_word, FactorSpec, GroupSpec, MatrixTuple, Word};
use crate::linalg::{char_poly, eigenvalues_qr, eigenvector, poly_roots, quadratic_roots, singular_values, vec_norm, Mat, C64, ONE, ZERO};

/// Default minimal gap between consecutive Jordan coordinates.
pub const DEFAULT_MARGIN: f64 = 1e-9;

/// A point of the closed positive chamber, stored per factor.
#[derive(Clone, Debug, PartialEq)]
pub struct CartanPoint {
    pub factors: Vec<Vec<f64>>,
}

impl CartanPoint {
    pub fn zero(spec: &GroupSpec) -> Self {
        CartanPoint { factors: spec.factors.iter().map(|f| vec![0.0; f.dimension]).collect() }
    }

    /// Concatenated coordinates, factor by factor.
    pub fn flat(&self) -> Vec<f64> {
        self.factors.iter().flatten().copied().collect()
    }

    /// First d_f - 1 coordinates per factor; the last is minus their sum.
    pub fn reduced(&self) -> Vec<f64> {
        self.factors.iter().flat_map(|v| v[..v.len() - 1].iter().copied()).collect()
    }

    pub fn from_reduced(dims: &[usize], reduced: &[f64]) -> Self {
        let mut factors = Vec::with_capacity(dims.len());
        let mut at = 0;
        for &d in dims {
            let mut v = reduced[at..at + d - 1].to_vec();
            v.push(-v.iter().sum::<f64>());
            at += d - 1;
            factors.push(v);
        }
        CartanPoint { factors }
    }

    pub fn norm(&self) -> f64 {
        self.factors.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> CartanPoint {
        CartanPoint { factors: self.factors.iter().map(|v| v.iter().map(|x| x * s).collect()).collect() }
    }

    pub fn sub(&self, other: &CartanPoint) -> CartanPoint {
        CartanPoint {
            factors: self.factors.iter().zip(&other.factors).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect(),
        }
    }

    pub fn dist(&self, other: &CartanPoint) -> f64 {
        self.sub(other).norm()
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.factors
            .iter()
            .all(|v| v.windows(2).all(|w| w[0] >= w[1] - tol) && v.iter().sum::<f64>().abs() <= tol)
    }

    /// Smallest gap between consecutive coordinates over all factors.
    pub fn min_gap(&self) -> f64 {
        self.factors.iter().flat_map(|v| v.windows(2).map(|w| w[0] - w[1])).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FactorHolonomy {
    /// Rotation angle in [0, 2pi) of a complex factor.
    Angle(f64),
    /// Eigenvalue signs in decreasing-modulus order.
    Signs(Vec<i8>),
    /// All eigenvalues positive.
    Trivial,
}

impl FactorHolonomy {
    pub fn angle(&self) -> Option<f64> {
        match self {
            FactorHolonomy::Angle(a) => Some(*a),
            _ => None,
        }
    }

    /// Text form used in census tables: the angle, `trivial`, or a sign string like `+-`.
    pub fn to_field(&self) -> String {
        match self {
            FactorHolonomy::Angle(a) => format!("{a:.16e}"),
            FactorHolonomy::Trivial => "trivial".to_string(),
            FactorHolonomy::Signs(s) => s.iter().map(|&x| if x > 0 { '+' } else { '-' }).collect(),
        }
    }

    pub fn parse_field(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "trivial" {
            return Ok(FactorHolonomy::Trivial);
        }
        if !s.is_empty() && s.chars().all(|c| c == '+' || c == '-') {
            return Ok(FactorHolonomy::Signs(s.chars().map(|c| if c == '+' { 1 } else { -1 }).collect()));
        }
        s.parse::<f64>()
            .map(FactorHolonomy::Angle)
            .map_err(|_| CensusError::parse("holonomy", format!("bad holonomy field {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Holonomy {
    pub factors: Vec<FactorHolonomy>,
}

impl Holonomy {
    /// Angles of all angle-typed factors, in factor order.
    pub fn angles(&self) -> Vec<f64> {
        self.factors.iter().filter_map(FactorHolonomy::angle).collect()
    }

    /// Equality as conjugacy-class data: angles compared on the circle.
    pub fn approx_eq(&self, other: &Holonomy, tol: f64) -> bool {
        self.factors.len() == other.factors.len()
            && self.factors.iter().zip(&other.factors).all(|(a, b)| match (a, b) {
                (FactorHolonomy::Angle(x), FactorHolonomy::Angle(y)) => circle_dist(*x, *y) <= tol,
                _ => a == b,
            })
    }
}

/// Distance on R / 2pi Z.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Attracting and repelling eigenlines per factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Flag {
    pub attracting: Vec<Vec<C64>>,
    pub repelling: Vec<Vec<C64>>,
}

impl Flag {
    /// Per factor, the sine of the angle between the two lines.
    pub fn transversality(&self) -> Vec<f64> {
        self.attracting.iter().zip(&self.repelling).map(|(u, v)| line_sine(u, v)).collect()
    }
}

fn line_sine(u: &[C64], v: &[C64]) -> f64 {
    let ip: C64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
    let c = ip.norm() / (vec_norm(u) * vec_norm(v));
    (1.0 - c * c).max(0.0).sqrt()
}

fn check_finite(g: &MatrixTuple) -> Result<()> {
    if g.0.iter().all(Mat::is_finite) {
        Ok(())
    } else {
        Err(CensusError::Numeric("matrix has non-finite entries".into()))
    }
}

/// Replace the last coordinate so the vector sums to zero.
fn close_sum(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.len();
    let s: f64 = v[..n - 1].iter().sum();
    v[n - 1] = -s;
    v
}

fn cartan_factor(m: &Mat, inverse: Option<&Mat>) -> Vec<f64> {
    if m.dim() == 2 {
        // sigma1 sigma2 = |det| = 1 and sigma1^2 + sigma2^2 = |m|_F^2
        let s = m.entries().iter().map(|z| z.norm_sqr()).sum::<f64>() / 2.0;
        let disc = ((s - 1.0) * (s + 1.0)).max(0.0).sqrt();
        let l = 0.5 * (s + disc).ln();
        return vec![l, -l];
    }
    let d = m.dim();
    let mut v: Vec<f64> = singular_values(m).iter().map(|s| s.ln()).collect();
    if let Some(inv) = inverse {
        let vi = singular_values(inv);
        for i in 0..d / 2 {
            v[d - 1 - i] = -vi[i].ln();
        }
        if d % 2 == 1 {
            v[d / 2] = 0.0;
            v[d / 2] = -v.iter().sum::<f64>();
        }
        return v;
    }
    close_sum(v)
}

/// Cartan projection: sorted log singular values per factor.
pub fn cartan(spec: &GroupSpec, g: &MatrixTuple) -> Result<CartanPoint> {
    cartan_pair(spec, g, None)
}

/// Cartan projection using an independently evaluated inverse for the lower
/// half of the singular values.
pub fn cartan_pair(spec: &GroupSpec, g: &MatrixTuple, ginv: Option<&MatrixTuple>) -> Result<CartanPoint> {
    check_finite(g)?;
    debug_assert_eq!(g.0.len(), spec.factors.len());
    Ok(CartanPoint { factors: g.0.iter().enumerate().map(|(f, m)| cartan_factor(m, inverse_factor(ginv, f))).collect() })
}

fn sorted_eigenvalues(m: &Mat) -> Result<Vec<C64>> {
    let mut ev = if m.dim() <= 4 { poly_roots(&char_poly(m))? } else { eigenvalues_qr(m)? };
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    Ok(ev)
}

/// Eigenvalues of a determinant-one matrix, sorted by decreasing modulus.
///
/// For d >= 3 the lower half of the spectrum of a long product is swamped by
/// rounding in the top eigenvalue. When an independently evaluated inverse is
/// supplied the lower half is read off its top half instead, and for odd d the
/// middle eigenvalue is fixed by the determinant.
pub fn eigenvalues(m: &Mat, inverse: Option<&Mat>) -> Result<Vec<C64>> {
    let d = m.dim();
    if d == 2 {
        let [l1, _] = quadratic_roots(-m.trace(), ONE);
        return Ok(vec![l1, ONE / l1]);
    }
    let mut ev = sorted_eigenvalues(m)?;
    if let Some(inv) = inverse {
        let evi = sorted_eigenvalues(inv)?;
        for i in 0..d / 2 {
            ev[d - 1 - i] = ONE / evi[i];
        }
        if d % 2 == 1 {
            let rest: C64 = ev.iter().enumerate().filter(|&(i, _)| i != d / 2).map(|(_, z)| *z).product();
            ev[d / 2] = ONE / rest;
        }
    }
    if ev.iter().any(|z| z.norm() == 0.0 || !z.is_finite()) {
        return Err(CensusError::Numeric("eigenvalue computation produced a zero or non-finite value".into()));
    }
    Ok(ev)
}

fn inverse_factor(ginv: Option<&MatrixTuple>, f: usize) -> Option<&Mat> {
    ginv.map(|t| &t.0[f])
}

/// Jordan projection: sorted log eigenvalue moduli per factor.
pub fn jordan(spec: &GroupSpec, g: &MatrixTuple) -> Result<CartanPoint> {
    jordan_pair(spec, g, None)
}

/// A representative of the conjugacy class of w: the product over its cyclic
/// core. Jordan data of a long conjugate u c u^-1 computed from its matrix
/// loses about |u|^2 of relative precision to cancellation; the core does not.
pub fn class_representative(spec: &GroupSpec, w: &Word) -> Result<MatrixTuple> {
    evaluate_word(spec, &cyclic_core(w)?)
}

/// Jordan projection using an independently evaluated inverse for the lower
/// half of each spectrum (see [`eigenvalues`]).
pub fn jordan_pair(spec: &GroupSpec, g: &MatrixTuple, ginv: Option<&MatrixTuple>) -> Result<CartanPoint> {
    check_finite(g)?;
    debug_assert_eq!(g.0.len(), spec.factors.len());
    let mut factors = Vec::with_capacity(g.0.len());
    for (f, m) in g.0.iter().enumerate() {
        let ev = eigenvalues(m, inverse_factor(ginv, f))?;
        factors.push(close_sum(ev.iter().map(|z| z.norm().ln()).collect()));
    }
    Ok(CartanPoint { factors })
}

/// Every consecutive Jordan gap in every factor exceeds the margin.
pub fn is_loxodromic(spec: &GroupSpec, g: &MatrixTuple, margin: f64) -> bool {
    jordan(spec, g).is_ok_and(|l| l.min_gap() > margin)
}

fn require_loxodromic(l: &CartanPoint) -> Result<()> {
    let gap = l.min_gap();
    if gap > DEFAULT_MARGIN {
        Ok(())
    } else {
        Err(CensusError::Precondition(format!("element is not loxodromic (smallest Jordan gap {gap:.3e})")))
    }
}

fn holonomy_factor(f: &FactorSpec, ev: &[C64]) -> Result<FactorHolonomy> {
    if f.is_complex() {
        // lambda1 / lambda2 = lambda1^2 / det
        let ratio = ev[0] / ev[1];
        return Ok(FactorHolonomy::Angle(ratio.arg().rem_euclid(TAU) % TAU));
    }
    let mut signs = Vec::with_capacity(ev.len());
    for z in ev {
        if z.im.abs() > 1e-9 * z.norm() {
            return Err(CensusError::Unsupported(format!(
                "holonomy of a real factor with non-real eigenvalue {}{:+}i",
                z.re, z.im
            )));
        }
        signs.push(if z.re > 0.0 { 1i8 } else { -1 });
    }
    // det 1 fixes the sign of the smallest eigenvalue, the least accurate one
    let n = signs.len();
    signs[n - 1] = signs[..n - 1].iter().product();
    if f.projectivized && f.dimension % 2 == 0 && signs[0] < 0 {
        signs.iter_mut().for_each(|s| *s = -*s);
    }
    if signs.iter().all(|&s| s > 0) {
        Ok(FactorHolonomy::Trivial)
    } else {
        Ok(FactorHolonomy::Signs(signs))
    }
}

/// Holonomy class of a loxodromic element.
pub fn holonomy(spec: &GroupSpec, g: &MatrixTuple) -> Result<Holonomy> {
    holonomy_pair(spec, g, None)
}

pub fn holonomy_pair(spec: &GroupSpec, g: &MatrixTuple, ginv: Option<&MatrixTuple>) -> Result<Holonomy> {
    require_loxodromic(&jordan_pair(spec, g, ginv)?)?;
    let mut factors = Vec::with_capacity(g.0.len());
    for (i, (f, m)) in spec.factors.iter().zip(&g.0).enumerate() {
        factors.push(holonomy_factor(f, &eigenvalues(m, inverse_factor(ginv, i))?)?);
    }
    Ok(Holonomy { factors })
}

/// Opposition involution: reverse and negate on real factors of dimension
/// at least 3, identity on SL2 factors.
pub fn opposition(spec: &GroupSpec, v: &CartanPoint) -> CartanPoint {
    CartanPoint {
        factors: spec
            .factors
            .iter()
            .zip(&v.factors)
            .map(|(f, x)| if f.dimension == 2 { x.clone() } else { x.iter().rev().map(|t| -t).collect() })
            .collect(),
    }
}

/// Eigenlines of the largest- and smallest-modulus eigenvalues.
pub fn eigenflags(spec: &GroupSpec, g: &MatrixTuple) -> Result<Flag> {
    require_loxodromic(&jordan(spec, g)?)?;
    let limit = spec.tolerance.max(1e-9);
    let mut attracting = Vec::new();
    let mut repelling = Vec::new();
    for m in &g.0 {
        let ev = eigenvalues(m, None)?;
        let scale = m.frobenius();
        let line = |lambda: C64| -> Result<Vec<C64>> {
            let v = eigenvector(m, lambda);
            let gv = m.mul_vec(&v);
            let res: Vec<C64> = gv.iter().zip(&v).map(|(a, b)| a - lambda * b).collect();
            let r = vec_norm(&res) / scale;
            if r > limit || !r.is_finite() {
                return Err(CensusError::Numeric(format!("eigenvector residual {r:.3e} exceeds {limit:.1e}")));
            }
            Ok(v)
        };
        attracting.push(line(ev[0])?);
        repelling.push(line(ev[ev.len() - 1])?);
    }
    Ok(Flag { attracting, repelling })
}

/// Coordinates of an SL2 element in one of the two open Bruhat cells.
/// `lower` is the N+ (lower unipotent) entry, `upper` the N entry,
/// `t` = log of the first diagonal entry of the A part, `m` the unit phase
/// of the M part (+-1 for real factors).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellCoords {
    pub lower: C64,
    pub upper: C64,
    pub t: f64,
    pub m: C64,
}

impl CellCoords {
    pub const IDENTITY: CellCoords = CellCoords { lower: ZERO, upper: ZERO, t: 0.0, m: ONE };

    pub fn h(&self) -> Mat {
        Mat::m2(ONE, ZERO, self.lower, ONE)
    }

    pub fn n(&self) -> Mat {
        Mat::m2(ONE, self.upper, ZERO, ONE)
    }

    pub fn a(&self) -> Mat {
        let e = self.t.exp();
        Mat::diag(&[C64::new(e, 0.0), C64::new(1.0 / e, 0.0)])
    }

    pub fn m_mat(&self) -> Mat {
        Mat::diag(&[self.m, self.m.conj()])
    }

    pub fn am(&self) -> Mat {
        let p = self.m * self.t.exp();
        Mat::diag(&[p, ONE / p])
    }

    /// h n a m
    pub fn recompose_hnam(&self) -> Mat {
        &(&self.h() * &self.n()) * &self.am()
    }

    /// n h a m
    pub fn recompose_nham(&self) -> Mat {
        &(&self.n() * &self.h()) * &self.am()
    }

    /// Rotation angle of the M part in (-pi, pi].
    pub fn m_angle(&self) -> f64 {
        self.m.arg()
    }
}

fn pivot_check(p: C64, tol: f64) -> Result<()> {
    if p.norm() < tol || !p.is_finite() {
        Err(CensusError::Decomposition { pivot: p.norm() })
    } else {
        Ok(())
    }
}

fn split_am(p: C64, real: bool) -> (f64, C64) {
    let r = p.norm();
    let m = if real { C64::new(p.re.signum(), 0.0) } else { p / r };
    (r.ln(), m)
}

/// g = h n a m with h lower unipotent, n upper unipotent.
pub fn decompose_hnam(g: &Mat, real: bool, tol: f64) -> Result<CellCoords> {
    let p = g[(0, 0)];
    pivot_check(p, tol)?;
    let (t, m) = split_am(p, real);
    Ok(CellCoords { lower: g[(1, 0)] / p, upper: g[(0, 1)] * p, t, m })
}

/// g = n h a m with n upper unipotent, h lower unipotent.
pub fn decompose_nham(g: &Mat, real: bool, tol: f64) -> Result<CellCoords> {
    let s = g[(1, 1)];
    pivot_check(s, tol)?;
    let (t, m) = split_am(ONE / s, real);
    Ok(CellCoords { lower: g[(1, 0)] * s, upper: g[(0, 1)] / s, t, m })
}

fn require_sl2(spec: &GroupSpec) -> Result<()> {
    if spec.all_sl2() {
        Ok(())
    } else {
        Err(CensusError::Unsupported("cell coordinates are implemented for SL2 factors only".into()))
    }
}

/// Per-factor N+ N A M coordinates of g.
pub fn decompose_namn(spec: &GroupSpec, g: &MatrixTuple) -> Result<Vec<CellCoords>> {
    require_sl2(spec)?;
    spec.factors.iter().zip(&g.0).map(|(f, m)| decompose_hnam(m, !f.is_complex(), spec.tolerance)).collect()
}

/// Per-factor N N+ A M coordinates of g.
pub fn decompose_nnam(spec: &GroupSpec, g: &MatrixTuple) -> Result<Vec<CellCoords>> {
    require_sl2(spec)?;
    spec.factors.iter().zip(&g.0).map(|(f, m)| decompose_nham(m, !f.is_complex(), spec.tolerance)).collect()
}
