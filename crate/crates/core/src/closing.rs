//! Flow boxes and the effective closing experiment on products of SL2 factors.
//!
//! A flow box around g0 is parametrized by the N+ coordinate of its N+ N
//! part, the N coordinate of its N N+ A M part, and the A and M parts, each
//! bounded by epsilon in the Euclidean norm over factors.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CensusError, Result};
use crate::group::{FactorSpec, GroupSpec, MatrixTuple};
use crate::invariants::{decompose_hnam, decompose_nham, is_loxodromic, DEFAULT_MARGIN};
use crate::linalg::{eigenvector, quadratic_roots, Mat, C64, ONE, ZERO};

/// Largest admissible box size.
pub const EPSILON_CEILING: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowBoxSpec {
    pub base: MatrixTuple,
    pub epsilon: f64,
}

impl FlowBoxSpec {
    pub fn new(base: MatrixTuple, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < EPSILON_CEILING) {
            return Err(CensusError::Validation(format!(
                "box size {epsilon} must lie in (0, {EPSILON_CEILING})"
            )));
        }
        Ok(FlowBoxSpec { base, epsilon })
    }
}

fn require_sl2(spec: &GroupSpec) -> Result<()> {
    if spec.all_sl2() {
        Ok(())
    } else {
        Err(CensusError::Unsupported("flow boxes are implemented for SL2 factors only".into()))
    }
}

/// Distance of a unit phase from the identity of M.
fn m_dist(f: &FactorSpec, m: C64) -> f64 {
    if f.is_complex() {
        let a = m.arg().abs();
        if f.projectivized {
            a.min(PI - a)
        } else {
            a
        }
    } else if m.re > 0.0 || f.projectivized {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Box coordinates of g0^{-1} g per factor.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxCoords {
    /// N+ coordinate of the N+ N A M decomposition.
    pub lower: Vec<C64>,
    /// N coordinate of the N N+ A M decomposition of the N+ N part.
    pub upper: Vec<C64>,
    pub t: Vec<f64>,
    pub m: Vec<C64>,
}

fn l2c(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl BoxCoords {
    /// Smallest epsilon whose box contains the point.
    pub fn radius(&self, spec: &GroupSpec) -> f64 {
        let m = l2(&spec.factors.iter().zip(&self.m).map(|(f, &m)| m_dist(f, m)).collect::<Vec<_>>());
        l2c(&self.lower).max(l2c(&self.upper)).max(l2(&self.t)).max(m)
    }
}

pub fn box_coords(spec: &GroupSpec, base: &MatrixTuple, g: &MatrixTuple) -> Result<BoxCoords> {
    require_sl2(spec)?;
    let x = base.inverse()?.mul(g);
    let mut out = BoxCoords { lower: vec![], upper: vec![], t: vec![], m: vec![] };
    for (f, xf) in spec.factors.iter().zip(&x.0) {
        let real = !f.is_complex();
        let c = decompose_hnam(xf, real, spec.tolerance)?;
        let hn = &c.h() * &c.n();
        let d = decompose_nham(&hn, real, spec.tolerance)?;
        out.lower.push(c.lower);
        out.upper.push(d.upper);
        out.t.push(c.t);
        out.m.push(c.m);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Membership {
    pub inside: bool,
    pub radius: f64,
    /// Set when a decomposition failed; the point is then reported outside.
    pub diagnostic: Option<String>,
}

pub fn flow_box_membership(spec: &GroupSpec, b: &FlowBoxSpec, g: &MatrixTuple) -> Result<Membership> {
    require_sl2(spec)?;
    match box_coords(spec, &b.base, g) {
        Ok(c) => {
            let radius = c.radius(spec);
            Ok(Membership { inside: radius < b.epsilon, radius, diagnostic: None })
        }
        Err(e @ CensusError::Decomposition { .. }) => {
            Ok(Membership { inside: false, radius: f64::INFINITY, diagnostic: Some(e.to_string()) })
        }
        Err(e) => Err(e),
    }
}

/// g0 exp(w) for w in the Cartan subspace given by one t per factor.
pub fn exp_a(base: &MatrixTuple, w: &[f64]) -> MatrixTuple {
    let a = MatrixTuple(
        w.iter().map(|&t| Mat::diag(&[C64::new(t.exp(), 0.0), C64::new((-t).exp(), 0.0)])).collect(),
    );
    base.mul(&a)
}

/// A point of the unit box, scaled by epsilon when placed: per factor the
/// N+ coordinate, the N coordinate, t, and the M angle.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSample {
    pub lower: Vec<C64>,
    pub upper: Vec<C64>,
    pub t: Vec<f64>,
    pub theta: Vec<f64>,
}

impl BoxSample {
    pub fn zero(spec: &GroupSpec) -> Self {
        let n = spec.factors.len();
        BoxSample { lower: vec![ZERO; n], upper: vec![ZERO; n], t: vec![0.0; n], theta: vec![0.0; n] }
    }

    fn scaled(&self, s: f64) -> BoxSample {
        BoxSample {
            lower: self.lower.iter().map(|z| z * s).collect(),
            upper: self.upper.iter().map(|z| z * s).collect(),
            t: self.t.iter().map(|x| x * s).collect(),
            theta: self.theta.iter().map(|x| x * s).collect(),
        }
    }
}

/// Uniform point of the unit ball in R^n.
fn unit_ball(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![];
    }
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let norm = l2(&z);
    let r: f64 = Uniform::new(0.0f64, 1.0).expect("valid range").sample(rng).powf(1.0 / n as f64);
    z.iter().map(|x| x * r / norm).collect()
}

fn ball_to_coords(spec: &GroupSpec, v: &[f64]) -> Vec<C64> {
    let mut it = v.iter();
    spec.factors
        .iter()
        .map(|f| {
            let re = *it.next().unwrap();
            let im = if f.is_complex() { *it.next().unwrap() } else { 0.0 };
            C64::new(re, im)
        })
        .collect()
}

/// Uniform sample of the unit box in product coordinates.
pub fn sample_unit_box(spec: &GroupSpec, rng: &mut ChaCha8Rng) -> BoxSample {
    let nc: usize = spec.factors.iter().map(|f| if f.is_complex() { 2 } else { 1 }).sum();
    let complex: Vec<usize> = (0..spec.factors.len()).filter(|&i| spec.factors[i].is_complex()).collect();
    let lower = ball_to_coords(spec, &unit_ball(rng, nc));
    let upper = ball_to_coords(spec, &unit_ball(rng, nc));
    let t = unit_ball(rng, spec.factors.len());
    let angles = unit_ball(rng, complex.len());
    let mut theta = vec![0.0; spec.factors.len()];
    for (i, a) in complex.iter().zip(angles) {
        theta[*i] = a;
    }
    BoxSample { lower, upper, t, theta }
}

/// The element of h N intersected with n N+ A M, for lower entry y and upper entry x.
fn joint_element(y: C64, x: C64) -> Mat {
    let z = x / (ONE - x * y);
    &Mat::m2(ONE, ZERO, y, ONE) * &Mat::m2(ONE, z, ZERO, ONE)
}

/// base * g3(lower, upper) * m * a.
pub fn place_sample(base: &MatrixTuple, s: &BoxSample) -> MatrixTuple {
    let local = (0..s.lower.len())
        .map(|i| {
            let g3 = joint_element(s.lower[i], s.upper[i]);
            let p = C64::from_polar(s.t[i].exp(), s.theta[i]);
            &g3 * &Mat::diag(&[p, ONE / p])
        })
        .collect();
    base.mul(&MatrixTuple(local))
}

/// Per-factor eigenvalue of larger modulus of an SL2 element.
fn top_eigenvalue(m: &Mat) -> C64 {
    quadratic_roots(-m.trace(), ONE)[0]
}

/// A det-one matrix whose columns are the attracting and repelling
/// eigenvectors, normalized into base * N+ N.
fn diagonalizer(spec: &GroupSpec, base: &MatrixTuple, g: &MatrixTuple) -> Result<MatrixTuple> {
    let mut cols = Vec::with_capacity(g.0.len());
    for (f, m) in spec.factors.iter().zip(&g.0) {
        let l1 = top_eigenvalue(m);
        let vp = eigenvector(m, l1);
        let mut vm = eigenvector(m, ONE / l1);
        let mut det = vp[0] * vm[1] - vp[1] * vm[0];
        if !f.is_complex() && det.re < 0.0 {
            vm = vm.iter().map(|z| -z).collect();
            det = -det;
        }
        let s = ONE / det.sqrt();
        cols.push(Mat::m2(vp[0] * s, vm[0] * s, vp[1] * s, vm[1] * s));
    }
    let x = base.inverse()?.mul(&MatrixTuple(cols));
    let mut local = Vec::with_capacity(x.0.len());
    for (f, xf) in spec.factors.iter().zip(&x.0) {
        let c = decompose_hnam(xf, !f.is_complex(), spec.tolerance)?;
        local.push(&c.h() * &c.n());
    }
    Ok(base.mul(&MatrixTuple(local)))
}

/// The diagonalizer of a loxodromic element in the base * N+ N normalization.
pub fn axis_frame(spec: &GroupSpec, gamma: &MatrixTuple) -> Result<MatrixTuple> {
    require_sl2(spec)?;
    let id = MatrixTuple::identity(spec);
    diagonalizer(spec, &id, gamma)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosingReport {
    pub trial: usize,
    pub epsilon: f64,
    pub power: u32,
    /// Minimum over positive roots of alpha(log a~).
    pub t: f64,
    pub dist_a: f64,
    pub dist_m: f64,
    /// Coordinate size of the correction from the box point with the
    /// sampled flags to the true diagonalizer.
    pub box_displacement: f64,
    /// Smallest box around the base containing the diagonalizer.
    pub box_radius: f64,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosingOptions {
    pub powers: Vec<u32>,
    pub trials: usize,
    pub seed: u64,
    /// When false every trial uses the unperturbed pair g1 = g2 = base.
    pub perturbed: bool,
}

fn phase(z: C64) -> C64 {
    z / z.norm()
}

/// Minimum over factors of 2 log |lambda_1|: the smallest root value.
pub fn root_length(spec: &GroupSpec, gamma: &MatrixTuple) -> f64 {
    spec.factors.iter().zip(&gamma.0).map(|(_, m)| 2.0 * top_eigenvalue(m).norm().ln()).fold(f64::INFINITY, f64::min)
}

/// Powers k whose root lengths k T_gamma best match the requested grid.
pub fn powers_for_grid(t_gamma: f64, grid: &[f64]) -> Vec<u32> {
    let mut out: Vec<u32> = grid.iter().map(|t| ((t / t_gamma).round() as u32).max(1)).collect();
    out.dedup();
    out
}

/// For each trial, samples g1, g2 in the box, sets a~ m~ to the Jordan data
/// of gamma^k, forms the return element g1 a~ m~ g2^{-1}, and compares its
/// exact diagonalization with the sampled data.
pub fn closing_experiment(
    spec: &GroupSpec,
    gamma: &MatrixTuple,
    b: &FlowBoxSpec,
    opts: &ClosingOptions,
) -> Result<Vec<ClosingReport>> {
    require_sl2(spec)?;
    if !is_loxodromic(spec, gamma, DEFAULT_MARGIN) {
        return Err(CensusError::Precondition("closing element is not loxodromic".into()));
    }
    if opts.powers.is_empty() || opts.powers.contains(&0) {
        return Err(CensusError::Validation("powers must be positive".into()));
    }
    let frame = diagonalizer(spec, &b.base, gamma)?;
    let r = box_coords(spec, &b.base, &frame)?.radius(spec);
    if r >= b.epsilon {
        return Err(CensusError::Precondition(format!(
            "the flags of the element are outside the box neighborhoods (radius {r:.3e} >= {})",
            b.epsilon
        )));
    }
    let tops: Vec<C64> = gamma.0.iter().map(top_eigenvalue).collect();
    let per_trial: Vec<Result<Vec<ClosingReport>>> = (0..opts.trials.max(1))
        .into_par_iter()
        .map(|trial| {
            let (s1, s2) = if opts.perturbed {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(trial as u64);
                (sample_unit_box(spec, &mut rng), sample_unit_box(spec, &mut rng))
            } else {
                (BoxSample::zero(spec), BoxSample::zero(spec))
            };
            let (s1, s2) = (s1.scaled(b.epsilon), s2.scaled(b.epsilon));
            let g1 = place_sample(&b.base, &s1);
            let g2inv = place_sample(&b.base, &s2).inverse()?;
            // the box point with g1's N+ coordinate and g2's N coordinate
            let corner = BoxSample { lower: s1.lower.clone(), upper: s2.upper.clone(), ..BoxSample::zero(spec) };
            let g4inv = place_sample(&b.base, &corner).inverse()?;
            let mut out = Vec::with_capacity(opts.powers.len());
            for &k in &opts.powers {
                let d = MatrixTuple(
                    tops.iter()
                        .map(|l| {
                            let p = l.powu(k);
                            Mat::diag(&[p, ONE / p])
                        })
                        .collect(),
                );
                let ret = g1.mul(&d).mul(&g2inv);
                let mut da = 0.0;
                let mut dm = 0.0;
                let mut t = f64::INFINITY;
                for ((f, m), l) in spec.factors.iter().zip(&ret.0).zip(&tops) {
                    let lt = top_eigenvalue(m);
                    let target = l.powu(k);
                    da += (lt.norm().ln() - target.norm().ln()).powi(2);
                    dm += m_dist(f, phase(lt) / phase(target)).powi(2);
                    t = t.min(2.0 * target.norm().ln());
                }
                let g = diagonalizer(spec, &b.base, &ret)?;
                let radius = box_coords(spec, &b.base, &g)?.radius(spec);
                let corr = g4inv.mul(&g);
                let mut disp = 0.0;
                for (f, x) in spec.factors.iter().zip(&corr.0) {
                    let c = decompose_hnam(x, !f.is_complex(), spec.tolerance)?;
                    disp += c.lower.norm_sqr() + c.upper.norm_sqr() + c.t * c.t + m_dist(f, c.m).powi(2);
                }
                out.push(ClosingReport {
                    trial,
                    epsilon: b.epsilon,
                    power: k,
                    t,
                    dist_a: da.sqrt(),
                    dist_m: dm.sqrt(),
                    box_displacement: disp.sqrt(),
                    box_radius: radius,
                    success: false,
                });
            }
            Ok(out)
        })
        .collect();
    let mut reports = Vec::new();
    for r in per_trial {
        reports.extend(r?);
    }
    Ok(reports)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosingFits {
    /// Through-origin slope of median dist_a against epsilon.
    pub slope: f64,
    /// Uncentered R^2 of that fit.
    pub r2: f64,
    /// Spearman correlation of box_displacement with e^{-T} over all trials.
    pub spearman: f64,
    /// Constant C in the success test dist <= C epsilon.
    pub c_fitted: f64,
    /// Smallest T from which every trial succeeds.
    pub closing_threshold: Option<f64>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// (slope, uncentered R^2) of y = slope x.
pub fn fit_through_origin(x: &[f64], y: &[f64]) -> (f64, f64) {
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| b * b).sum();
    (slope, if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 })
}

const SUCCESS_FACTOR: f64 = 3.0;

/// Fits over all reports, and marks each report's success flag.
pub fn closing_fits(reports: &mut [ClosingReport]) -> ClosingFits {
    let mut eps: Vec<f64> = reports.iter().map(|r| r.epsilon).collect();
    eps.sort_by(|a, b| a.total_cmp(b));
    eps.dedup();
    let med = |f: &dyn Fn(&ClosingReport) -> f64| -> Vec<f64> {
        eps.iter().map(|&e| median(&reports.iter().filter(|r| r.epsilon == e).map(f).collect::<Vec<_>>())).collect()
    };
    let (slope, r2) = fit_through_origin(&eps, &med(&|r| r.dist_a));
    let (c_slope, _) = fit_through_origin(&eps, &med(&|r| r.dist_a.max(r.dist_m)));
    let c_fitted = SUCCESS_FACTOR * c_slope;
    for r in reports.iter_mut() {
        r.success = r.dist_a <= c_fitted * r.epsilon && r.dist_m <= c_fitted * r.epsilon;
    }
    let disp: Vec<f64> = reports.iter().map(|r| r.box_displacement).collect();
    let decay: Vec<f64> = reports.iter().map(|r| (-r.t).exp()).collect();
    let mut ts: Vec<f64> = reports.iter().map(|r| r.t).collect();
    ts.sort_by(|a, b| a.total_cmp(b));
    ts.dedup();
    let closing_threshold = ts.iter().copied().find(|&t0| reports.iter().filter(|r| r.t >= t0).all(|r| r.success));
    ClosingFits { slope, r2, spearman: spearman(&disp, &decay), c_fitted, closing_threshold }
}

/// Isometric circles of the generators and their inverses in one SL2
/// factor, with the smallest gap between distinct circles. Disjoint circles
/// certify a classical Schottky group there.
#[derive(Clone, Debug, PartialEq)]
pub struct PingPong {
    pub circles: Vec<(C64, f64)>,
    pub min_gap: f64,
    pub disjoint: bool,
}

pub fn ping_pong(spec: &GroupSpec, factor: usize) -> Result<PingPong> {
    require_sl2(spec)?;
    if factor >= spec.factors.len() {
        return Err(CensusError::Validation(format!("no factor {factor}")));
    }
    let mut circles = Vec::new();
    for g in 0..spec.generator_count() {
        let m = &spec.generators[g].0[factor];
        let (a, d, c) = (m[(0, 0)], m[(1, 1)], m[(1, 0)]);
        if c.norm() < spec.tolerance {
            return Err(CensusError::Unsupported(format!("generator {g} fixes infinity; conjugate it first")));
        }
        let r = 1.0 / c.norm();
        circles.push((-d / c, r));
        circles.push((a / c, r));
    }
    let mut min_gap = f64::INFINITY;
    for i in 0..circles.len() {
        for j in i + 1..circles.len() {
            min_gap = min_gap.min((circles[i].0 - circles[j].0).norm() - circles[i].1 - circles[j].1);
        }
    }
    Ok(PingPong { circles, min_gap, disjoint: min_gap > 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{schottky, twisted_joining, BASE_PAIR};
    use crate::group::{evaluate_word, FactorSpec};
    use proptest::prelude::*;

    fn diag_spec() -> (GroupSpec, MatrixTuple) {
        let c = |re: f64, im: f64| C64::new(re, im);
        let l = C64::from_polar(2.5f64.exp(), 0.7);
        let a = Mat::diag(&[l, ONE / l]);
        let b = Mat::m2(c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0));
        let spec = GroupSpec::new(
            vec![FactorSpec::complex2(false)],
            vec![MatrixTuple(vec![a.clone()]), MatrixTuple(vec![b])],
            1e-10,
        )
        .unwrap();
        (spec, MatrixTuple(vec![a]))
    }

    #[test]
    fn membership_basics() {
        let spec = twisted_joining().unwrap();
        let base = evaluate_word(&spec, &"a b".parse().unwrap()).unwrap();
        let b = FlowBoxSpec::new(base.clone(), 0.01).unwrap();
        assert!(flow_box_membership(&spec, &b, &base).unwrap().inside);
        // N+ coordinate of norm 2 epsilon
        let h = MatrixTuple(vec![Mat::m2(ONE, ZERO, C64::new(0.02, 0.0), ONE), Mat::identity(2)]);
        assert!(!flow_box_membership(&spec, &b, &base.mul(&h)).unwrap().inside);
        assert!(FlowBoxSpec::new(base.clone(), 0.06).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn a_ball_is_euclidean(t0 in -0.02f64..0.02, t1 in -0.02f64..0.02) {
            let spec = twisted_joining().unwrap();
            let base = evaluate_word(&spec, &"a b'".parse().unwrap()).unwrap();
            let b = FlowBoxSpec::new(base.clone(), 0.015).unwrap();
            let w = [t0, t1];
            let norm = (t0 * t0 + t1 * t1).sqrt();
            prop_assume!((norm - 0.015).abs() > 1e-8);
            let m = flow_box_membership(&spec, &b, &exp_a(&base, &w)).unwrap();
            prop_assert_eq!(m.inside, norm < 0.015);
            prop_assert!((m.radius - norm).abs() < 1e-9);
        }

        #[test]
        fn sampled_points_lie_in_the_box(seed in 0u64..500) {
            let spec = twisted_joining().unwrap();
            let base = evaluate_word(&spec, &"b a".parse().unwrap()).unwrap();
            let b = FlowBoxSpec::new(base.clone(), 0.02).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = sample_unit_box(&spec, &mut rng).scaled(0.02);
            let g = place_sample(&base, &s);
            let c = box_coords(&spec, &base, &g).unwrap();
            for i in 0..2 {
                prop_assert!((c.lower[i] - s.lower[i]).norm() < 1e-10);
                prop_assert!((c.upper[i] - s.upper[i]).norm() < 1e-10);
                prop_assert!((c.t[i] - s.t[i]).abs() < 1e-10);
            }
            prop_assert!(flow_box_membership(&spec, &b, &g).unwrap().inside);
        }
    }

    #[test]
    fn unperturbed_diagonal_closes_exactly() {
        let (spec, gamma) = diag_spec();
        let b = FlowBoxSpec::new(MatrixTuple::identity(&spec), 0.01).unwrap();
        let opts = ClosingOptions { powers: vec![1], trials: 1, seed: 0, perturbed: false };
        let r = &closing_experiment(&spec, &gamma, &b, &opts).unwrap()[0];
        assert_eq!((r.dist_a, r.dist_m), (0.0, 0.0));
        assert!(r.box_displacement < 1e-12 && r.box_radius < 1e-12);
        assert!((r.t - 5.0).abs() < 1e-12);
    }

    #[test]
    fn small_perturbation_small_distances() {
        let (spec, gamma) = diag_spec();
        let n = MatrixTuple(vec![Mat::m2(ONE, C64::new(0.003, 0.001), ZERO, ONE)]);
        let gamma = gamma.mul(&n);
        let base = axis_frame(&spec, &gamma).unwrap();
        let b = FlowBoxSpec::new(base, 0.01).unwrap();
        let opts = ClosingOptions { powers: vec![1, 2, 3], trials: 40, seed: 11, perturbed: true };
        let reports = closing_experiment(&spec, &gamma, &b, &opts).unwrap();
        assert!(reports.iter().all(|r| r.dist_a <= 0.05 && r.dist_m <= 0.05));
        assert_eq!(reports, closing_experiment(&spec, &gamma, &b, &opts).unwrap());
    }

    #[test]
    fn displacement_decays_and_distances_scale() {
        let spec = twisted_joining().unwrap();
        let gamma = evaluate_word(&spec, &"a b".parse().unwrap()).unwrap();
        let base = axis_frame(&spec, &gamma).unwrap();
        let tg = root_length(&spec, &gamma);
        let powers = powers_for_grid(tg, &[tg, 2.0 * tg, 3.0 * tg]);
        assert_eq!(powers, vec![1, 2, 3]);
        let mut all = Vec::new();
        for eps in [0.04, 0.02, 0.01, 0.005] {
            let b = FlowBoxSpec::new(base.clone(), eps).unwrap();
            let opts = ClosingOptions { powers: powers.clone(), trials: 30, seed: 5, perturbed: true };
            all.extend(closing_experiment(&spec, &gamma, &b, &opts).unwrap());
        }
        let fits = closing_fits(&mut all);
        assert!(fits.r2 > 0.9, "{fits:?}");
        assert!(fits.spearman > 0.5, "{fits:?}");
        for k in 1..3 {
            let m = |p: u32| median(&all.iter().filter(|r| r.power == p).map(|r| r.box_displacement).collect::<Vec<_>>());
            assert!(m(k + 1) < m(k));
        }
    }

    #[test]
    fn spearman_oracles() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // ranks with ties: x = (1, 2.5, 2.5, 4)
        let s = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]);
        let want = 4.5 / (5.0f64 * 4.5).sqrt();
        assert!((s - want).abs() < 1e-12);
    }

    #[test]
    fn fixture_pairs_play_ping_pong() {
        let p = ping_pong(&schottky(BASE_PAIR).unwrap(), 0).unwrap();
        assert!(p.disjoint && p.circles.len() == 4);
        let spec = twisted_joining().unwrap();
        assert!(ping_pong(&spec, 1).unwrap().disjoint);
    }

    #[test]
    fn non_loxodromic_rejected() {
        let (spec, _) = diag_spec();
        let rot = MatrixTuple(vec![Mat::diag(&[C64::from_polar(1.0, 0.3), C64::from_polar(1.0, -0.3)])]);
        let b = FlowBoxSpec::new(MatrixTuple::identity(&spec), 0.01).unwrap();
        let opts = ClosingOptions { powers: vec![1], trials: 1, seed: 0, perturbed: false };
        assert!(matches!(closing_experiment(&spec, &rot, &b, &opts), Err(CensusError::Precondition(_))));
    }
}
