//! Small dense complex matrices and the spectral routines built on them.
//!
//! Real factors are stored in the same complex type with zero imaginary
//! parts; products of real matrices stay exactly real under complex
//! arithmetic, so no separate real code path is needed.

use num_complex::Complex64;
use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use crate::error::{CensusError, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Mat {
    n: usize,
    data: Vec<C64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.n {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.n {
                let z = self[(i, j)];
                if j > 0 {
                    write!(f, ", ")?;
                }
                if z.im == 0.0 {
                    write!(f, "{}", z.re)?;
                } else {
                    write!(f, "{}{:+}i", z.re, z.im)?;
                }
            }
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix must be square");
            data.extend_from_slice(r);
        }
        Mat { n, data }
    }

    pub fn from_real(n: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), n * n);
        Mat { n, data: entries.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    pub fn from_complex(n: usize, entries: &[C64]) -> Self {
        assert_eq!(entries.len(), n * n);
        Mat { n, data: entries.to_vec() }
    }

    pub fn diag(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    /// 2x2 matrix from its four entries in row-major order.
    pub fn m2(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat { n: 2, data: vec![a, b, c, d] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Mat {
        Mat { n: self.n, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn neg(&self) -> Mat {
        self.scale(C64::new(-1.0, 0.0))
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        Mat { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        Mat { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn dist(&self, other: &Mat) -> f64 {
        self.sub(other).frobenius()
    }

    pub fn conj_transpose(&self) -> Mat {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    /// Determinant by partial-pivot elimination (closed form for n <= 2).
    pub fn det(&self) -> C64 {
        match self.n {
            0 => ONE,
            1 => self.data[0],
            2 => self.data[0] * self.data[3] - self.data[1] * self.data[2],
            n => {
                let mut a = self.data.clone();
                let mut det = ONE;
                for k in 0..n {
                    let p = (k..n)
                        .max_by(|&x, &y| a[x * n + k].norm().total_cmp(&a[y * n + k].norm()))
                        .unwrap();
                    if a[p * n + k] == ZERO {
                        return ZERO;
                    }
                    if p != k {
                        for j in 0..n {
                            a.swap(p * n + j, k * n + j);
                        }
                        det = -det;
                    }
                    let piv = a[k * n + k];
                    det *= piv;
                    for i in (k + 1)..n {
                        let f = a[i * n + k] / piv;
                        for j in k..n {
                            let t = a[k * n + j];
                            a[i * n + j] -= f * t;
                        }
                    }
                }
                det
            }
        }
    }

    /// Inverse by Gauss-Jordan with partial pivoting (adjugate for n = 2).
    pub fn inverse(&self) -> Result<Mat> {
        let n = self.n;
        if n == 2 {
            let det = self.det();
            if det.norm() == 0.0 {
                return Err(CensusError::Numeric("singular matrix".into()));
            }
            let [a, b, c, d] = [self.data[0], self.data[1], self.data[2], self.data[3]];
            return Ok(Mat::m2(d / det, -b / det, -c / det, a / det));
        }
        let mut a = self.data.clone();
        let mut inv = Mat::identity(n).data;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[x * n + k].norm().total_cmp(&a[y * n + k].norm()))
                .unwrap();
            if a[p * n + k].norm() == 0.0 {
                return Err(CensusError::Numeric("singular matrix".into()));
            }
            if p != k {
                for j in 0..n {
                    a.swap(p * n + j, k * n + j);
                    inv.swap(p * n + j, k * n + j);
                }
            }
            let piv = a[k * n + k];
            for j in 0..n {
                a[k * n + j] /= piv;
                inv[k * n + j] /= piv;
            }
            for i in 0..n {
                if i != k {
                    let f = a[i * n + k];
                    if f != ZERO {
                        for j in 0..n {
                            let (t, u) = (a[k * n + j], inv[k * n + j]);
                            a[i * n + j] -= f * t;
                            inv[i * n + j] -= f * u;
                        }
                    }
                }
            }
        }
        Ok(Mat { n, data: inv })
    }

    /// Rescale by the principal n-th root of the determinant so the result has
    /// determinant one.
    pub fn renormalize_det(&self) -> Mat {
        let det = self.det();
        if det == ONE || det.norm() == 0.0 || !det.re.is_finite() {
            return self.clone();
        }
        let root = det.powf(1.0 / self.n as f64);
        if self.is_real() && det.re > 0.0 {
            self.scale(C64::new(1.0 / root.re, 0.0))
        } else {
            self.scale(root.inv())
        }
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        let n = self.n;
        assert_eq!(n, rhs.n);
        if n == 2 {
            let (a, b) = (&self.data, &rhs.data);
            return Mat {
                n,
                data: vec![
                    a[0] * b[0] + a[1] * b[2],
                    a[0] * b[1] + a[1] * b[3],
                    a[2] * b[0] + a[3] * b[2],
                    a[2] * b[1] + a[3] * b[3],
                ],
            };
        }
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.data[i * n + k];
                if aik == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += aik * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Mul for Mat {
    type Output = Mat;
    fn mul(self, rhs: Mat) -> Mat {
        &self * &rhs
    }
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Unit-normalize and rotate the phase so the first coordinate that is not
/// negligible is positive real.
pub fn normalize_line(v: &[C64]) -> Vec<C64> {
    let norm = vec_norm(v);
    if norm == 0.0 {
        return v.to_vec();
    }
    let thresh = norm * 1e-12;
    let lead = v.iter().find(|z| z.norm() > thresh).copied().unwrap_or(ONE);
    let phase = (lead / lead.norm()).conj();
    v.iter().map(|&z| z * phase / norm).collect()
}

/// Singular values of a square complex matrix, descending, by one-sided
/// (Hestenes) Jacobi rotations on the columns.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    let n = m.dim();
    // columns stored contiguously
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| m.column(j)).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let x = cols[p][i];
                    let y = cols[q][i] * phase.conj();
                    cols[p][i] = x * c - y * s;
                    cols[q][i] = (x * s + y * c) * phase;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| vec_norm(c)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Coefficients c_0..c_n of det(xI - A) = sum c_k x^k, via Faddeev-LeVerrier.
pub fn char_poly(m: &Mat) -> Vec<C64> {
    let n = m.dim();
    let mut coeffs = vec![ZERO; n + 1];
    coeffs[n] = ONE;
    let mut mk = Mat::zeros(n);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = m * &mk;
        for i in 0..n {
            next[(i, i)] += coeffs[n - k + 1];
        }
        mk = next;
        let am = m * &mk;
        coeffs[n - k] = -am.trace() / k as f64;
    }
    coeffs
}

fn poly_eval(coeffs: &[C64], x: C64) -> (C64, C64) {
    // Horner for value and derivative
    let mut p = ZERO;
    let mut dp = ZERO;
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// Roots of the monic-able polynomial sum c_k x^k (c_n != 0).
/// Degree <= 2 in closed form, otherwise Aberth-Ehrlich iteration followed by
/// Newton polishing of every root.
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let deg = coeffs.len() - 1;
    let lead = coeffs[deg];
    if lead == ZERO {
        return Err(CensusError::Numeric("leading coefficient vanishes".into()));
    }
    let c: Vec<C64> = coeffs.iter().map(|&z| z / lead).collect();
    match deg {
        0 => return Ok(vec![]),
        1 => return Ok(vec![-c[0]]),
        2 => return Ok(quadratic_roots(c[1], c[0]).to_vec()),
        _ => {}
    }
    // Cauchy bound for the initial circle
    let bound = 1.0 + c[..deg].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let radius = c[0].norm().powf(1.0 / deg as f64).clamp(1e-300, bound);
    let mut z: Vec<C64> = (0..deg)
        .map(|k| C64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.4))
        .collect();
    let mut converged = false;
    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for i in 0..deg {
            let (p, dp) = poly_eval(&c, z[i]);
            if p == ZERO {
                continue;
            }
            let ratio = p / dp;
            let repulsion: C64 = (0..deg).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let step = ratio / (ONE - ratio * repulsion);
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / z[i].norm().max(1e-300));
            }
        }
        if max_step < 1e-15 {
            converged = true;
            break;
        }
    }
    // Newton polish
    for r in z.iter_mut() {
        for _ in 0..8 {
            let (p, dp) = poly_eval(&c, *r);
            if dp == ZERO {
                break;
            }
            let step = p / dp;
            if !(step.re.is_finite() && step.im.is_finite()) {
                break;
            }
            *r -= step;
            if step.norm() <= 1e-16 * r.norm() {
                break;
            }
        }
    }
    let residual = z.iter().map(|&r| poly_eval(&c, r).0.norm()).fold(0.0, f64::max);
    let scale = c.iter().map(|z| z.norm()).fold(1.0, f64::max) * bound.powi(deg as i32);
    if !converged && residual > 1e-8 * scale {
        return Err(CensusError::Numeric(format!(
            "polynomial root iteration failed to converge (residual {residual:.3e})"
        )));
    }
    Ok(z)
}

/// Roots of x^2 + b x + c without cancellation.
pub fn quadratic_roots(b: C64, c: C64) -> [C64; 2] {
    let disc = (b * b - 4.0 * c).sqrt();
    // pick the sign that avoids cancellation with -b
    let s1 = -b + disc;
    let s2 = -b - disc;
    let big = if s1.norm() >= s2.norm() { s1 } else { s2 } / 2.0;
    if big == ZERO {
        return [ZERO, ZERO];
    }
    [big, c / big]
}

/// Eigenvalues of a complex Hessenberg-reducible matrix by Householder
/// reduction followed by single-shift QR with Wilkinson shifts.
pub fn eigenvalues_qr(m: &Mat) -> Result<Vec<C64>> {
    let n = m.dim();
    let mut h = hessenberg(m);
    let mut eig = Vec::with_capacity(n);
    let mut hi = n;
    let mut iter = 0usize;
    let scale = m.frobenius().max(1e-300);
    while hi > 0 {
        if hi == 1 {
            eig.push(h[(0, 0)]);
            break;
        }
        // look for a negligible subdiagonal entry
        let mut lo = hi - 1;
        while lo > 0 {
            let s = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            let s = if s == 0.0 { scale } else { s };
            if h[(lo, lo - 1)].norm() <= f64::EPSILON * s {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi - 1 {
            eig.push(h[(hi - 1, hi - 1)]);
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > 100 * n {
            let residual = h[(hi - 1, hi - 2)].norm();
            return Err(CensusError::Numeric(format!(
                "QR iteration did not converge (subdiagonal residual {residual:.3e})"
            )));
        }
        // Wilkinson shift from the trailing 2x2 block of the active window
        let a = h[(hi - 2, hi - 2)];
        let b = h[(hi - 2, hi - 1)];
        let c = h[(hi - 1, hi - 2)];
        let d = h[(hi - 1, hi - 1)];
        let roots = quadratic_roots(-(a + d), a * d - b * c);
        let mut shift = if (roots[0] - d).norm() < (roots[1] - d).norm() { roots[0] } else { roots[1] };
        if iter % 11 == 0 {
            // exceptional shift
            shift = d + C64::new(h[(hi - 1, hi - 2)].norm(), 0.0);
        }
        qr_step(&mut h, lo, hi, shift);
    }
    Ok(eig)
}

fn hessenberg(m: &Mat) -> Mat {
    let n = m.dim();
    let mut h = m.clone();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = ((k + 1)..n).map(|i| h[(i, k)]).collect();
        let alpha_norm = vec_norm(&x);
        if alpha_norm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() == 0.0 { ONE } else { x[0] / x[0].norm() };
        let mut v = x.clone();
        v[0] += phase * alpha_norm;
        let vn = vec_norm(&v);
        if vn == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vn;
        }
        // H <- (I - 2vv*) H (I - 2vv*)
        for j in 0..n {
            let dot: C64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * h[(k + 1 + i, j)]).sum();
            for (i, vi) in v.iter().enumerate() {
                h[(k + 1 + i, j)] -= 2.0 * vi * dot;
            }
        }
        for i in 0..n {
            let dot: C64 = v.iter().enumerate().map(|(j, vj)| h[(i, k + 1 + j)] * vj).sum();
            for (j, vj) in v.iter().enumerate() {
                h[(i, k + 1 + j)] -= 2.0 * dot * vj.conj();
            }
        }
    }
    h
}

fn qr_step(h: &mut Mat, lo: usize, hi: usize, shift: C64) {
    let n = h.dim();
    for i in lo..hi {
        h[(i, i)] -= shift;
    }
    let mut rots = Vec::with_capacity(hi - lo);
    for k in lo..(hi - 1) {
        let a = h[(k, k)];
        let b = h[(k + 1, k)];
        let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 { (ONE, ZERO) } else { (a / r, b / r) };
        // G = [c* s*; -s c] applied to rows k, k+1
        for j in k..n {
            let x = h[(k, j)];
            let y = h[(k + 1, j)];
            h[(k, j)] = c.conj() * x + s.conj() * y;
            h[(k + 1, j)] = -s * x + c * y;
        }
        rots.push((c, s));
    }
    for (idx, k) in (lo..(hi - 1)).enumerate() {
        let (c, s) = rots[idx];
        // right-multiply by G^* on columns k, k+1
        for i in 0..=(k + 1).min(hi - 1) {
            let x = h[(i, k)];
            let y = h[(i, k + 1)];
            h[(i, k)] = x * c + y * s;
            h[(i, k + 1)] = -x * s.conj() + y * c.conj();
        }
    }
    for i in lo..hi {
        h[(i, i)] += shift;
    }
}

/// A unit null vector of (m - lambda I) by full-pivot elimination.
pub fn eigenvector(m: &Mat, lambda: C64) -> Vec<C64> {
    let n = m.dim();
    let mut a = m.clone();
    for i in 0..n {
        a[(i, i)] -= lambda;
    }
    if n == 2 {
        // take the row with the larger norm
        let r0 = (a[(0, 0)].norm_sqr() + a[(0, 1)].norm_sqr()).sqrt();
        let r1 = (a[(1, 0)].norm_sqr() + a[(1, 1)].norm_sqr()).sqrt();
        let v = if r0 == 0.0 && r1 == 0.0 {
            vec![ONE, ZERO]
        } else if r0 >= r1 {
            vec![a[(0, 1)], -a[(0, 0)]]
        } else {
            vec![a[(1, 1)], -a[(1, 0)]]
        };
        return normalize_line(&v);
    }
    // Gaussian elimination with full pivoting; the last pivot is treated as zero.
    let mut perm_col: Vec<usize> = (0..n).collect();
    for k in 0..(n - 1) {
        let mut best = (k, k, -1.0);
        for i in k..n {
            for j in k..n {
                let v = a[(i, j)].norm();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        let (pi, pj, pv) = best;
        if pv == 0.0 {
            break;
        }
        if pi != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(pi, j)];
                a[(pi, j)] = t;
            }
        }
        if pj != k {
            for i in 0..n {
                let t = a[(i, k)];
                a[(i, k)] = a[(i, pj)];
                a[(i, pj)] = t;
            }
            perm_col.swap(k, pj);
        }
        let piv = a[(k, k)];
        for i in (k + 1)..n {
            let f = a[(i, k)] / piv;
            for j in k..n {
                let t = a[(k, j)];
                a[(i, j)] -= f * t;
            }
        }
    }
    // back-substitute with the free variable set to one
    let mut y = vec![ZERO; n];
    y[n - 1] = ONE;
    for k in (0..(n - 1)).rev() {
        let s: C64 = ((k + 1)..n).map(|j| a[(k, j)] * y[j]).sum();
        y[k] = if a[(k, k)] == ZERO { ZERO } else { -s / a[(k, k)] };
    }
    let mut v = vec![ZERO; n];
    for (k, &c) in perm_col.iter().enumerate() {
        v[c] = y[k];
    }
    normalize_line(&v)
}

/// Cholesky factor L (lower) of a real symmetric positive definite matrix.
pub fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 || !d.is_finite() {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Determinant of a real square matrix.
pub fn real_det(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 1.0;
    }
    let m = Mat::from_real(n, &a.iter().flatten().copied().collect::<Vec<_>>());
    m.det().re
}
