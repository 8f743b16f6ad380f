//! Ready-made groups: Schottky pairs in SL2(C) and their self-joinings.

use crate::error::Result;
use crate::group::{FactorSpec, GroupSpec, MatrixTuple, DEFAULT_TOLERANCE};
use crate::linalg::{Mat, C64};

/// Complex length l + i theta of a loxodromic generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexLength {
    pub length: f64,
    pub rotation: f64,
}

impl ComplexLength {
    pub const fn new(length: f64, rotation: f64) -> Self {
        ComplexLength { length, rotation }
    }

    fn half(self) -> C64 {
        C64::new(self.length, self.rotation) / 2.0
    }
}

/// [[cosh z, sinh z], [sinh z, cosh z]], z = (l + i theta) / 2: fixed points +-1.
pub fn axis_real(c: ComplexLength) -> Mat {
    let z = c.half();
    Mat::m2(z.cosh(), z.sinh(), z.sinh(), z.cosh())
}

/// [[cosh z, i sinh z], [-i sinh z, cosh z]]: fixed points +-i.
pub fn axis_imaginary(c: ComplexLength) -> Mat {
    let z = c.half();
    let i = C64::new(0.0, 1.0);
    Mat::m2(z.cosh(), i * z.sinh(), -i * z.sinh(), z.cosh())
}

/// Complex lengths of the two generators of one Schottky pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchottkyPair {
    pub a: ComplexLength,
    pub b: ComplexLength,
}

impl SchottkyPair {
    pub fn matrices(&self) -> (Mat, Mat) {
        (axis_real(self.a), axis_imaginary(self.b))
    }
}

pub const BASE_PAIR: SchottkyPair =
    SchottkyPair { a: ComplexLength::new(2.34, 4.31), b: ComplexLength::new(2.841, 0.403) };

pub const TWISTED_PAIR: SchottkyPair =
    SchottkyPair { a: ComplexLength::new(2.352, 3.478), b: ComplexLength::new(2.957, 4.731) };

/// One Schottky pair in PSL2(C).
pub fn schottky(pair: SchottkyPair) -> Result<GroupSpec> {
    let (a, b) = pair.matrices();
    GroupSpec::new(
        vec![FactorSpec::complex2(true)],
        vec![MatrixTuple(vec![a]), MatrixTuple(vec![b])],
        DEFAULT_TOLERANCE,
    )
}

/// Diagonal embedding of the free group on two letters through two Schottky pairs.
pub fn self_joining(first: SchottkyPair, second: SchottkyPair) -> Result<GroupSpec> {
    let (a1, b1) = first.matrices();
    let (a2, b2) = second.matrices();
    GroupSpec::new(
        vec![FactorSpec::complex2(true), FactorSpec::complex2(true)],
        vec![MatrixTuple(vec![a1, a2]), MatrixTuple(vec![b1, b2])],
        DEFAULT_TOLERANCE,
    )
}

/// The base pair joined with a twisted, non-conjugate copy.
pub fn twisted_joining() -> Result<GroupSpec> {
    self_joining(BASE_PAIR, TWISTED_PAIR)
}

/// The base pair joined with itself; holonomies lie on the diagonal.
pub fn diagonal_joining() -> Result<GroupSpec> {
    self_joining(BASE_PAIR, BASE_PAIR)
}

/// psi = t_1 - t_2 on the first factor: the translation length there.
pub fn first_factor_length(spec: &GroupSpec) -> Vec<f64> {
    let mut c = vec![0.0; spec.ambient_dim()];
    c[0] = 1.0;
    c[1] = -1.0;
    c
}
