//! Ambient product group, generator configuration, and word evaluation.
//!
//! The group is modeled as free on its generators. Matrices of every factor
//! are kept in double precision. Generators are rescaled to determinant one
//! once at construction; products are not rescaled afterwards because the
//! computed determinant of a long product is far less accurate than the
//! product itself.

use serde_json::{json, Map, Value};
use std::fmt;
use std::str::FromStr;

use crate::error::{CensusError, Result};
use crate::linalg::{Mat, C64, ONE};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Entries above this magnitude are reported as overflow.
const OVERFLOW_LIMIT: f64 = 1e150;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FactorKind {
    RealSpecialLinear,
    ComplexSpecialLinear2,
}

impl FactorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FactorKind::RealSpecialLinear => "real-special-linear",
            FactorKind::ComplexSpecialLinear2 => "complex-special-linear-2",
        }
    }
}

impl FromStr for FactorKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "real-special-linear" => Ok(FactorKind::RealSpecialLinear),
            "complex-special-linear-2" => Ok(FactorKind::ComplexSpecialLinear2),
            other => Err(format!("unknown factor kind {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorSpec {
    pub kind: FactorKind,
    pub dimension: usize,
    /// Identify g with -g.
    pub projectivized: bool,
}

impl FactorSpec {
    pub fn real(dimension: usize, projectivized: bool) -> Self {
        FactorSpec { kind: FactorKind::RealSpecialLinear, dimension, projectivized }
    }

    pub fn complex2(projectivized: bool) -> Self {
        FactorSpec { kind: FactorKind::ComplexSpecialLinear2, dimension: 2, projectivized }
    }

    pub fn rank(&self) -> usize {
        self.dimension - 1
    }

    pub fn is_complex(&self) -> bool {
        self.kind == FactorKind::ComplexSpecialLinear2
    }
}

/// User assertions about the group that cannot be decided from finitely many
/// matrices. Recorded, never checked.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assertions {
    pub zariski_dense: Option<bool>,
    pub anosov: Option<bool>,
    pub extra: Map<String, Value>,
}

/// One element of the product group: a matrix per factor.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTuple(pub Vec<Mat>);

impl MatrixTuple {
    pub fn identity(spec: &GroupSpec) -> Self {
        MatrixTuple(spec.factors.iter().map(|f| Mat::identity(f.dimension)).collect())
    }

    pub fn factors(&self) -> &[Mat] {
        &self.0
    }

    pub fn mul(&self, rhs: &MatrixTuple) -> MatrixTuple {
        MatrixTuple(self.0.iter().zip(&rhs.0).map(|(a, b)| a * b).collect())
    }

    pub fn inverse(&self) -> Result<MatrixTuple> {
        Ok(MatrixTuple(self.0.iter().map(|m| m.inverse()).collect::<Result<_>>()?))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(Mat::max_abs).fold(0.0, f64::max)
    }

    /// Entrywise distance, taking the minimum over the sign of projectivized factors.
    pub fn distance(&self, other: &MatrixTuple, spec: &GroupSpec) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .zip(&spec.factors)
            .map(|((a, b), f)| {
                let d = a.dist(b);
                if f.projectivized {
                    d.min(a.dist(&b.neg()))
                } else {
                    d
                }
            })
            .fold(0.0, f64::max)
    }

    fn check_overflow(&self) -> Result<()> {
        let max = self.max_abs();
        if !max.is_finite() || max > OVERFLOW_LIMIT {
            return Err(CensusError::Overflow { max });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupSpec {
    pub factors: Vec<FactorSpec>,
    /// generators[g][f] is the matrix of generator g in factor f.
    pub generators: Vec<MatrixTuple>,
    pub tolerance: f64,
    pub assertions: Assertions,
    normalized: Vec<MatrixTuple>,
    inverses: Vec<MatrixTuple>,
}

impl GroupSpec {
    /// Validates dimensions and determinants and precomputes inverses.
    pub fn new(factors: Vec<FactorSpec>, generators: Vec<MatrixTuple>, tolerance: f64) -> Result<Self> {
        if factors.is_empty() {
            return Err(CensusError::Validation("at least one factor is required".into()));
        }
        for (i, f) in factors.iter().enumerate() {
            if f.dimension < 2 {
                return Err(CensusError::Validation(format!("factors[{i}]: dimension must be >= 2")));
            }
            if f.is_complex() && f.dimension != 2 {
                return Err(CensusError::Validation(format!(
                    "factors[{i}]: complex factors must have dimension 2"
                )));
            }
        }
        if generators.len() < 2 {
            return Err(CensusError::Validation(format!(
                "need at least 2 generators, got {}",
                generators.len()
            )));
        }
        if generators.len() > 26 {
            return Err(CensusError::Validation("at most 26 generators are supported".into()));
        }
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(CensusError::Validation(format!("tolerance must be positive, got {tolerance}")));
        }
        for (g, tuple) in generators.iter().enumerate() {
            if tuple.0.len() != factors.len() {
                return Err(CensusError::Validation(format!(
                    "generators[{g}] has {} matrices for {} factors",
                    tuple.0.len(),
                    factors.len()
                )));
            }
            for (fi, (m, f)) in tuple.0.iter().zip(&factors).enumerate() {
                if m.dim() != f.dimension {
                    return Err(CensusError::Validation(format!(
                        "generators[{g}][{fi}] is {}x{}, factor dimension is {}",
                        m.dim(),
                        m.dim(),
                        f.dimension
                    )));
                }
                if !f.is_complex() && !m.is_real() {
                    return Err(CensusError::Validation(format!(
                        "generators[{g}][{fi}] has complex entries in a real factor"
                    )));
                }
                if !m.is_finite() {
                    return Err(CensusError::Validation(format!("generators[{g}][{fi}] has non-finite entries")));
                }
                let det = m.det();
                if (det - ONE).norm() > tolerance {
                    return Err(CensusError::Validation(format!(
                        "generators[{g}][{fi}] has determinant {} (off by {:.3e} > tolerance {tolerance:e})",
                        fmt_complex(det),
                        (det - ONE).norm()
                    )));
                }
            }
        }
        let normalized: Vec<MatrixTuple> =
            generators.iter().map(|t| MatrixTuple(t.0.iter().map(Mat::renormalize_det).collect())).collect();
        let inverses = normalized.iter().map(MatrixTuple::inverse).collect::<Result<Vec<_>>>()?;
        Ok(GroupSpec { factors, generators, tolerance, assertions: Assertions::default(), normalized, inverses })
    }

    pub fn with_assertions(mut self, assertions: Assertions) -> Self {
        self.assertions = assertions;
        self
    }

    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    /// Total real rank: sum of (d_f - 1).
    pub fn rank(&self) -> usize {
        self.factors.iter().map(FactorSpec::rank).sum()
    }

    /// Length of the concatenated per-factor coordinate vector.
    pub fn ambient_dim(&self) -> usize {
        self.factors.iter().map(|f| f.dimension).sum()
    }

    pub fn factor_dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dimension).collect()
    }

    pub fn letter_matrix(&self, l: Letter) -> &MatrixTuple {
        if l.inverse {
            &self.inverses[l.generator as usize]
        } else {
            &self.normalized[l.generator as usize]
        }
    }

    pub fn all_sl2(&self) -> bool {
        self.factors.iter().all(|f| f.dimension == 2)
    }
}

fn fmt_complex(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

/// A generator or its inverse. Letters are totally ordered by
/// (generator index, generator before inverse).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub generator: u8,
    pub inverse: bool,
}

impl Letter {
    pub fn new(generator: usize, inverse: bool) -> Self {
        Letter { generator: generator as u8, inverse }
    }

    /// Dense code 2*generator + inverse; consistent with the letter order.
    #[inline]
    pub fn code(self) -> u8 {
        2 * self.generator + self.inverse as u8
    }

    #[inline]
    pub fn from_code(code: u8) -> Self {
        Letter { generator: code / 2, inverse: code % 2 == 1 }
    }

    #[inline]
    pub fn inv(self) -> Self {
        Letter { generator: self.generator, inverse: !self.inverse }
    }

    /// Signed 1-based integer: +(g+1) for the generator, -(g+1) for its inverse.
    pub fn signed(self) -> i32 {
        let g = self.generator as i32 + 1;
        if self.inverse {
            -g
        } else {
            g
        }
    }

    pub fn from_signed(v: i32) -> Option<Self> {
        if v == 0 || v.unsigned_abs() > 26 {
            return None;
        }
        Some(Letter::new(v.unsigned_abs() as usize - 1, v < 0))
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = (b'a' + self.generator) as char;
        if self.inverse {
            write!(f, "{c}'")
        } else {
            write!(f, "{c}")
        }
    }
}

/// A freely reduced word.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inv()).collect())
    }

    /// Concatenate and reduce.
    pub fn concat(&self, other: &Word) -> Word {
        reduce_word(self.0.iter().chain(&other.0).copied())
    }

    pub fn is_reduced(letters: &[Letter]) -> bool {
        letters.windows(2).all(|w| w[0] != w[1].inv())
    }

    /// Space separated signed integers, the census CSV encoding.
    pub fn to_signed_string(&self) -> String {
        self.0.iter().map(|l| l.signed().to_string()).collect::<Vec<_>>().join(" ")
    }

    pub fn parse_signed(s: &str) -> Result<Word> {
        let mut letters = Vec::new();
        for tok in s.split_whitespace() {
            let v: i32 = tok.parse().map_err(|_| CensusError::parse("word", format!("bad letter {tok:?}")))?;
            letters.push(Letter::from_signed(v).ok_or_else(|| CensusError::parse("word", format!("bad letter {tok:?}")))?);
        }
        Ok(reduce_word(letters))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = CensusError;

    /// Parses `a b' c` (apostrophe marks an inverse). Whitespace between
    /// letters is optional.
    fn from_str(s: &str) -> Result<Word> {
        let mut letters = Vec::new();
        let mut chars = s.chars().peekable();
        while let Some(c) = chars.next() {
            if c.is_whitespace() {
                continue;
            }
            if !c.is_ascii_lowercase() {
                return Err(CensusError::parse("word", format!("unexpected character {c:?}")));
            }
            let inverse = chars.peek() == Some(&'\'');
            if inverse {
                chars.next();
            }
            letters.push(Letter::new((c as u8 - b'a') as usize, inverse));
        }
        Ok(reduce_word(letters))
    }
}

/// Free reduction: cancels adjacent inverse pairs until none remain.
pub fn reduce_word<I: IntoIterator<Item = Letter>>(raw: I) -> Word {
    let mut out: Vec<Letter> = Vec::new();
    for l in raw {
        if out.last() == Some(&l.inv()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    Word(out)
}

impl From<Vec<Letter>> for Word {
    fn from(v: Vec<Letter>) -> Self {
        reduce_word(v)
    }
}

/// Product of the generator matrices, left to right. Empty word gives the identity.
pub fn evaluate_word(spec: &GroupSpec, w: &Word) -> Result<MatrixTuple> {
    evaluate_letters(spec, w.letters())
}

pub fn evaluate_letters(spec: &GroupSpec, letters: &[Letter]) -> Result<MatrixTuple> {
    for l in letters {
        if l.generator as usize >= spec.generator_count() {
            return Err(CensusError::Validation(format!(
                "letter {l} references generator {} of {}",
                l.generator,
                spec.generator_count()
            )));
        }
    }
    let mut acc = match letters.first() {
        None => return Ok(MatrixTuple::identity(spec)),
        Some(&l) => spec.letter_matrix(l).clone(),
    };
    for &l in &letters[1..] {
        acc = acc.mul(spec.letter_matrix(l));
        acc.check_overflow()?;
    }
    Ok(acc)
}

/// Depth-first walk over all nonempty reduced words of length <= `max_len`
/// whose first letter is `first`, reusing prefix products.
pub fn walk_reduced_words_from<F>(spec: &GroupSpec, first: Letter, max_len: usize, visit: &mut F) -> Result<()>
where
    F: FnMut(&[Letter], &MatrixTuple),
{
    if max_len == 0 {
        return Ok(());
    }
    let alphabet: Vec<Letter> = (0..2 * spec.generator_count() as u8).map(Letter::from_code).collect();
    let mut word = vec![first];
    let mut stack = vec![spec.letter_matrix(first).clone()];
    visit(&word, &stack[0]);
    // iterative DFS: next-letter index per depth
    let mut next_idx = vec![0usize];
    while let Some(idx) = next_idx.last_mut() {
        if word.len() >= max_len || *idx >= alphabet.len() {
            next_idx.pop();
            word.pop();
            stack.pop();
            continue;
        }
        let l = alphabet[*idx];
        *idx += 1;
        if l == word.last().unwrap().inv() {
            continue;
        }
        let m = stack.last().unwrap().mul(spec.letter_matrix(l));
        m.check_overflow()?;
        word.push(l);
        visit(&word, &m);
        stack.push(m);
        next_idx.push(0);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// JSON configuration

/// Parse and validate a group configuration document.
pub fn parse_group_config(text: &str) -> Result<GroupSpec> {
    let root: Value = serde_json::from_str(text).map_err(|e| CensusError::parse("$", e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| CensusError::parse("$", "expected an object"))?;

    let factors_v = obj.get("factors").ok_or_else(|| CensusError::parse("factors", "missing"))?;
    let factors_a = factors_v.as_array().ok_or_else(|| CensusError::parse("factors", "expected an array"))?;
    let mut factors = Vec::new();
    for (i, f) in factors_a.iter().enumerate() {
        let path = format!("factors[{i}]");
        let fo = f.as_object().ok_or_else(|| CensusError::parse(&path, "expected an object"))?;
        let kind_s = fo
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| CensusError::parse(format!("{path}.kind"), "missing or not a string"))?;
        let kind = FactorKind::from_str(kind_s).map_err(|e| CensusError::parse(format!("{path}.kind"), e))?;
        let dimension = match fo.get("dimension") {
            None if kind == FactorKind::ComplexSpecialLinear2 => 2,
            None => return Err(CensusError::parse(format!("{path}.dimension"), "missing")),
            Some(v) => v
                .as_u64()
                .ok_or_else(|| CensusError::parse(format!("{path}.dimension"), "expected a positive integer"))?
                as usize,
        };
        let projectivized = match fo.get("projectivized") {
            None => false,
            Some(v) => v
                .as_bool()
                .ok_or_else(|| CensusError::parse(format!("{path}.projectivized"), "expected a boolean"))?,
        };
        factors.push(FactorSpec { kind, dimension, projectivized });
    }

    let gens_v = obj.get("generators").ok_or_else(|| CensusError::parse("generators", "missing"))?;
    let gens_a = gens_v.as_array().ok_or_else(|| CensusError::parse("generators", "expected an array"))?;
    let mut generators = Vec::new();
    for (g, tuple_v) in gens_a.iter().enumerate() {
        let path = format!("generators[{g}]");
        let tuple_a = tuple_v.as_array().ok_or_else(|| CensusError::parse(&path, "expected an array of matrices"))?;
        if tuple_a.len() != factors.len() {
            return Err(CensusError::parse(
                &path,
                format!("expected {} matrices (one per factor), got {}", factors.len(), tuple_a.len()),
            ));
        }
        let mut mats = Vec::new();
        for (fi, (mv, f)) in tuple_a.iter().zip(&factors).enumerate() {
            mats.push(parse_matrix(mv, f.dimension, &format!("{path}[{fi}]"))?);
        }
        generators.push(MatrixTuple(mats));
    }

    let tolerance = match obj.get("tolerance") {
        None | Some(Value::Null) => DEFAULT_TOLERANCE,
        Some(v) => v.as_f64().ok_or_else(|| CensusError::parse("tolerance", "expected a number"))?,
    };

    let mut assertions = Assertions::default();
    if let Some(meta) = obj.get("metadata") {
        let mo = meta.as_object().ok_or_else(|| CensusError::parse("metadata", "expected an object"))?;
        for (k, v) in mo {
            match k.as_str() {
                "zariski_dense" => {
                    assertions.zariski_dense =
                        Some(v.as_bool().ok_or_else(|| CensusError::parse("metadata.zariski_dense", "expected a boolean"))?)
                }
                "anosov" => {
                    assertions.anosov =
                        Some(v.as_bool().ok_or_else(|| CensusError::parse("metadata.anosov", "expected a boolean"))?)
                }
                _ => {
                    assertions.extra.insert(k.clone(), v.clone());
                }
            }
        }
    }

    Ok(GroupSpec::new(factors, generators, tolerance)?.with_assertions(assertions))
}

fn parse_entry(v: &Value, path: &str) -> Result<C64> {
    match v {
        Value::Number(n) => Ok(C64::new(n.as_f64().ok_or_else(|| CensusError::parse(path, "number out of range"))?, 0.0)),
        Value::Array(pair) if pair.len() == 2 => {
            let re = pair[0].as_f64().ok_or_else(|| CensusError::parse(format!("{path}[0]"), "expected a number"))?;
            let im = pair[1].as_f64().ok_or_else(|| CensusError::parse(format!("{path}[1]"), "expected a number"))?;
            Ok(C64::new(re, im))
        }
        _ => Err(CensusError::parse(path, "expected a number or a [re, im] pair")),
    }
}

/// Accepts nested rows `[[a, b], [c, d]]` or a flat row-major list `[a, b, c, d]`.
fn parse_matrix(v: &Value, dim: usize, path: &str) -> Result<Mat> {
    let arr = v.as_array().ok_or_else(|| CensusError::parse(path, "expected a matrix"))?;
    let is_nested = arr.len() == dim && arr.iter().all(|r| r.as_array().is_some_and(|r| r.len() == dim));
    let mut entries = Vec::with_capacity(dim * dim);
    if is_nested {
        for (i, row) in arr.iter().enumerate() {
            for (j, e) in row.as_array().unwrap().iter().enumerate() {
                entries.push(parse_entry(e, &format!("{path}[{i}][{j}]"))?);
            }
        }
    } else if arr.len() == dim * dim {
        for (k, e) in arr.iter().enumerate() {
            entries.push(parse_entry(e, &format!("{path}[{k}]"))?);
        }
    } else {
        return Err(CensusError::parse(path, format!("expected a {dim}x{dim} matrix")));
    }
    Ok(Mat::from_complex(dim, &entries))
}

fn entry_to_json(z: C64, complex: bool) -> Value {
    if complex {
        json!([z.re, z.im])
    } else {
        json!(z.re)
    }
}

/// Serialize back to the configuration schema (nested rows).
pub fn group_config_to_json(spec: &GroupSpec) -> Value {
    let factors: Vec<Value> = spec
        .factors
        .iter()
        .map(|f| json!({"kind": f.kind.as_str(), "dimension": f.dimension, "projectivized": f.projectivized}))
        .collect();
    let generators: Vec<Value> = spec
        .generators
        .iter()
        .map(|t| {
            Value::Array(
                t.0.iter()
                    .zip(&spec.factors)
                    .map(|(m, f)| {
                        let n = m.dim();
                        Value::Array(
                            (0..n)
                                .map(|i| Value::Array((0..n).map(|j| entry_to_json(m[(i, j)], f.is_complex())).collect()))
                                .collect(),
                        )
                    })
                    .collect(),
            )
        })
        .collect();
    let mut root = json!({"factors": factors, "generators": generators, "tolerance": spec.tolerance});
    let a = &spec.assertions;
    if a.zariski_dense.is_some() || a.anosov.is_some() || !a.extra.is_empty() {
        let mut meta = a.extra.clone();
        if let Some(z) = a.zariski_dense {
            meta.insert("zariski_dense".into(), json!(z));
        }
        if let Some(z) = a.anosov {
            meta.insert("anosov".into(), json!(z));
        }
        root["metadata"] = Value::Object(meta);
    }
    root
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn diag_spec() -> GroupSpec {
        let a = MatrixTuple(vec![Mat::diag(&[c(2.0), c(0.5)])]);
        let b = MatrixTuple(vec![Mat::m2(c(2.0), c(1.0), c(1.0), c(1.0))]);
        GroupSpec::new(vec![FactorSpec::real(2, false)], vec![a, b], 1e-10).unwrap()
    }

    fn l(g: usize, inv: bool) -> Letter {
        Letter::new(g, inv)
    }

    #[test]
    fn reduce_cancels() {
        assert!(reduce_word([l(0, false), l(0, true)]).is_empty());
        let w = reduce_word([l(0, false), l(1, false), l(1, true), l(0, false)]);
        assert_eq!(w.letters(), &[l(0, false), l(0, false)]);
    }

    /// Repeated-scan oracle: remove the first adjacent inverse pair until none remain.
    fn reduce_oracle(mut v: Vec<Letter>) -> Vec<Letter> {
        loop {
            match v.windows(2).position(|w| w[0] == w[1].inv()) {
                Some(i) => {
                    v.drain(i..i + 2);
                }
                None => return v,
            }
        }
    }

    proptest! {
        #[test]
        fn reduce_matches_oracle(codes in prop::collection::vec(0u8..4, 0..20)) {
            let raw: Vec<Letter> = codes.iter().map(|&c| Letter::from_code(c)).collect();
            let w = reduce_word(raw.clone());
            prop_assert!(Word::is_reduced(w.letters()));
            prop_assert_eq!(w.letters(), &reduce_oracle(raw.clone())[..]);
            prop_assert_eq!(w.len() % 2, raw.len() % 2);
            prop_assert_eq!(reduce_word(w.letters().to_vec()), w);
        }

        #[test]
        fn word_times_inverse_is_identity(codes in prop::collection::vec(0u8..4, 1..12)) {
            let spec = diag_spec();
            let w = reduce_word(codes.iter().map(|&c| Letter::from_code(c)));
            let ww = evaluate_letters(&spec, &[w.letters(), w.inverse().letters()].concat()).unwrap();
            prop_assert!(ww.distance(&MatrixTuple::identity(&spec), &spec) < 1e-8 * (1.0 + evaluate_word(&spec, &w).unwrap().max_abs().powi(2)));
        }

        #[test]
        fn evaluation_is_multiplicative(a in prop::collection::vec(0u8..4, 1..7), b in prop::collection::vec(0u8..4, 1..7)) {
            let spec = diag_spec();
            let u = reduce_word(a.iter().map(|&c| Letter::from_code(c)));
            let v = reduce_word(b.iter().map(|&c| Letter::from_code(c)));
            prop_assume!(!u.is_empty() && !v.is_empty());
            prop_assume!(u.letters().last().unwrap().inv() != v.letters()[0]);
            let uv = evaluate_word(&spec, &u.concat(&v)).unwrap();
            let prod = evaluate_word(&spec, &u).unwrap().mul(&evaluate_word(&spec, &v).unwrap());
            prop_assert!(uv.distance(&prod, &spec) <= 1e-9 * uv.max_abs());
        }
    }

    #[test]
    fn evaluate_examples() {
        let spec = diag_spec();
        assert_eq!(evaluate_word(&spec, &Word::empty()).unwrap(), MatrixTuple::identity(&spec));
        assert_eq!(evaluate_word(&spec, &"a".parse().unwrap()).unwrap(), spec.generators[0]);
        let aa = evaluate_word(&spec, &"a a".parse().unwrap()).unwrap();
        assert_eq!(aa.0[0], Mat::diag(&[c(4.0), c(0.25)]));
    }

    #[test]
    fn overflow_is_reported() {
        let big = MatrixTuple(vec![Mat::diag(&[c(1e30), c(1e-30)])]);
        let spec = GroupSpec::new(vec![FactorSpec::real(2, false)], vec![big.clone(), big], 1e-10).unwrap();
        let w = reduce_word(vec![l(0, false); 8]);
        assert!(matches!(evaluate_word(&spec, &w), Err(CensusError::Overflow { .. })));
    }

    #[test]
    fn word_text_roundtrip() {
        let w: Word = "a b' c".parse().unwrap();
        assert_eq!(w.to_string(), "a b' c");
        assert_eq!(w.to_signed_string(), "1 -2 3");
        assert_eq!(Word::parse_signed("1 -2 3").unwrap(), w);
        assert_eq!("ab'c".parse::<Word>().unwrap(), w);
    }

    const COMPLEX_CFG: &str = r#"{
        "factors": [{"kind": "complex-special-linear-2", "dimension": 2, "projectivized": true}],
        "generators": [
            [[[[2, 0], [0, 0]], [[0, 0], [0.5, 0]]]],
            [[[[1, 0], [1, 0]], [[0, 0], [1, 0]]]]
        ],
        "tolerance": 1e-10
    }"#;

    #[test]
    fn parse_complex_config() {
        // the parabolic second generator is accepted: only determinants are checked
        let spec = parse_group_config(COMPLEX_CFG).unwrap();
        assert_eq!(spec.generator_count(), 2);
        assert_eq!(spec.rank(), 1);
        assert_eq!(spec.generators[0].0[0], Mat::diag(&[c(2.0), c(0.5)]));
    }

    #[test]
    fn bad_determinant_reports_value() {
        let cfg = r#"{"factors":[{"kind":"real-special-linear","dimension":2}],
            "generators":[[[[2,0],[0,1]]],[[[1,1],[0,1]]]]}"#;
        let err = parse_group_config(cfg).unwrap_err();
        assert!(matches!(err, CensusError::Validation(_)));
        assert!(err.to_string().contains("determinant 2"), "{err}");
    }

    #[test]
    fn schema_errors_name_path() {
        let cfg = r#"{"factors":[{"kind":"real-special-linear","dimension":2}],
            "generators":[[[[1,0],[0,1]]],[[[1,"x"],[0,1]]]]}"#;
        match parse_group_config(cfg).unwrap_err() {
            CensusError::Parse { path, .. } => assert_eq!(path, "generators[1][0][0][1]"),
            e => panic!("unexpected {e}"),
        }
        let cfg = r#"{"factors":[{"kind":"quaternionic","dimension":2}], "generators": []}"#;
        match parse_group_config(cfg).unwrap_err() {
            CensusError::Parse { path, .. } => assert_eq!(path, "factors[0].kind"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn complex_factor_requires_dimension_two() {
        let cfg = r#"{"factors":[{"kind":"complex-special-linear-2","dimension":3}],
            "generators":[[[[1,0,0],[0,1,0],[0,0,1]]],[[[1,0,0],[0,1,0],[0,0,1]]]]}"#;
        assert!(parse_group_config(cfg).is_err());
    }

    #[test]
    fn decimal_parsing_is_correctly_rounded() {
        // values whose correctly rounded double differs from naive accumulation
        let cases = [
            ("0.1", 0.1f64),
            ("2.2250738585072011e-308", 2.2250738585072011e-308),
            ("9007199254740993", 9007199254740992.0),
            ("0.30000000000000004", 0.30000000000000004),
            ("1.7976931348623157e308", f64::MAX),
            ("7.2057594037927933e16", 72057594037927936.0),
        ];
        for (text, want) in cases {
            let v: Value = serde_json::from_str(text).unwrap();
            assert_eq!(v.as_f64().unwrap().to_bits(), want.to_bits(), "{text}");
        }
    }

    #[test]
    fn config_roundtrip() {
        let spec = parse_group_config(COMPLEX_CFG).unwrap();
        let text = serde_json::to_string(&group_config_to_json(&spec)).unwrap();
        assert_eq!(parse_group_config(&text).unwrap(), spec);
    }

    #[test]
    fn walk_visits_all_reduced_words() {
        let spec = diag_spec();
        let mut count = 0;
        for code in 0..4 {
            walk_reduced_words_from(&spec, Letter::from_code(code), 4, &mut |w, m| {
                count += 1;
                let direct = evaluate_letters(&spec, w).unwrap();
                assert!(direct.distance(m, &spec) < 1e-9 * direct.max_abs());
            })
            .unwrap();
        }
        // 4 + 12 + 36 + 108
        assert_eq!(count, 160);
    }
}
