//! Parsing of the inline-JSON / `@file` arguments.

use std::fs;

use anosov_census::cone::{LinearForm, NormKind, NormLike, QuadraticFormI};
use anosov_census::equidist::grid_from_range;
use anosov_census::{CensusError, GroupSpec, Result};
use serde_json::Value;

/// Inline JSON, or the contents of a file when prefixed with `@`.
pub fn load_json(arg: &str, what: &str) -> Result<Value> {
    let text = match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| CensusError::parse(what, format!("{path}: {e}")))?,
        None => arg.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| CensusError::parse(what, e.to_string()))
}

fn numbers(v: &Value, what: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| CensusError::parse(what, "expected an array of numbers"))?
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| CensusError::parse(what, "expected a number")))
        .collect()
}

fn root_pair(v: &Value, what: &str) -> Result<(usize, usize)> {
    let a = v.as_array().filter(|a| a.len() == 2).ok_or_else(|| CensusError::parse(what, "expected [factor, index]"))?;
    let get = |x: &Value| x.as_u64().map(|n| n as usize).ok_or_else(|| CensusError::parse(what, "expected an integer"));
    Ok((get(&a[0])?, get(&a[1])?))
}

/// A linear form: a coefficient array over the diagonal entries of all
/// factors, `{"coefficients": [...]}`, or `{"roots": [[factor, i], ...]}`
/// for a sum of simple roots.
pub fn parse_psi(spec: &GroupSpec, v: &Value) -> Result<LinearForm> {
    let form = if v.is_array() {
        LinearForm::new(numbers(v, "psi")?)
    } else if let Some(c) = v.get("coefficients") {
        LinearForm::new(numbers(c, "psi.coefficients")?)
    } else if let Some(r) = v.get("roots") {
        let roots = r
            .as_array()
            .ok_or_else(|| CensusError::parse("psi.roots", "expected an array"))?
            .iter()
            .map(|x| root_pair(x, "psi.roots"))
            .collect::<Result<Vec<_>>>()?;
        LinearForm::sum_of_roots(&spec.factor_dims(), &roots)?
    } else {
        return Err(CensusError::parse("psi", "expected coefficients or roots"));
    };
    if form.coefficients.len() != spec.ambient_dim() {
        return Err(CensusError::parse(
            "psi",
            format!("{} coefficients, expected {}", form.coefficients.len(), spec.ambient_dim()),
        ));
    }
    Ok(form)
}

/// The sum of all simple roots, positive on the open positive chamber.
pub fn default_psi(spec: &GroupSpec) -> Result<LinearForm> {
    let dims = spec.factor_dims();
    let roots: Vec<(usize, usize)> =
        dims.iter().enumerate().flat_map(|(f, &d)| (0..d - 1).map(move |i| (f, i))).collect();
    LinearForm::sum_of_roots(&dims, &roots)
}

/// `{"name": .., "kind": "lp"|"euclidean"|"weighted"|"linear", ...}`.
pub fn parse_norm(spec: &GroupSpec, v: &Value) -> Result<NormLike> {
    let kind = v.get("kind").and_then(Value::as_str).ok_or_else(|| CensusError::parse("norm.kind", "missing"))?;
    let name = v.get("name").and_then(Value::as_str).unwrap_or(kind).to_string();
    let kind = match kind {
        "euclidean" => NormKind::Lp { p: 2.0 },
        "lp" => NormKind::Lp {
            p: v.get("p").and_then(Value::as_f64).ok_or_else(|| CensusError::parse("norm.p", "missing"))?,
        },
        "weighted" => NormKind::WeightedEuclidean {
            weights: numbers(v.get("weights").unwrap_or(&Value::Null), "norm.weights")?,
        },
        "linear" => NormKind::Linear {
            coefficients: numbers(v.get("coefficients").unwrap_or(&Value::Null), "norm.coefficients")?,
        },
        other => return Err(CensusError::parse("norm.kind", format!("unknown kind {other:?}"))),
    };
    let len = match &kind {
        NormKind::WeightedEuclidean { weights } => Some(weights.len()),
        NormKind::Linear { coefficients } => Some(coefficients.len()),
        _ => None,
    };
    if len.is_some_and(|n| n != spec.ambient_dim()) {
        return Err(CensusError::parse("norm", format!("expected {} entries", spec.ambient_dim())));
    }
    if ["word", "length", "ell_psi"].contains(&name.as_str()) || name.starts_with("lambda_") || name.starts_with("hol_") {
        return Err(CensusError::parse("norm.name", format!("{name:?} clashes with a census column")));
    }
    NormLike::new(name, kind)
}

pub fn parse_i_form(v: &Value) -> Result<QuadraticFormI> {
    QuadraticFormI::from_json(v)
}

/// `T0:T1:STEP`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(CensusError::parse("grid", "expected T0:T1:STEP"));
    }
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| CensusError::parse("grid", format!("bad number {p:?}"))))
        .collect::<Result<Vec<_>>>()?;
    grid_from_range(nums[0], nums[1], nums[2])
}

/// `lo:hi` angle window.
pub fn parse_window(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once(':').ok_or_else(|| CensusError::parse("window", "expected lo:hi"))?;
    let num = |p: &str| p.trim().parse::<f64>().map_err(|_| CensusError::parse("window", format!("bad number {p:?}")));
    Ok((num(a)?, num(b)?))
}
