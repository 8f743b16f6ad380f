//! Ordered census tables and the statistics run on them: counting series
//! with prime-geodesic fits, holonomy uniformity, window counts, and the
//! comparison between linear and norm-like orderings.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::census::{canonical_form, for_each_class, CyclicWord, Shard};
use crate::cone::{LinearForm, NormLike, SampleSet};
use crate::error::{CensusError, Result};
use crate::group::{evaluate_letters, walk_reduced_words_from, GroupSpec, Letter, Word};
use crate::invariants::{cartan, holonomy_pair, jordan_pair, CartanPoint, FactorHolonomy, Holonomy, DEFAULT_MARGIN};

/// One primitive conjugacy class with its invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct CensusRecord {
    pub word: CyclicWord,
    pub length: usize,
    pub lambda: CartanPoint,
    pub ell_psi: f64,
    /// Values of the registered norm-like functions, in `Census::norm_names` order.
    pub n_values: Vec<f64>,
    pub holonomy: Holonomy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Census {
    pub records: Vec<CensusRecord>,
    pub norm_names: Vec<String>,
    pub max_length: usize,
    /// Classes dropped because they failed the loxodromy margin.
    pub excluded: usize,
}

impl Census {
    /// Jordan projections of all records, with the maximal-length classes as frontier.
    pub fn sample_set(&self) -> SampleSet {
        SampleSet {
            points: self.records.iter().map(|r| r.lambda.flat()).collect(),
            frontier: self.records.iter().filter(|r| r.length == self.max_length).map(|r| r.lambda.flat()).collect(),
        }
    }

    pub fn ell_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.ell_psi).collect()
    }

    /// Smallest ell_psi among classes of maximal length; the psi-ordered count
    /// is treated as complete below it.
    pub fn completeness(&self) -> f64 {
        self.records
            .iter()
            .filter(|r| r.length == self.max_length)
            .map(|r| r.ell_psi)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn norm_index(&self, name: &str) -> Result<usize> {
        self.norm_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| CensusError::Validation(format!("census has no norm column {name:?}")))
    }

    pub fn norm_values(&self, index: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.n_values[index]).collect()
    }
}

fn needs_inverse(spec: &GroupSpec) -> bool {
    spec.factors.iter().any(|f| f.dimension >= 3)
}

fn record_for(
    spec: &GroupSpec,
    word: CyclicWord,
    psi: &LinearForm,
    norms: &[NormLike],
) -> Result<Option<CensusRecord>> {
    let g = evaluate_letters(spec, word.letters())?;
    let ginv = if needs_inverse(spec) {
        let inv: Vec<Letter> = word.letters().iter().rev().map(|l| l.inv()).collect();
        Some(evaluate_letters(spec, &inv)?)
    } else {
        None
    };
    let lambda = jordan_pair(spec, &g, ginv.as_ref())?;
    if lambda.min_gap() <= DEFAULT_MARGIN {
        return Ok(None);
    }
    let flat = lambda.flat();
    let ell_psi = psi.eval(&flat);
    if !(ell_psi > 0.0) {
        return Err(CensusError::NotPositiveOnCone { value: ell_psi });
    }
    let holonomy = holonomy_pair(spec, &g, ginv.as_ref())?;
    let n_values = norms.iter().map(|n| n.value(&flat)).collect();
    Ok(Some(CensusRecord { length: word.len(), word, lambda, ell_psi, n_values, holonomy }))
}

fn sort_records(records: &mut [CensusRecord]) {
    records.sort_by(|a, b| a.length.cmp(&b.length).then_with(|| a.word.cmp(&b.word)));
}

/// One record per primitive class of length at most `max_len`, in
/// (length, word) order. Shards run in parallel; the merged table does not
/// depend on the shard count.
pub fn build_census(
    spec: &GroupSpec,
    max_len: usize,
    psi: &LinearForm,
    norms: &[NormLike],
    shards: usize,
) -> Result<Census> {
    if max_len < 1 {
        return Err(CensusError::Validation("maximum length must be at least 1".into()));
    }
    if psi.coefficients.len() != spec.ambient_dim() {
        return Err(CensusError::Validation(format!(
            "psi has {} coefficients, expected {}",
            psi.coefficients.len(),
            spec.ambient_dim()
        )));
    }
    let shards = shards.max(1);
    let k = spec.generator_count();
    let parts: Vec<Result<(Vec<CensusRecord>, usize)>> = (0..shards)
        .into_par_iter()
        .map(|i| {
            let shard = Shard::new(i, shards)?;
            let mut words = Vec::new();
            for_each_class(k, max_len, true, shard, |c, _| words.push(c));
            let mut out = Vec::with_capacity(words.len());
            let mut excluded = 0;
            for w in words {
                match record_for(spec, w, psi, norms)? {
                    Some(r) => out.push(r),
                    None => excluded += 1,
                }
            }
            Ok((out, excluded))
        })
        .collect();
    let mut records = Vec::new();
    let mut excluded = 0;
    for p in parts {
        let (r, e) = p?;
        records.extend(r);
        excluded += e;
    }
    sort_records(&mut records);
    Ok(Census { records, norm_names: norms.iter().map(|n| n.name.clone()).collect(), max_length: max_len, excluded })
}

/// Values f(mu(g)) over all nonempty reduced words of length at most `max_len`.
#[derive(Clone, Debug, PartialEq)]
pub struct CartanSample {
    pub values: Vec<f64>,
    /// Minimum over the words of maximal length.
    pub frontier_min: f64,
}

pub fn cartan_census<F>(spec: &GroupSpec, max_len: usize, f: F) -> Result<CartanSample>
where
    F: Fn(&CartanPoint) -> f64 + Sync,
{
    let letters: Vec<Letter> = (0..2 * spec.generator_count() as u8).map(Letter::from_code).collect();
    let parts: Vec<Result<(Vec<f64>, f64)>> = letters
        .par_iter()
        .map(|&first| {
            let mut values = Vec::new();
            let mut frontier = f64::INFINITY;
            let mut failure = None;
            walk_reduced_words_from(spec, first, max_len, &mut |w, g| {
                if failure.is_some() {
                    return;
                }
                match cartan(spec, g) {
                    Ok(mu) => {
                        let v = f(&mu);
                        if w.len() == max_len {
                            frontier = frontier.min(v);
                        }
                        values.push(v);
                    }
                    Err(e) => failure = Some(e),
                }
            })?;
            match failure {
                Some(e) => Err(e),
                None => Ok((values, frontier)),
            }
        })
        .collect();
    let mut values = Vec::new();
    let mut frontier_min = f64::INFINITY;
    for p in parts {
        let (v, m) = p?;
        values.extend(v);
        frontier_min = frontier_min.min(m);
    }
    Ok(CartanSample { values, frontier_min })
}

/// Counts of one ordering on a threshold grid with the fitted exponent.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountSeries {
    pub ordering: String,
    pub grid: Vec<f64>,
    pub counts: Vec<u64>,
    /// Fitted exponent; absent when fewer than two grid points are populated.
    pub delta: Option<f64>,
    /// RMS residual of log N(T) against log(e^{dT} / (dT)).
    pub residual: Option<f64>,
    /// N(T) dT e^{-dT} per grid point.
    pub ratios: Vec<Option<f64>>,
}

/// Threshold grid T0, T0 + step, ..., up to T1 inclusive.
pub fn grid_from_range(t0: f64, t1: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(CensusError::Range(format!("bad grid {t0}:{t1}:{step}")));
    }
    let n = ((t1 - t0) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| t0 + step * i as f64).collect())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(CensusError::Range("empty threshold grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CensusError::Range("threshold grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

fn count_le(sorted: &[f64], t: f64) -> u64 {
    sorted.partition_point(|&v| v <= t) as u64
}

fn pg_residuals(delta: f64, pts: &[(f64, f64)]) -> f64 {
    pts.iter().map(|&(t, ln)| (ln - delta * t + (delta * t).ln()).powi(2)).sum()
}

/// One-parameter fit of log N(T) = dT - log(dT) over points (T, log N).
/// Returns (d, rms residual).
pub fn fit_prime_geodesic(pts: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pts.len() < 2 {
        return Err(CensusError::Range("need at least two populated grid points".into()));
    }
    // coarse log-spaced scan, then golden-section refinement
    let mut best = (f64::INFINITY, 0.0);
    let mut d = 1e-3;
    while d < 1e3 {
        let s = pg_residuals(d, pts);
        if s < best.0 {
            best = (s, d);
        }
        d *= 1.05;
    }
    let (mut lo, mut hi) = (best.1 / 1.05, best.1 * 1.05);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if pg_residuals(a, pts) < pg_residuals(b, pts) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let delta = 0.5 * (lo + hi);
    Ok((delta, (pg_residuals(delta, pts) / pts.len() as f64).sqrt()))
}

pub fn count_series(values: &[f64], ordering: &str, grid: &[f64]) -> Result<CountSeries> {
    check_grid(grid)?;
    let s = sorted(values);
    let counts: Vec<u64> = grid.iter().map(|&t| count_le(&s, t)).collect();
    let pts: Vec<(f64, f64)> =
        grid.iter().zip(&counts).filter(|&(&t, &c)| c > 0 && t > 0.0).map(|(&t, &c)| (t, (c as f64).ln())).collect();
    let fit = if pts.len() >= 2 { Some(fit_prime_geodesic(&pts)?) } else { None };
    let ratios = grid
        .iter()
        .zip(&counts)
        .map(|(&t, &c)| match fit {
            Some((d, _)) if c > 0 => Some(c as f64 * d * t * (-d * t).exp()),
            _ => None,
        })
        .collect();
    Ok(CountSeries {
        ordering: ordering.to_string(),
        grid: grid.to_vec(),
        counts,
        delta: fit.map(|f| f.0),
        residual: fit.map(|f| f.1),
        ratios,
    })
}

/// (max - min) / mean of the given ratios.
pub fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (max - min) / mean
}

/// Kolmogorov-Smirnov distance of angles in [0, 2pi) to the uniform law.
pub fn ks_uniform(angles: &[f64]) -> f64 {
    let (plus, minus) = ks_sides(angles);
    plus.max(minus)
}

/// Kuiper's V = D+ + D-, invariant under rotations of the circle.
pub fn kuiper_uniform(angles: &[f64]) -> f64 {
    let (plus, minus) = ks_sides(angles);
    plus + minus
}

fn ks_sides(angles: &[f64]) -> (f64, f64) {
    let u = sorted(&angles.iter().map(|a| a.rem_euclid(TAU) / TAU).collect::<Vec<_>>());
    let n = u.len() as f64;
    let mut plus: f64 = 0.0;
    let mut minus: f64 = 0.0;
    for (i, x) in u.iter().enumerate() {
        plus = plus.max((i + 1) as f64 / n - x);
        minus = minus.max(x - i as f64 / n);
    }
    (plus, minus)
}

pub const DISCREPANCY_GRID: usize = 64;

/// Star discrepancy over the anchored boxes [0, i/64) x [0, j/64).
pub fn star_discrepancy(pairs: &[(f64, f64)]) -> f64 {
    let g = DISCREPANCY_GRID;
    let mut hist = vec![vec![0u64; g]; g];
    for &(a, b) in pairs {
        let i = ((a.rem_euclid(TAU) / TAU * g as f64) as usize).min(g - 1);
        let j = ((b.rem_euclid(TAU) / TAU * g as f64) as usize).min(g - 1);
        hist[i][j] += 1;
    }
    let n = pairs.len() as f64;
    let mut cum = vec![vec![0u64; g + 1]; g + 1];
    let mut worst: f64 = 0.0;
    for i in 0..g {
        for j in 0..g {
            cum[i + 1][j + 1] = hist[i][j] + cum[i][j + 1] + cum[i + 1][j] - cum[i][j];
            let vol = ((i + 1) * (j + 1)) as f64 / (g * g) as f64;
            worst = worst.max((cum[i + 1][j + 1] as f64 / n - vol).abs());
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UniformityThresholds {
    pub ks: f64,
    pub discrepancy: f64,
}

impl Default for UniformityThresholds {
    fn default() -> Self {
        UniformityThresholds { ks: 0.05, discrepancy: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformityReport {
    pub threshold: f64,
    pub sample_size: usize,
    pub components: Vec<usize>,
    pub ks: Vec<f64>,
    pub kuiper: Vec<f64>,
    /// 95% critical value 1.36 / sqrt(n) of the one-sample KS test.
    pub ks_critical: f64,
    /// Two components only.
    pub discrepancy: Option<f64>,
    /// Two components only: KS distance of the angle difference to uniform.
    pub difference_ks: Option<f64>,
    pub uniform: bool,
}

pub const MIN_UNIFORMITY_SAMPLES: usize = 200;

fn angle_component(r: &CensusRecord, c: usize) -> Result<f64> {
    match r.holonomy.factors.get(c) {
        Some(FactorHolonomy::Angle(a)) => Ok(*a),
        Some(_) => Err(CensusError::Unsupported(format!(
            "holonomy factor {c} is sign-typed; use window counts over sign classes instead"
        ))),
        None => Err(CensusError::Validation(format!("no holonomy factor {c}"))),
    }
}

/// Uniformity statistics of the holonomy angles of the records with
/// ell_psi <= t, on one or two angle-typed factors.
pub fn holonomy_uniformity(
    records: &[CensusRecord],
    t: f64,
    components: &[usize],
    thresholds: UniformityThresholds,
) -> Result<UniformityReport> {
    if components.is_empty() || components.len() > 2 {
        return Err(CensusError::Validation("select one or two holonomy components".into()));
    }
    let below: Vec<&CensusRecord> = records.iter().filter(|r| r.ell_psi <= t).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(below.len()); components.len()];
    for r in &below {
        for (col, &c) in cols.iter_mut().zip(components) {
            col.push(angle_component(r, c)?);
        }
    }
    if below.len() < MIN_UNIFORMITY_SAMPLES {
        return Err(CensusError::InsufficientData { count: below.len(), needed: MIN_UNIFORMITY_SAMPLES });
    }
    let ks: Vec<f64> = cols.iter().map(|c| ks_uniform(c)).collect();
    let kuiper = cols.iter().map(|c| kuiper_uniform(c)).collect();
    let (discrepancy, difference_ks) = if cols.len() == 2 {
        let pairs: Vec<(f64, f64)> = cols[0].iter().copied().zip(cols[1].iter().copied()).collect();
        let diff: Vec<f64> = pairs.iter().map(|(a, b)| b - a).collect();
        (Some(star_discrepancy(&pairs)), Some(ks_uniform(&diff)))
    } else {
        (None, None)
    };
    let max_ks = ks.iter().copied().fold(0.0, f64::max);
    let uniform = max_ks <= thresholds.ks && discrepancy.is_none_or(|d| d <= thresholds.discrepancy);
    Ok(UniformityReport {
        threshold: t,
        sample_size: below.len(),
        components: components.to_vec(),
        ks,
        kuiper,
        ks_critical: 1.36 / (below.len() as f64).sqrt(),
        discrepancy,
        difference_ks,
        uniform,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowCount {
    pub threshold: f64,
    pub windows: Vec<(f64, f64)>,
    pub observed: u64,
    pub predicted: f64,
    /// Sum of 1 / ell_psi over the observed records.
    pub weighted_observed: f64,
}

/// Observed and predicted counts of records with ell_psi <= t whose angles
/// lie in the given windows [lo, hi), one window per component.
pub fn window_count(
    records: &[CensusRecord],
    t: f64,
    components: &[usize],
    windows: &[(f64, f64)],
    delta: f64,
) -> Result<WindowCount> {
    if windows.len() != components.len() {
        return Err(CensusError::Validation(format!(
            "{} windows for {} components",
            windows.len(),
            components.len()
        )));
    }
    for &(lo, hi) in windows {
        if !(0.0 <= lo && lo <= hi && hi <= TAU) {
            return Err(CensusError::Range(format!("angle window [{lo}, {hi}) is not inside [0, 2pi]")));
        }
    }
    if !(delta > 0.0) || !(t > 0.0) {
        return Err(CensusError::Range("window prediction needs positive delta and threshold".into()));
    }
    let mut observed = 0u64;
    let mut weighted = 0.0;
    for r in records.iter().filter(|r| r.ell_psi <= t) {
        let mut inside = true;
        for (&c, &(lo, hi)) in components.iter().zip(windows) {
            let a = angle_component(r, c)?;
            if !(a >= lo && (a < hi || hi == TAU)) {
                inside = false;
                break;
            }
        }
        if inside {
            observed += 1;
            weighted += 1.0 / r.ell_psi;
        }
    }
    let fraction: f64 = windows.iter().map(|(lo, hi)| (hi - lo) / TAU).product();
    let predicted = fraction * (delta * t).exp() / (delta * t);
    Ok(WindowCount { threshold: t, windows: windows.to_vec(), observed, predicted, weighted_observed: weighted })
}

/// Smallest kappa with ell_psi <= kappa N over the records.
pub fn comparison_constant(census: &Census, norm: usize) -> f64 {
    census.records.iter().map(|r| r.ell_psi / r.n_values[norm]).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormOrderCheck {
    pub norm: String,
    pub kappa: f64,
    pub grid: Vec<f64>,
    pub norm_counts: Vec<u64>,
    pub psi_counts: Vec<u64>,
    pub holds: bool,
}

/// Checks the monotone coupling N-count(T) <= psi-count(kappa T) on the grid.
pub fn norm_order_check(census: &Census, norm: usize, grid: &[f64]) -> Result<NormOrderCheck> {
    check_grid(grid)?;
    let kappa = comparison_constant(census, norm);
    let nv = sorted(&census.norm_values(norm));
    let pv = sorted(&census.ell_values());
    let norm_counts: Vec<u64> = grid.iter().map(|&t| count_le(&nv, t)).collect();
    let psi_counts: Vec<u64> = grid.iter().map(|&t| count_le(&pv, kappa * t)).collect();
    let holds = norm_counts.iter().zip(&psi_counts).all(|(a, b)| a <= b);
    Ok(NormOrderCheck { norm: census.norm_names[norm].clone(), kappa, grid: grid.to_vec(), norm_counts, psi_counts, holds })
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header of the census table for a group of the given shape.
pub fn csv_header(spec: &GroupSpec, norm_names: &[String]) -> Vec<String> {
    let mut h = vec!["word".to_string(), "length".to_string()];
    h.extend((0..spec.rank()).map(|i| format!("lambda_{i}")));
    h.push("ell_psi".to_string());
    h.extend(norm_names.iter().cloned());
    h.extend((0..spec.factors.len()).map(|i| format!("hol_{i}")));
    h
}

pub fn write_census_csv<W: Write>(spec: &GroupSpec, census: &Census, out: W) -> Result<()> {
    let io = |e: csv::Error| CensusError::Numeric(format!("write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(spec, &census.norm_names)).map_err(io)?;
    for r in &census.records {
        let mut row = vec![r.word.to_word().to_signed_string(), r.length.to_string()];
        row.extend(r.lambda.reduced().into_iter().map(fmt_f));
        row.push(fmt_f(r.ell_psi));
        row.extend(r.n_values.iter().map(|&v| fmt_f(v)));
        row.extend(r.holonomy.factors.iter().map(FactorHolonomy::to_field));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CensusError::Numeric(format!("write failed: {e}")))?;
    Ok(())
}

/// Reads a census table written by [`write_census_csv`]. Norm columns are
/// the ones between `ell_psi` and `hol_0`.
pub fn read_census_csv<R: Read>(spec: &GroupSpec, input: R) -> Result<Census> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| CensusError::parse("header", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| CensusError::parse(name, "missing column"))
    };
    let word_col = col("word")?;
    let len_col = col("length")?;
    let lambda_cols: Vec<usize> = (0..spec.rank()).map(|i| col(&format!("lambda_{i}"))).collect::<Result<_>>()?;
    let ell_col = col("ell_psi")?;
    let hol_cols: Vec<usize> = (0..spec.factors.len()).map(|i| col(&format!("hol_{i}"))).collect::<Result<_>>()?;
    let norm_cols: Vec<usize> = (ell_col + 1..hol_cols[0]).collect();
    let norm_names: Vec<String> = norm_cols.iter().map(|&i| header[i].clone()).collect();
    let dims = spec.factor_dims();
    let mut records = Vec::new();
    let mut max_length = 0;
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(|e| CensusError::parse(format!("row {}", line + 1), e.to_string()))?;
        let at = |c: usize, name: &str| -> Result<&str> {
            row.get(c).ok_or_else(|| CensusError::parse(format!("row {} {name}", line + 1), "missing field"))
        };
        let num = |c: usize| -> Result<f64> {
            let name = &header[c];
            at(c, name)?
                .trim()
                .parse::<f64>()
                .map_err(|_| CensusError::parse(format!("row {} {name}", line + 1), "expected a number"))
        };
        let word = canonical_form(&Word::parse_signed(at(word_col, "word")?)?)?;
        let length: usize = at(len_col, "length")?
            .trim()
            .parse()
            .map_err(|_| CensusError::parse(format!("row {} length", line + 1), "expected an integer"))?;
        let reduced: Vec<f64> = lambda_cols.iter().map(|&c| num(c)).collect::<Result<_>>()?;
        let holonomy = Holonomy {
            factors: hol_cols.iter().map(|&c| FactorHolonomy::parse_field(at(c, "hol")?)).collect::<Result<_>>()?,
        };
        max_length = max_length.max(length);
        records.push(CensusRecord {
            word,
            length,
            lambda: CartanPoint::from_reduced(&dims, &reduced),
            ell_psi: num(ell_col)?,
            n_values: norm_cols.iter().map(|&c| num(c)).collect::<Result<_>>()?,
            holonomy,
        });
    }
    Ok(Census { records, norm_names, max_length, excluded: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::census::class_count;
    use crate::fixtures::twisted_joining;
    use crate::invariants::opposition;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn schottky() -> GroupSpec {
        twisted_joining().unwrap()
    }

    fn psi() -> LinearForm {
        LinearForm::new(vec![0.5, -0.5, 0.5, -0.5])
    }

    #[test]
    fn census_has_one_record_per_primitive_class() {
        let spec = schottky();
        let c = build_census(&spec, 4, &psi(), &[], 1).unwrap();
        assert_eq!(c.records.len() as u64, class_count(2, 4, true).unwrap());
        assert_eq!(build_census(&spec, 1, &psi(), &[], 1).unwrap().records.len(), 4);
        assert!(c.records.iter().all(|r| r.ell_psi > 0.0));
        assert_eq!(c.excluded, 0);
    }

    #[test]
    fn census_independent_of_shards() {
        let spec = schottky();
        let norms = [NormLike::euclidean("l2")];
        let a = build_census(&spec, 6, &psi(), &norms, 1).unwrap();
        for s in [2, 3, 7] {
            assert_eq!(build_census(&spec, 6, &psi(), &norms, s).unwrap(), a);
        }
    }

    #[test]
    fn inverse_classes_related_by_opposition() {
        let spec = schottky();
        let c = build_census(&spec, 5, &psi(), &[], 1).unwrap();
        for r in c.records.iter().take(50) {
            let inv = r.word.inverse();
            let other = c.records.iter().find(|s| s.word == inv).unwrap();
            assert!(other.lambda.dist(&opposition(&spec, &r.lambda)) < 1e-9);
        }
    }

    #[test]
    fn csv_round_trip() {
        let spec = schottky();
        let c = build_census(&spec, 4, &psi(), &[NormLike::euclidean("l2")], 2).unwrap();
        let mut buf = Vec::new();
        write_census_csv(&spec, &c, &mut buf).unwrap();
        let back = read_census_csv(&spec, buf.as_slice()).unwrap();
        assert_eq!(back.records.len(), c.records.len());
        assert_eq!(back.norm_names, vec!["l2".to_string()]);
        for (a, b) in c.records.iter().zip(&back.records) {
            assert_eq!(a.word, b.word);
            assert_eq!(a.ell_psi.to_bits(), b.ell_psi.to_bits());
            assert!(a.lambda.dist(&b.lambda) < 1e-15);
            assert!(a.holonomy.approx_eq(&b.holonomy, 0.0));
        }
        let text = String::from_utf8(buf).unwrap();
        let broken = text.replacen("ell_psi", "ell", 1);
        assert!(matches!(read_census_csv(&spec, broken.as_bytes()), Err(CensusError::Parse { path, .. }) if path == "ell_psi"));
    }

    /// values with N(T) = floor(e^T / T) for T >= 1
    fn pg_values(t_max: f64) -> Vec<f64> {
        let mut values = Vec::new();
        let mut prev = 0usize;
        let mut t: f64 = 1.0;
        while t <= t_max {
            let n = (t.exp() / t).floor() as usize;
            values.extend(std::iter::repeat_n(t, n.saturating_sub(prev)));
            prev = prev.max(n);
            t += 0.001;
        }
        values
    }

    #[test]
    fn count_series_synthetic() {
        let values = pg_values(14.0);
        let grid = grid_from_range(7.0, 13.5, 0.5).unwrap();
        let s = count_series(&values, "psi", &grid).unwrap();
        assert!((s.delta.unwrap() - 1.0).abs() < 0.02);
        let top: Vec<f64> = s.ratios[grid.len() / 2..].iter().map(|r| r.unwrap()).collect();
        assert!(top.iter().all(|r| (r - 1.0).abs() < 0.1), "{top:?}");
        assert!(s.counts.windows(2).all(|w| w[0] <= w[1]));
        let below = count_series(&values, "psi", &[0.1, 0.2, 0.5]).unwrap();
        assert!(below.counts.iter().all(|&c| c == 0) && below.delta.is_none());
        assert!(matches!(count_series(&values, "psi", &[]), Err(CensusError::Range(_))));
    }

    fn uniform_angles(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0.0..TAU)).collect()
    }

    #[test]
    fn ks_oracles() {
        let a = uniform_angles(10_000, 1);
        assert!(ks_uniform(&a) < 1.36 / 100.0);
        // point mass at pi: distance 1/2
        assert!((ks_uniform(&[std::f64::consts::PI; 10]) - 0.5).abs() < 1e-12);
        // exact: sample {0.25, 0.75} of the unit interval gives D = 0.25
        assert!((ks_uniform(&[0.25 * TAU, 0.75 * TAU]) - 0.25).abs() < 1e-12);
        assert!((kuiper_uniform(&[0.25 * TAU, 0.75 * TAU]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn discrepancy_oracles() {
        let pts: Vec<(f64, f64)> = uniform_angles(20_000, 2).chunks(2).map(|c| (c[0], c[1])).collect();
        assert!(star_discrepancy(&pts) < 0.03);
        // point mass near the origin: box [0, 1/64)^2 already holds everything
        assert!(star_discrepancy(&[(0.01, 0.01); 300]) > 0.99);
        // uniform on the diagonal: max of min(x, y) - xy is 1/4
        let diag: Vec<(f64, f64)> = uniform_angles(20_000, 3).into_iter().map(|a| (a, a)).collect();
        assert!((star_discrepancy(&diag) - 0.25).abs() < 0.02);
    }

    fn synthetic_records(angles: &[(f64, f64)], ell: impl Fn(usize) -> f64) -> Vec<CensusRecord> {
        let w = canonical_form(&"a".parse().unwrap()).unwrap();
        angles
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| CensusRecord {
                word: w.clone(),
                length: 1,
                lambda: CartanPoint { factors: vec![vec![1.0, -1.0], vec![1.0, -1.0]] },
                ell_psi: ell(i),
                n_values: vec![],
                holonomy: Holonomy { factors: vec![FactorHolonomy::Angle(a), FactorHolonomy::Angle(b)] },
            })
            .collect()
    }

    #[test]
    fn uniformity_report_flags() {
        let a = uniform_angles(8000, 4);
        let pairs: Vec<(f64, f64)> = a.chunks(2).map(|c| (c[0], c[1])).collect();
        let recs = synthetic_records(&pairs, |_| 1.0);
        let r = holonomy_uniformity(&recs, 2.0, &[0, 1], UniformityThresholds::default()).unwrap();
        assert!(r.uniform && r.sample_size == 4000);
        let same = synthetic_records(&vec![(1.0, 1.0); 500], |_| 1.0);
        let r = holonomy_uniformity(&same, 2.0, &[0, 1], UniformityThresholds::default()).unwrap();
        assert!(!r.uniform && r.discrepancy.unwrap() > 0.5);
        assert!(matches!(
            holonomy_uniformity(&recs[..100], 2.0, &[0], UniformityThresholds::default()),
            Err(CensusError::InsufficientData { .. })
        ));
        let mut signed = recs.clone();
        signed[0].holonomy.factors[1] = FactorHolonomy::Signs(vec![1, -1]);
        assert!(matches!(
            holonomy_uniformity(&signed, 2.0, &[1], UniformityThresholds::default()),
            Err(CensusError::Unsupported(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn kuiper_rotation_invariant(seed in 0u64..1000, shift in 0.0f64..TAU) {
            let a = uniform_angles(5000, seed);
            let b: Vec<f64> = a.iter().map(|x| (x + shift).rem_euclid(TAU)).collect();
            let (va, vb) = (kuiper_uniform(&a), kuiper_uniform(&b));
            prop_assert!((va - vb).abs() <= 0.02 * va);
        }

        #[test]
        fn window_counts_additive(seed in 0u64..1000, cut in 0.1f64..6.0) {
            let a = uniform_angles(2000, seed);
            let pairs: Vec<(f64, f64)> = a.chunks(2).map(|c| (c[0], c[1])).collect();
            let recs = synthetic_records(&pairs, |i| 1.0 + (i % 7) as f64);
            let whole = window_count(&recs, 5.0, &[0, 1], &[(0.0, TAU), (1.0, 3.0)], 1.0).unwrap();
            let left = window_count(&recs, 5.0, &[0, 1], &[(0.0, cut), (1.0, 3.0)], 1.0).unwrap();
            let right = window_count(&recs, 5.0, &[0, 1], &[(cut, TAU), (1.0, 3.0)], 1.0).unwrap();
            prop_assert_eq!(whole.observed, left.observed + right.observed);
        }
    }

    #[test]
    fn window_count_edge_cases() {
        let a = uniform_angles(2000, 9);
        let pairs: Vec<(f64, f64)> = a.chunks(2).map(|c| (c[0], c[1])).collect();
        let recs = synthetic_records(&pairs, |i| 1.0 + (i % 5) as f64);
        let full = window_count(&recs, 3.0, &[0, 1], &[(0.0, TAU), (0.0, TAU)], 1.2).unwrap();
        assert_eq!(full.observed, recs.iter().filter(|r| r.ell_psi <= 3.0).count() as u64);
        assert!((full.predicted - (3.6f64).exp() / 3.6).abs() < 1e-9);
        let empty = window_count(&recs, 3.0, &[0, 1], &[(1.0, 1.0), (0.0, TAU)], 1.2).unwrap();
        assert_eq!(empty.predicted, 0.0);
        assert_eq!(empty.observed, 0);
        assert!(matches!(window_count(&recs, 3.0, &[0], &[(2.0, 1.0)], 1.0), Err(CensusError::Range(_))));
        assert!(matches!(window_count(&recs, 3.0, &[0], &[(0.0, 7.0)], 1.0), Err(CensusError::Range(_))));
    }

    #[test]
    fn norm_order_coupling_holds() {
        let spec = schottky();
        let n = NormLike::linear("half", &LinearForm::new(vec![0.25, -0.25, 0.75, -0.75]));
        let c = build_census(&spec, 7, &psi(), &[n], 2).unwrap();
        let grid = grid_from_range(1.0, 10.0, 0.5).unwrap();
        let chk = norm_order_check(&c, 0, &grid).unwrap();
        assert!(chk.holds && chk.kappa > 0.0);
        for r in &c.records {
            assert!(r.ell_psi <= chk.kappa * r.n_values[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn cartan_census_counts_reduced_words() {
        let spec = schottky();
        let s = cartan_census(&spec, 4, |mu| mu.factors[0][0]).unwrap();
        // 4 + 12 + 36 + 108 reduced words
        assert_eq!(s.values.len(), 160);
        assert!(s.frontier_min > 0.0);
    }
}
