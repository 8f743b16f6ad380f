mod specs;
mod output;

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anosov_census::closing::{
    axis_frame, closing_experiment, closing_fits, powers_for_grid, root_length, ClosingOptions, FlowBoxSpec,
};
use anosov_census::cone::{
    c_constant, cone_hull, critical_exponent, default_window, delta_n, normalize_tangent, AlgebraBasis, CountModel,
    McOptions, NormLike,
};
use anosov_census::equidist::{
    build_census, count_series, holonomy_uniformity, norm_order_check, read_census_csv, relative_spread, window_count,
    write_census_csv, Census, UniformityThresholds,
};
use anosov_census::invariants::FactorHolonomy;
use anosov_census::{evaluate_word, parse_group_config, CensusError, GroupSpec, MatrixTuple, Word};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use output::{write_json, write_manifest, RunManifest};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;

/// Acceptance bounds of the verify checks.
const MAX_COUNT_RESIDUAL: f64 = 0.05;
const MAX_RATIO_SPREAD: f64 = 0.25;
const MAX_WINDOW_ERROR: f64 = 0.25;
const SHELLS: usize = 3;

#[derive(Debug, Error)]
enum AppError {
    #[error(transparent)]
    Core(#[from] CensusError),
    #[error("{0}")]
    Io(String),
    #[error("one or more checks failed")]
    CheckFailed,
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Core(e) if e.is_validation() => EXIT_VALIDATION,
            AppError::Core(_) => EXIT_NUMERIC,
            AppError::Io(_) => EXIT_VALIDATION,
            AppError::CheckFailed => EXIT_CHECK_FAILED,
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> AppError + '_ {
    move |e| AppError::Io(format!("{}: {e}", path.display()))
}

type AppResult<T> = std::result::Result<T, AppError>;

#[derive(Parser)]
#[command(name = "anosov-census", version, about = "Census and verification of primitive conjugacy classes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Group configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate primitive classes up to a word length and write a census table.
    Census {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        max_length: usize,
        /// Linear form, inline JSON or @file.
        #[arg(long)]
        psi: String,
        /// Norm-like function, inline JSON or @file; repeatable.
        #[arg(long = "norm")]
        norms: Vec<String>,
        #[arg(long, default_value_t = 1)]
        shards: usize,
    },
    /// Run statistical checks on a census table.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        census: PathBuf,
        /// Comma-separated subset of counting, holonomy, windows, norm-order.
        #[arg(long, default_value = "")]
        checks: String,
        /// T0:T1:STEP; defaults to the upper half of the complete range.
        #[arg(long)]
        grid: Option<String>,
        /// Holonomy factors to test (one or two); defaults to the first two angle factors.
        #[arg(long, value_delimiter = ',')]
        components: Vec<usize>,
        /// lo:hi angle window per component; defaults to [0, pi).
        #[arg(long = "window")]
        windows: Vec<String>,
    },
    /// Effective closing experiment on flow boxes around the axis of a word.
    Closing {
        #[command(flatten)]
        common: Common,
        /// Word as letters (`a b'`) or signed indices (`1 -2`).
        #[arg(long)]
        word: String,
        #[arg(long, value_delimiter = ',', default_values_t = [0.04, 0.02, 0.01, 0.005])]
        epsilon: Vec<f64>,
        /// Target root lengths T0:T1:STEP, realized by powers of the word.
        #[arg(long, default_value = "5:15:5")]
        grid: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Box base point: the frame of the word's axis, or the identity.
        #[arg(long, value_enum, default_value_t = Base::Axis)]
        base: Base,
        /// Use g1 = g2 = base in every trial.
        #[arg(long)]
        unperturbed: bool,
    },
    /// Limit cone, critical exponents, and norm constants from a census.
    Cone {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        max_length: usize,
        #[arg(long)]
        psi: Option<String>,
        #[arg(long = "norm")]
        norms: Vec<String>,
        /// Quadratic form I on ker psi for the norm constants, inline JSON or @file.
        #[arg(long)]
        i_form: Option<String>,
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 1)]
        shards: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Base {
    Axis,
    Identity,
}

fn load_config(path: &Path) -> AppResult<GroupSpec> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse_group_config(&text)?)
}

fn parse_norms(spec: &GroupSpec, args: &[String]) -> AppResult<Vec<NormLike>> {
    let norms = args
        .iter()
        .map(|a| specs::parse_norm(spec, &specs::load_json(a, "norm")?))
        .collect::<anosov_census::Result<Vec<_>>>()?;
    for (i, n) in norms.iter().enumerate() {
        if norms[..i].iter().any(|m| m.name == n.name) {
            return Err(CensusError::parse("norm.name", format!("duplicate norm {:?}", n.name)).into());
        }
    }
    Ok(norms)
}

/// Writes the manifest side-file; the artifact is removed if that fails.
fn finish(out: &Path, manifest: &RunManifest, started: Instant) -> AppResult<()> {
    write_manifest(out, manifest, started.elapsed()).map_err(|e| {
        let _ = fs::remove_file(out);
        io_err(out)(e)
    })
}

fn cmd_census(common: Common, max_length: usize, psi: String, norms: Vec<String>, shards: usize) -> AppResult<()> {
    let started = Instant::now();
    let spec = load_config(&common.config)?;
    let psi_v = specs::load_json(&psi, "psi")?;
    let psi = specs::parse_psi(&spec, &psi_v)?;
    let norm_vs: Vec<Value> = norms.iter().map(|n| specs::load_json(n, "norm")).collect::<Result<_, _>>()?;
    let norms = parse_norms(&spec, &norms)?;
    let census = build_census(&spec, max_length, &psi, &norms, shards)?;
    let mut buf = Vec::new();
    write_census_csv(&spec, &census, &mut buf)?;
    output::write_atomic(&common.out, |f| std::io::Write::write_all(f, &buf)).map_err(io_err(&common.out))?;
    let manifest = RunManifest::new(
        "census",
        &common.config,
        json!({
            "max_length": max_length, "psi": psi_v, "norms": norm_vs, "seed": common.seed, "shards": shards,
            "records": census.records.len(), "excluded": census.excluded,
        }),
    );
    finish(&common.out, &manifest, started)
}

/// Upper half of [min ell, completeness] in 12 steps.
fn default_grid(census: &Census) -> AppResult<Vec<f64>> {
    let ell = census.ell_values();
    let hi = census.completeness().min(ell.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let (lo, hi) = default_window(&ell, hi)?;
    Ok(anosov_census::equidist::grid_from_range(lo, hi, (hi - lo) / 12.0)?)
}

fn required_columns(spec: &GroupSpec, checks: &[&str]) -> Vec<String> {
    let mut cols = vec!["word".to_string(), "length".to_string()];
    cols.extend((0..spec.rank()).map(|i| format!("lambda_{i}")));
    if !checks.is_empty() {
        cols.push("ell_psi".to_string());
    }
    cols.extend((0..spec.factors.len()).map(|i| format!("hol_{i}")));
    cols
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    common: Common,
    census_path: PathBuf,
    checks: String,
    grid: Option<String>,
    components: Vec<usize>,
    windows: Vec<String>,
) -> AppResult<()> {
    let started = Instant::now();
    let spec = load_config(&common.config)?;
    let checks: Vec<&str> = checks.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    for c in &checks {
        if !["counting", "holonomy", "windows", "norm-order"].contains(c) {
            return Err(CensusError::parse("checks", format!("unknown check {c:?}")).into());
        }
    }
    let file = fs::File::open(&census_path).map_err(io_err(&census_path))?;
    let mut rd = csv::Reader::from_reader(file);
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| CensusError::parse("header", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    for col in required_columns(&spec, &checks) {
        if !header.contains(&col) {
            return Err(CensusError::parse(col, "missing column").into());
        }
    }
    let census = read_census_csv(&spec, fs::File::open(&census_path).map_err(io_err(&census_path))?)?;
    if checks.contains(&"norm-order") && census.norm_names.is_empty() {
        return Err(CensusError::parse("norm columns", "norm-order needs at least one norm column").into());
    }

    let mut report = serde_json::Map::new();
    let mut all_pass = true;
    if !checks.is_empty() {
        let grid = match &grid {
            Some(g) => specs::parse_grid(g)?,
            None => default_grid(&census)?,
        };
        let top = *grid.last().expect("nonempty grid");
        let series = count_series(&census.ell_values(), "psi", &grid)?;
        let components = if components.is_empty() {
            let angles: Vec<usize> = census
                .records
                .first()
                .map(|r| {
                    r.holonomy
                        .factors
                        .iter()
                        .enumerate()
                        .filter(|(_, h)| matches!(h, FactorHolonomy::Angle(_)))
                        .map(|(i, _)| i)
                        .collect()
                })
                .unwrap_or_default();
            angles.into_iter().take(2).collect()
        } else {
            components
        };
        for &c in &checks {
            let (pass, body) = match c {
                "counting" => {
                    let ratios: Vec<f64> = series.ratios.iter().rev().take(SHELLS).flatten().copied().collect();
                    let spread = relative_spread(&ratios);
                    let pass = series.residual.is_some_and(|r| r < MAX_COUNT_RESIDUAL)
                        && ratios.len() == SHELLS
                        && spread < MAX_RATIO_SPREAD;
                    (
                        pass,
                        json!({"series": series, "top_ratio_spread": spread,
                               "max_residual": MAX_COUNT_RESIDUAL, "max_ratio_spread": MAX_RATIO_SPREAD}),
                    )
                }
                "holonomy" => {
                    let thresholds = UniformityThresholds::default();
                    let u = holonomy_uniformity(&census.records, top, &components, thresholds)?;
                    (
                        u.uniform,
                        json!({"report": u, "max_ks": thresholds.ks, "max_discrepancy": thresholds.discrepancy}),
                    )
                }
                "windows" => {
                    let ws = if windows.is_empty() {
                        vec![(0.0, PI); components.len()]
                    } else {
                        windows.iter().map(|w| specs::parse_window(w)).collect::<Result<_, _>>()?
                    };
                    let delta = series
                        .delta
                        .ok_or_else(|| CensusError::Numeric("no exponent fitted from the counts".into()))?;
                    let w = window_count(&census.records, top, &components, &ws, delta)?;
                    let ratio = w.observed as f64 / w.predicted;
                    (
                        (ratio - 1.0).abs() <= MAX_WINDOW_ERROR,
                        json!({"window": w, "delta": delta, "ratio": ratio, "max_relative_error": MAX_WINDOW_ERROR}),
                    )
                }
                "norm-order" => {
                    let res = (0..census.norm_names.len())
                        .map(|i| norm_order_check(&census, i, &grid))
                        .collect::<anosov_census::Result<Vec<_>>>()?;
                    (res.iter().all(|r| r.holds), json!({"norms": res}))
                }
                _ => unreachable!("checks validated above"),
            };
            all_pass &= pass;
            let mut body = body;
            body["pass"] = json!(pass);
            report.insert(c.to_string(), body);
        }
    }
    let manifest = RunManifest::new(
        "verify",
        &common.config,
        json!({"census": census_path.display().to_string(), "checks": checks, "grid": grid, "seed": common.seed}),
    );
    let doc = json!({"manifest": manifest, "checks": report, "pass": all_pass});
    write_json(&common.out, &doc).map_err(io_err(&common.out))?;
    finish(&common.out, &manifest, started)?;
    if all_pass {
        Ok(())
    } else {
        Err(AppError::CheckFailed)
    }
}

fn parse_word(s: &str) -> anosov_census::Result<Word> {
    let numeric = s.split_whitespace().all(|t| t.trim_start_matches('-').chars().all(|c| c.is_ascii_digit()));
    if numeric {
        Word::parse_signed(s)
    } else {
        s.parse()
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_closing(
    common: Common,
    word: String,
    epsilon: Vec<f64>,
    grid: String,
    trials: usize,
    base: Base,
    unperturbed: bool,
) -> AppResult<()> {
    let started = Instant::now();
    let spec = load_config(&common.config)?;
    let w = parse_word(&word)?;
    if w.is_empty() {
        return Err(CensusError::IdentityClass.into());
    }
    if w.letters().iter().any(|l| l.generator as usize >= spec.generator_count()) {
        return Err(CensusError::parse("word", "letter outside the generator range").into());
    }
    let gamma = evaluate_word(&spec, &w)?;
    let t_grid = specs::parse_grid(&grid)?;
    if epsilon.is_empty() {
        return Err(CensusError::Validation("no box sizes given".into()).into());
    }
    let base_point = match base {
        Base::Identity => MatrixTuple::identity(&spec),
        Base::Axis => axis_frame(&spec, &gamma)?,
    };
    let t_gamma = root_length(&spec, &gamma);
    let powers = powers_for_grid(t_gamma, &t_grid);
    let opts = ClosingOptions { powers: powers.clone(), trials, seed: common.seed, perturbed: !unperturbed };
    let mut reports = Vec::new();
    for &eps in &epsilon {
        let b = FlowBoxSpec::new(base_point.clone(), eps)?;
        reports.extend(closing_experiment(&spec, &gamma, &b, &opts)?);
    }
    let fits = closing_fits(&mut reports);
    let manifest = RunManifest::new(
        "closing",
        &common.config,
        json!({"word": word, "epsilon": epsilon, "T_grid": t_grid, "trials": trials, "seed": common.seed,
               "base": if base == Base::Axis { "axis" } else { "identity" }, "perturbed": !unperturbed}),
    );
    let doc = json!({
        "manifest": manifest,
        "gamma_word": w.to_string(),
        "epsilon": epsilon,
        "T_grid": t_grid,
        "T_gamma": t_gamma,
        "powers": powers,
        "per_trial": reports,
        "fits": fits,
    });
    write_json(&common.out, &doc).map_err(io_err(&common.out))?;
    finish(&common.out, &manifest, started)
}

#[allow(clippy::too_many_arguments)]
fn cmd_cone(
    common: Common,
    max_length: usize,
    psi: Option<String>,
    norms: Vec<String>,
    i_form: Option<String>,
    mc_samples: usize,
    shards: usize,
) -> AppResult<()> {
    let started = Instant::now();
    let spec = load_config(&common.config)?;
    let psi_v = psi.as_deref().map(|p| specs::load_json(p, "psi")).transpose()?;
    let psi = match &psi_v {
        Some(v) => specs::parse_psi(&spec, v)?,
        None => specs::default_psi(&spec)?,
    };
    let norm_list = parse_norms(&spec, &norms)?;
    let i_form = i_form.as_deref().map(|s| specs::load_json(s, "i_form").and_then(|v| specs::parse_i_form(&v))).transpose()?;
    let census = build_census(&spec, max_length, &psi, &[], shards)?;
    let samples = census.sample_set();
    let basis = AlgebraBasis::new(&spec.factor_dims());
    let hull = cone_hull(&basis, &samples.points, 1e-9)?;
    let ell = census.ell_values();
    let window = default_window(&ell, census.completeness())?;
    let psi_exp = critical_exponent(&ell, window, CountModel::PrimeGeodesic)?;
    let tangent = normalize_tangent(&psi, &hull, &samples)?;
    let mc = McOptions { samples: mc_samples, seed: common.seed };
    let mut norm_reports = Vec::new();
    for n in &norm_list {
        let (est, v) = delta_n(n, &samples, None)?;
        let mut entry = json!({"name": n.name, "delta": est.value, "window": est.window, "residual": est.residual, "direction": v});
        if let Some(i) = &i_form {
            let c = c_constant(i, n, est.value, &v, &basis, 1e-9, (mc_samples > 0).then_some(&mc))?;
            entry["c"] = json!({"closed_form": c.closed_form, "monte_carlo": c.monte_carlo,
                                "monte_carlo_stderr": c.monte_carlo_stderr, "a_i": c.a_i, "a_q": c.a_q});
        }
        norm_reports.push(entry);
    }
    let manifest = RunManifest::new(
        "cone",
        &common.config,
        json!({"max_length": max_length, "psi": psi.coefficients, "seed": common.seed, "shards": shards,
               "mc_samples": mc_samples}),
    );
    let tangency = tangent.normalization.as_ref().map(|t| json!({"delta": t.delta, "direction": t.direction}));
    let doc = json!({
        "manifest": manifest,
        "samples": samples.points.len(),
        "rays": hull.rays,
        "psi": {"coefficients": psi.coefficients, "delta": psi_exp.value, "window": psi_exp.window,
                "residual": psi_exp.residual, "tangency": tangency},
        "norms": norm_reports,
    });
    write_json(&common.out, &doc).map_err(io_err(&common.out))?;
    finish(&common.out, &manifest, started)
}

fn run(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Census { common, max_length, psi, norms, shards } => cmd_census(common, max_length, psi, norms, shards),
        Command::Verify { common, census, checks, grid, components, windows } => {
            cmd_verify(common, census, checks, grid, components, windows)
        }
        Command::Closing { common, word, epsilon, grid, trials, base, unperturbed } => {
            cmd_closing(common, word, epsilon, grid, trials, base, unperturbed)
        }
        Command::Cone { common, max_length, psi, norms, i_form, mc_samples, shards } => {
            cmd_cone(common, max_length, psi, norms, i_form, mc_samples, shards)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("anosov-census: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
