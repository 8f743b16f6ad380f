use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use anosov_census::census::{class_count, enumerate_classes};
use anosov_census::fixtures::twisted_joining;
use anosov_census::group::group_config_to_json;
use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anosov-census"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn twisted_config(dir: &Path) -> PathBuf {
    write(dir, "twisted.json", &group_config_to_json(&twisted_joining().unwrap()).to_string())
}

/// One PSL2(C) factor: a diagonal loxodromic a and a hyperbolic b.
fn diagonal_config(dir: &Path) -> PathBuf {
    let z = (1.25f64, 0.35f64);
    let (r, t) = (z.0.exp(), z.1);
    let a = [[[r * t.cos(), r * t.sin()], [0.0, 0.0]], [[0.0, 0.0], [t.cos() / r, -t.sin() / r]]];
    let doc = json!({
        "factors": [{"kind": "complex-special-linear-2", "projectivized": true}],
        "generators": [[a], [[[[2.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [1.0, 0.0]]]]],
        "tolerance": 1e-10,
    });
    write(dir, "diag.json", &doc.to_string())
}

/// A loxodromic a and an elliptic rotation b.
fn elliptic_config(dir: &Path) -> PathBuf {
    let t = 0.7f64;
    let doc = json!({
        "factors": [{"kind": "complex-special-linear-2", "projectivized": false}],
        "generators": [
            [[[[3.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0 / 3.0, 0.0]]]],
            [[[[t.cos(), t.sin()], [0.0, 0.0]], [[0.0, 0.0], [t.cos(), -t.sin()]]]]
        ],
        "tolerance": 1e-10,
    });
    write(dir, "elliptic.json", &doc.to_string())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn census(dir: &Path, cfg: &Path, l: usize, shards: usize, name: &str) -> (Output, PathBuf) {
    let out = dir.join(name);
    let o = run(&[
        "census", "--config", s(cfg), "--max-length", &l.to_string(), "--psi", "[1,-1,0,0]",
        "--norm", r#"{"name":"l2","kind":"euclidean"}"#, "--shards", &shards.to_string(), "--out", s(&out),
    ]);
    (o, out)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn census_length_one_has_four_rows() {
    let d = TempDir::new().unwrap();
    let cfg = twisted_config(d.path());
    let (o, out) = census(d.path(), &cfg, 1, 1, "c.csv");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count() as u64 - 1, class_count(2, 1, true).unwrap());
    assert!(text.starts_with("word,length,lambda_0,lambda_1,ell_psi,l2,hol_0,hol_1"));
    let m = read_json(&d.path().join("c.csv.manifest.json"));
    assert_eq!(m["command"], "census");
    assert_eq!(m["parameters"]["max_length"], 1);
}

#[test]
fn census_reruns_and_shards_agree() {
    let d = TempDir::new().unwrap();
    let cfg = twisted_config(d.path());
    let (_, a) = census(d.path(), &cfg, 7, 1, "a.csv");
    let (_, b) = census(d.path(), &cfg, 7, 1, "b.csv");
    let (_, c) = census(d.path(), &cfg, 7, 5, "c.csv");
    let (a, b, c) = (fs::read(a).unwrap(), fs::read(b).unwrap(), fs::read(c).unwrap());
    assert_eq!(a, b);
    let sorted = |x: &[u8]| {
        let mut v: Vec<String> = String::from_utf8_lossy(x).lines().map(str::to_string).collect();
        v.sort();
        v
    };
    assert_eq!(sorted(&a), sorted(&c));
}

#[test]
fn failed_census_leaves_no_files() {
    let d = TempDir::new().unwrap();
    let cfg = twisted_config(d.path());
    let out = d.path().join("bad.csv");
    let o = run(&["census", "--config", s(&cfg), "--max-length", "3", "--psi", "[-1,1,0,0]", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not positive"));
    assert_eq!(fs::read_dir(d.path()).unwrap().count(), 1);
    let o = run(&["census", "--config", s(&cfg), "--max-length", "3", "--psi", "[1,-1]", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["census", "--config", s(&d.path().join("missing.json")), "--max-length", "3", "--psi", "[1,-1,0,0]", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn psi_and_norm_from_files() {
    let d = TempDir::new().unwrap();
    let cfg = twisted_config(d.path());
    let psi = write(d.path(), "psi.json", r#"{"roots": [[0, 0]]}"#);
    let norm = write(d.path(), "n.json", r#"{"name": "l2", "kind": "euclidean"}"#);
    let out = d.path().join("f.csv");
    let o = run(&[
        "census", "--config", s(&cfg), "--max-length", "4", "--psi", &format!("@{}", s(&psi)),
        "--norm", &format!("@{}", s(&norm)), "--out", s(&out),
    ]);
    assert!(o.status.success());
    let (_, inline) = census(d.path(), &cfg, 4, 1, "i.csv");
    assert_eq!(fs::read(out).unwrap(), fs::read(inline).unwrap());
}

fn verify(cfg: &Path, census: &Path, checks: &str, extra: &[&str], out: &Path) -> Output {
    let mut args = vec!["verify", "--config", s(cfg), "--census", s(census), "--checks", checks, "--out", s(out)];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn verify_without_checks_is_empty() {
    let d = TempDir::new().unwrap();
    let cfg = twisted_config(d.path());
    let (_, c) = census(d.path(), &cfg, 3, 1, "c.csv");
    let out = d.path().join("v.json");
    let o = verify(&cfg, &c, "", &[], &out);
    assert!(o.status.success());
    let v = read_json(&out);
    assert_eq!(v["checks"], json!({}));
    assert_eq!(v["pass"], true);
}

/// ell_j solving e^t / t = j, so N(T) = floor(e^T / T), with Kronecker
/// angles (j phi, j sqrt 2) mod 1.
fn synthetic_census(dir: &Path, t_max: f64, constant_angles: bool) -> PathBuf {
    let n = ((t_max).exp() / t_max).floor() as usize;
    let words = enumerate_classes(2, 10, true).unwrap();
    assert!(words.len() >= n);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut text = String::from("word,length,lambda_0,lambda_1,ell_psi,l2,hol_0,hol_1\n");
    let mut t = 1.0f64;
    for j in 1..=n {
        // smallest t > 1 with e^t / t >= j
        let (mut lo, mut hi) = (t, t + 5.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.exp() / mid >= j as f64 {
                hi = mid
            } else {
                lo = mid
            }
        }
        t = hi;
        let (a, b) = if constant_angles {
            (1.0, 1.0)
        } else {
            ((j as f64 * phi).fract() * TAU, (j as f64 * 2f64.sqrt()).fract() * TAU)
        };
        let w = &words[j - 1];
        text.push_str(&format!(
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            w.to_word().to_signed_string(),
            w.len(),
            t / 2.0,
            t / 2.0,
            t,
            t,
            a,
            b
        ));
    }
    write(dir, "synthetic.csv", &text)
}

#[test]
fn synthetic_census_passes_every_check() {
    let d = TempDir::new().unwrap();
    let cfg = twisted_config(d.path());
    let c = synthetic_census(d.path(), 11.0, false);
    let out = d.path().join("v.json");
    let o = verify(&cfg, &c, "counting,holonomy,windows,norm-order", &["--grid", "6:11:0.5"], &out);
    let v = read_json(&out);
    assert!(o.status.success(), "{v:#}");
    for k in ["counting", "holonomy", "windows", "norm-order"] {
        assert_eq!(v["checks"][k]["pass"], true, "{k}");
    }
    let delta = v["checks"]["counting"]["series"]["delta"].as_f64().unwrap();
    assert!((delta - 1.0).abs() < 0.01, "{delta}");
}

#[test]
fn constant_angles_fail_holonomy() {
    let d = TempDir::new().unwrap();
    let cfg = twisted_config(d.path());
    let c = synthetic_census(d.path(), 9.0, true);
    let out = d.path().join("v.json");
    let o = verify(&cfg, &c, "holonomy", &["--grid", "6:9:0.5"], &out);
    assert_eq!(o.status.code(), Some(4));
    let v = read_json(&out);
    assert_eq!(v["checks"]["holonomy"]["pass"], false);
    let disc = v["checks"]["holonomy"]["report"]["discrepancy"].as_f64().unwrap();
    assert!(disc > 0.9, "{disc}");
}

#[test]
fn missing_column_is_named() {
    let d = TempDir::new().unwrap();
    let cfg = twisted_config(d.path());
    let c = synthetic_census(d.path(), 7.0, false);
    let text: String = fs::read_to_string(&c)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
        .collect();
    let cut = write(d.path(), "cut.csv", &text);
    let out = d.path().join("v.json");
    let o = verify(&cfg, &cut, "holonomy", &[], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hol_1"));
    assert!(!out.exists());
    let o = verify(&cfg, &c, "bogus", &[], &out);
    assert_eq!(o.status.code(), Some(2));
}

fn closing(cfg: &Path, word: &str, extra: &[&str], out: &Path) -> Output {
    let mut args = vec!["closing", "--config", s(cfg), "--word", word, "--out", s(out)];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn closing_unperturbed_diagonal_word_is_exact() {
    let d = TempDir::new().unwrap();
    let cfg = diagonal_config(d.path());
    let out = d.path().join("c.json");
    let o = closing(
        &cfg,
        "a",
        &["--epsilon", "0.01", "--trials", "1", "--base", "identity", "--unperturbed", "--grid", "2.5:2.5:1"],
        &out,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    let r = &v["per_trial"][0];
    assert_eq!(r["dist_a"], 0.0);
    assert_eq!(r["dist_m"], 0.0);
    assert!(r["box_displacement"].as_f64().unwrap() < 1e-12);
}

#[test]
fn closing_is_deterministic_and_fits_are_linear() {
    let d = TempDir::new().unwrap();
    let cfg = twisted_config(d.path());
    let (a, b) = (d.path().join("a.json"), d.path().join("b.json"));
    let args = ["--epsilon", "0.04,0.02,0.01", "--trials", "40", "--seed", "9"];
    assert!(closing(&cfg, "a b", &args, &a).status.success());
    assert!(closing(&cfg, "a b", &args, &b).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = d.path().join("c.json");
    assert!(closing(&cfg, "1 2", &args, &c).status.success());
    assert_eq!(read_json(&c)["per_trial"], read_json(&a)["per_trial"]);
    let v = read_json(&a);
    assert!(v["fits"]["r2"].as_f64().unwrap() > 0.9);
    for k in ["gamma_word", "epsilon", "T_grid", "per_trial", "fits"] {
        assert!(v.get(k).is_some(), "{k}");
    }
}

#[test]
fn closing_rejects_elliptic_words() {
    let d = TempDir::new().unwrap();
    let cfg = elliptic_config(d.path());
    let out = d.path().join("c.json");
    let o = closing(&cfg, "b", &[], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not loxodromic"));
    assert!(!out.exists());
}

#[test]
fn cone_reports_rays_and_constants() {
    let d = TempDir::new().unwrap();
    let cfg = twisted_config(d.path());
    let out = d.path().join("cone.json");
    let o = run(&[
        "cone", "--config", s(&cfg), "--max-length", "9", "--norm", r#"{"name":"l2","kind":"euclidean"}"#,
        "--i-form", r#"{"matrix":[[1.0]],"basis":"canonical"}"#, "--mc-samples", "100000", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    assert_eq!(v["rays"].as_array().unwrap().len(), 2);
    let c = &v["norms"][0]["c"];
    let (cf, mc) = (c["closed_form"].as_f64().unwrap(), c["monte_carlo"].as_f64().unwrap());
    assert!(cf > 0.0 && cf <= 1.0 && (cf - mc).abs() < 0.01);
}
