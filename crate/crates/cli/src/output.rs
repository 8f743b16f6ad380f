//! Atomic output files and run manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: String,
    pub parameters: Value,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, config: &Path, parameters: Value) -> Self {
        RunManifest {
            command: command.to_string(),
            config: config.display().to_string(),
            parameters,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// The side-file copy, which alone carries the wall-clock time so that
    /// the artifacts themselves stay byte-identical across reruns.
    fn with_timing(&self, elapsed: Duration) -> Value {
        let mut v = serde_json::to_value(self).expect("manifest serializes");
        v["wall_clock_seconds"] = serde_json::json!(elapsed.as_secs_f64());
        v
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn temp_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Writes through a temporary sibling and renames it into place; the
/// temporary is removed if anything fails.
pub fn write_atomic<F>(out: &Path, fill: F) -> std::io::Result<()>
where
    F: FnOnce(&mut fs::File) -> std::io::Result<()>,
{
    let tmp = temp_path(out);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        fill(&mut f)?;
        f.flush()?;
        f.sync_all()?;
        fs::rename(&tmp, out)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn write_manifest(out: &Path, manifest: &RunManifest, elapsed: Duration) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(&manifest.with_timing(elapsed)).expect("manifest serializes");
    write_atomic(&manifest_path(out), |f| f.write_all(text.as_bytes()))
}

pub fn write_json(out: &Path, value: &Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_atomic(out, |f| f.write_all(text.as_bytes()))
}
