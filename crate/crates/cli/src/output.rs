//! Artifact writing. Every file goes through [`Artifacts`] so the run
//! manifest can list it with its digest.

use std::fs;
use std::path::{Path, PathBuf};

use qbm_core::fields::{
    field1d_to_csv, field2d_to_csv, sidecar_json_1d, sidecar_json_2d, Field1D, Field2D,
};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const OUTPUT_ENV: &str = "QBM_OUTPUT_DIR";
pub const DEFAULT_DIR: &str = "qbm-out";

/// `--out`, then `QBM_OUTPUT_DIR`, then the config's `output.dir` (relative
/// to the config file), then `qbm-out`.
pub fn resolve_dir(
    flag: Option<&Path>,
    config_dir: Option<&Path>,
    config_source: Option<&Path>,
) -> PathBuf {
    if let Some(d) = flag {
        return d.to_path_buf();
    }
    if let Some(d) = std::env::var_os(OUTPUT_ENV).filter(|d| !d.is_empty()) {
        return PathBuf::from(d);
    }
    if let Some(d) = config_dir {
        if d.is_relative() {
            if let Some(base) = config_source.and_then(Path::parent) {
                return base.join(d);
            }
        }
        return d.to_path_buf();
    }
    PathBuf::from(DEFAULT_DIR)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// JSON text with a trailing newline. Non-finite numbers become `null`.
pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values are serialisable");
    s.push('\n');
    s
}

/// Finite numbers as JSON numbers, anything else as `null`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn create(dir: PathBuf) -> std::io::Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Artifacts {
            dir,
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> std::io::Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.push((rel.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    pub fn write_json(&mut self, rel: &str, v: &Value) -> std::io::Result<()> {
        self.write(rel, json_text(v).as_bytes())
    }

    /// CSV snapshot plus its JSON sidecar; returns the CSV path.
    pub fn field2d(
        &mut self,
        stem: &str,
        f: &Field2D,
        provenance: &str,
    ) -> std::io::Result<String> {
        let csv = format!("{stem}.csv");
        self.write(&csv, field2d_to_csv(f).as_bytes())?;
        self.write_json(&format!("{stem}.json"), &sidecar_json_2d(f, provenance))?;
        Ok(csv)
    }

    pub fn field1d(
        &mut self,
        stem: &str,
        f: &Field1D,
        provenance: &str,
    ) -> std::io::Result<String> {
        let csv = format!("{stem}.csv");
        self.write(&csv, field1d_to_csv(f).as_bytes())?;
        self.write_json(&format!("{stem}.json"), &sidecar_json_1d(f, provenance))?;
        Ok(csv)
    }

    /// Writes `run_manifest.json` listing every file written so far.
    pub fn finish(
        mut self,
        command: &str,
        config: Option<(&str, &[u8])>,
        extra: Value,
    ) -> std::io::Result<()> {
        let files: Vec<Value> = self
            .files
            .iter()
            .map(|(p, h)| json!({ "path": p, "sha256": h }))
            .collect();
        let config = match config {
            Some((name, bytes)) => json!({ "file": name, "sha256": sha256_hex(bytes) }),
            None => Value::Null,
        };
        let manifest = json!({
            "command": command,
            "config": config,
            "files": files,
            "details": extra,
        });
        let text = json_text(&manifest);
        fs::write(self.dir.join("run_manifest.json"), text)?;
        self.files.clear();
        Ok(())
    }
}
