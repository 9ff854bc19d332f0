//! Artifact writing and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::spectral::io::{write_binary, SnapshotJson, JSON_SNAPSHOT_LIMIT};
use crate::spectral::Field;

pub const ARTIFACT_VERSION: &str = concat!("nls-lab ", env!("CARGO_PKG_VERSION"));

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Files written under one prefix: `<prefix>.<suffix>`.
pub struct OutputSet {
    prefix: PathBuf,
    entries: Vec<OutputEntry>,
}

impl OutputSet {
    pub fn new(prefix: impl Into<PathBuf>) -> std::io::Result<Self> {
        let prefix = prefix.into();
        if let Some(parent) = prefix.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        Ok(OutputSet { prefix, entries: Vec::new() })
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        let mut s = self.prefix.clone().into_os_string();
        s.push(".");
        s.push(suffix);
        PathBuf::from(s)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.path("manifest.json")
    }

    pub fn entries(&self) -> &[OutputEntry] {
        &self.entries
    }

    pub fn write_bytes(&mut self, suffix: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
        let path = self.path(suffix);
        fs::write(&path, bytes)?;
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        self.entries.push(OutputEntry { file, bytes: bytes.len(), sha256: sha256_hex(bytes) });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, suffix: &str, value: &T) -> std::io::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write_bytes(suffix, text.as_bytes())
    }

    pub fn write_csv(&mut self, suffix: &str, csv: &Csv) -> std::io::Result<PathBuf> {
        self.write_bytes(suffix, csv.render().as_bytes())
    }

    /// Binary snapshot, plus a JSON copy for small grids.
    pub fn write_field(&mut self, stem: &str, field: &Field) -> std::io::Result<()> {
        let mut bytes = Vec::new();
        write_binary(field, &mut bytes).map_err(std::io::Error::other)?;
        self.write_bytes(&format!("{stem}.bin"), &bytes)?;
        if field.grid().len_total() <= JSON_SNAPSHOT_LIMIT {
            self.write_json(&format!("{stem}.json"), &SnapshotJson::from_field(field))?;
        }
        Ok(())
    }
}

/// Minimal CSV builder with `# key: value` metadata lines.
#[derive(Default)]
pub struct Csv {
    meta: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// Shortest round-trip representation.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:e}")
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { header: header.iter().map(|s| s.to_string()).collect(), ..Default::default() }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// Outputs written, but a module reported an error part-way.
    Partial,
    Failed,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub subcommand: String,
    pub status: RunStatus,
    pub exit_code: i32,
    pub error: Option<String>,
    pub config_path: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub workers: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<OutputEntry>,
    pub soundness: BTreeMap<String, Value>,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Write through a temporary file and rename, so a reader never sees a
/// half-written manifest.
pub fn write_manifest(path: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        let mut text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
        text.push('\n');
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn csv_render() {
        let mut c = Csv::new(&["a", "b"]);
        c.meta("d", 1);
        c.row(vec![num(0.5), num(f64::NAN)]);
        assert_eq!(c.render(), "# d: 1\na,b\n5e-1,nan\n");
    }

    #[test]
    fn entries_carry_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputSet::new(dir.path().join("sub/run")).unwrap();
        let p = out.write_bytes("x.txt", b"abc").unwrap();
        assert!(p.ends_with("sub/run.x.txt"));
        assert_eq!(out.entries()[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(fs::read(p).unwrap(), b"abc");
    }
}
