//! Config-driven runs: parse, dispatch, persist, and map failures to exit
//! codes.

mod commands;
mod config;
mod output;

pub use commands::{build_datum, sweep_pairs, verify_rows, CheckRow, Outcome};
pub use config::{
    parse_config, CoeffSpec, ConfigError, DatumSpec, ProfileSpec, RunConfig, Subcommand, SweepSpec, Violation,
};
pub use output::{sha256_hex, write_manifest, Csv, OutputEntry, OutputSet, RunManifest, RunStatus, ARTIFACT_VERSION};

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_GRID: i32 = 4;
pub const EXIT_FIELD: i32 = 5;
pub const EXIT_DOMAIN: i32 = 6;
pub const EXIT_ALIAS: i32 = 7;
pub const EXIT_NONFINITE: i32 = 8;
pub const EXIT_MINIMIZE: i32 = 9;
pub const EXIT_BRACKET: i32 = 10;
pub const EXIT_IO: i32 = 11;
pub const EXIT_VERIFY_FAILED: i32 = 12;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Grid(_) => EXIT_GRID,
        Error::Field(_) => EXIT_FIELD,
        Error::Domain(_) => EXIT_DOMAIN,
        Error::Alias { .. } => EXIT_ALIAS,
        Error::NonFinite { .. } => EXIT_NONFINITE,
        Error::Minimize(_) => EXIT_MINIMIZE,
        Error::Bracket { .. } => EXIT_BRACKET,
        Error::Io(_) => EXIT_IO,
    }
}

/// Worker count: explicit flag, then `NLS_LAB_WORKERS`, then all cores.
pub fn resolve_workers(flag: Option<usize>) -> Result<usize, String> {
    if let Some(n) = flag {
        return if n > 0 { Ok(n) } else { Err("--workers must be positive".into()) };
    }
    match std::env::var("NLS_LAB_WORKERS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("NLS_LAB_WORKERS must be a positive integer, got `{v}`")),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub struct Invocation {
    pub subcommand: Subcommand,
    pub config_path: PathBuf,
    pub out: Option<String>,
    pub workers: usize,
}

/// Result of [`run`]: the exit code plus what was printed.
pub struct RunReport {
    pub exit_code: i32,
    pub stdout: Vec<String>,
    pub stderr: Vec<String>,
    pub manifest: Option<PathBuf>,
}

fn default_prefix(sub: Subcommand) -> String {
    format!("nls-lab-{}", sub.name())
}

/// Parse, execute and persist one run. The manifest is written last; a
/// previous manifest under the same prefix is removed before any work starts.
pub fn run(inv: &Invocation) -> RunReport {
    let mut rep = RunReport { exit_code: EXIT_OK, stdout: Vec::new(), stderr: Vec::new(), manifest: None };
    let started = output::unix_now();
    // an earlier success under an explicit prefix must not survive a run
    // that fails before its own prefix is known
    if let Some(prefix) = &inv.out {
        if let Ok(set) = OutputSet::new(prefix) {
            let _ = fs::remove_file(set.manifest_path());
        }
    }
    let text = match fs::read_to_string(&inv.config_path) {
        Ok(t) => t,
        Err(e) => {
            rep.stderr.push(format!("cannot read {}: {e}", inv.config_path.display()));
            rep.exit_code = EXIT_IO;
            return rep;
        }
    };
    let cfg = match parse_config(&text, inv.subcommand) {
        Ok(c) => c,
        Err(e) => {
            rep.stderr.extend(e.to_string().lines().map(String::from));
            rep.exit_code = EXIT_CONFIG;
            return rep;
        }
    };
    let prefix = inv.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| default_prefix(inv.subcommand));
    let mut out = match OutputSet::new(&prefix) {
        Ok(o) => o,
        Err(e) => {
            rep.stderr.push(format!("cannot create output location for {prefix}: {e}"));
            rep.exit_code = EXIT_IO;
            return rep;
        }
    };
    let manifest_path = out.manifest_path();
    if manifest_path.exists() {
        if let Err(e) = fs::remove_file(&manifest_path) {
            rep.stderr.push(format!("cannot remove stale manifest {}: {e}", manifest_path.display()));
            rep.exit_code = EXIT_IO;
            return rep;
        }
    }

    let pool = rayon::ThreadPoolBuilder::new().num_threads(inv.workers).build();
    let result = match pool {
        Ok(pool) => pool.install(|| commands::dispatch(&cfg, &mut out)),
        Err(e) => Err(Error::Io(std::io::Error::other(e.to_string()))),
    };
    let (status, error, soundness) = match result {
        Ok(o) => {
            rep.stdout.extend(o.summary);
            if let Some(e) = o.deferred {
                rep.exit_code = exit_code(&e);
                rep.stderr.push(format!("error: {e}"));
                (RunStatus::Partial, Some(e.to_string()), o.soundness)
            } else if o.verify_failed {
                rep.exit_code = EXIT_VERIFY_FAILED;
                rep.stderr.push("verification failed".into());
                (RunStatus::Failed, Some("verification failed".into()), o.soundness)
            } else {
                (RunStatus::Ok, None, o.soundness)
            }
        }
        Err(e) => {
            rep.exit_code = exit_code(&e);
            rep.stderr.push(format!("error: {e}"));
            (RunStatus::Failed, Some(e.to_string()), Default::default())
        }
    };
    let manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION.into(),
        subcommand: inv.subcommand.name().into(),
        status,
        exit_code: rep.exit_code,
        error,
        config_path: inv.config_path.display().to_string(),
        config: cfg.echo.clone(),
        seed: cfg.seed,
        workers: inv.workers,
        started_unix: started,
        finished_unix: output::unix_now(),
        outputs: out.entries().to_vec(),
        soundness,
    };
    match write_manifest(&manifest_path, &manifest) {
        Ok(()) => rep.manifest = Some(manifest_path),
        Err(e) => {
            rep.stderr.push(format!("cannot write manifest: {e}"));
            if rep.exit_code == EXIT_OK {
                rep.exit_code = EXIT_IO;
            }
        }
    }
    rep
}

/// Check that every output listed in a manifest still matches its checksum.
pub fn verify_manifest(path: &Path) -> Result<bool, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let outputs = v["outputs"].as_array().ok_or("manifest has no outputs array")?;
    for o in outputs {
        let file = o["file"].as_str().ok_or("output without file name")?;
        let bytes = fs::read(dir.join(file)).map_err(|e| format!("{file}: {e}"))?;
        if Some(sha256_hex(&bytes).as_str()) != o["sha256"].as_str() {
            return Ok(false);
        }
    }
    Ok(true)
}
