//! Result rows, their CSV form, and the run manifest.
//!
//! The CSV is the canonical cross-run artifact, so its layout is frozen:
//! a fixed header, a fixed sort order, and fixed decimal widths chosen so
//! parsing a file back reproduces the rows exactly. Identical
//! `(config, seed)` runs therefore serialize to byte-identical files.

use std::fmt::Write as _;
use std::process::Command;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::RunError;
use crate::experiment::ExperimentConfig;

/// One evaluation point of one seed, flattened for export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub method: String,
    pub task: String,
    pub seed: u64,
    pub episode: usize,
    /// Evaluated success rate in [0, 1], quantized to 1/`eval_episodes`.
    pub success: f64,
    pub sigma: f64,
    pub mode: String,
}

/// Fixed column order of the results CSV.
pub const RESULTS_HEADER: &str = "method,task,seed,episode,success,sigma,mode";

/// Serialize rows in the frozen layout: header, then rows sorted by
/// (method, task, sigma, mode, seed, episode). `success` carries four
/// decimals (lossless for up to 10⁴ evaluation episodes) and `sigma`
/// three (lossless for the millimeter-grained noise grids in use).
pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.method, &a.task)
            .cmp(&(&b.method, &b.task))
            .then(a.sigma.total_cmp(&b.sigma))
            .then(a.mode.cmp(&b.mode))
            .then(a.seed.cmp(&b.seed))
            .then(a.episode.cmp(&b.episode))
    });
    let mut out = String::with_capacity(64 * (sorted.len() + 1));
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in sorted {
        debug_assert!(
            !r.method.contains(',') && !r.task.contains(',') && !r.mode.contains(','),
            "text fields must not contain the separator"
        );
        writeln!(
            out,
            "{},{},{},{},{:.4},{:.3},{}",
            r.method, r.task, r.seed, r.episode, r.success, r.sigma, r.mode
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Parse a results CSV produced by [`results_csv`]. Errors carry 1-based
/// line numbers.
pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>, RunError> {
    let fail = |line: usize, msg: String| RunError::Config {
        msg: format!("results CSV line {line}: {msg}"),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == RESULTS_HEADER => {}
        Some((_, h)) => {
            return Err(fail(1, format!("expected header `{RESULTS_HEADER}`, got `{h}`")))
        }
        None => return Err(fail(1, "empty file".to_string())),
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 7 {
            return Err(fail(line, format!("expected 7 fields, got {}", fields.len())));
        }
        let num = |what: &str, s: &str| {
            s.parse::<f64>().map_err(|_| fail(line, format!("bad {what} `{s}`")))
        };
        rows.push(ResultRow {
            method: fields[0].to_string(),
            task: fields[1].to_string(),
            seed: fields[2]
                .parse()
                .map_err(|_| fail(line, format!("bad seed `{}`", fields[2])))?,
            episode: fields[3]
                .parse()
                .map_err(|_| fail(line, format!("bad episode `{}`", fields[3])))?,
            success: num("success", fields[4])?,
            sigma: num("sigma", fields[5])?,
            mode: fields[6].to_string(),
        });
    }
    Ok(rows)
}

/// The source revision the binary was built from, if discoverable at run
/// time; "unknown" otherwise.
pub fn source_revision() -> String {
    Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    source_revision: String,
    created_unix: u64,
    artifacts: &'a [String],
}

/// The run manifest: the full config (sufficient to reproduce the run),
/// the source revision, a creation timestamp, and the artifact paths the
/// run will write. Meant to be written *before* the first episode so an
/// interrupted run still documents itself.
pub fn manifest_json(cfg: &ExperimentConfig, artifacts: &[String]) -> String {
    let created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let manifest =
        Manifest { config: cfg, source_revision: source_revision(), created_unix, artifacts };
    serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail")
}
