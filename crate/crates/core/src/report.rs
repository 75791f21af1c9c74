//! Results-directory output, re-loading, and cross-run comparison tables.
//!
//! A results directory contains: `config.txt` (canonical config echo),
//! `step_matrix.csv`, `traj_matrix.csv`, `fm.json`, `telemetry.csv`, and
//! `final.ckpt`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::format;
use crate::protocol::{run_continual, RunConfig, RunResult};
use crate::suite::Suite;

pub const CONFIG_FILE: &str = "config.txt";
pub const STEP_MATRIX_FILE: &str = "step_matrix.csv";
pub const TRAJ_MATRIX_FILE: &str = "traj_matrix.csv";
pub const FM_FILE: &str = "fm.json";
pub const TELEMETRY_FILE: &str = "telemetry.csv";
pub const CHECKPOINT_FILE: &str = "final.ckpt";

/// Writes every output artifact of a finished run.
pub fn write_run_outputs(dir: &Path, cfg: &RunConfig, result: &RunResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(CONFIG_FILE), config::run_config_to_string(cfg))?;
    std::fs::write(
        dir.join(STEP_MATRIX_FILE),
        format::matrix_to_csv(&result.step_matrix, &result.order),
    )?;
    std::fs::write(
        dir.join(TRAJ_MATRIX_FILE),
        format::matrix_to_csv(&result.traj_matrix, &result.order),
    )?;
    std::fs::write(
        dir.join(FM_FILE),
        format::fm_summary_json(cfg.method.kind.name(), cfg.seed, result),
    )?;
    std::fs::write(
        dir.join(TELEMETRY_FILE),
        format::telemetry_to_csv(&result.telemetry),
    )?;
    format::write_checkpoint(&result.final_model, &dir.join(CHECKPOINT_FILE))?;
    Ok(())
}

/// Loads the suite, runs the configured training, and writes the results
/// directory. The one-call backend of the `train` subcommand.
pub fn execute_run(cfg: &RunConfig, out_dir: &Path) -> Result<RunResult> {
    let suite_path = cfg
        .suite_path
        .as_ref()
        .ok_or_else(|| Error::config("run config missing `suite` path"))?;
    let suite = format::read_suite(suite_path)?;
    execute_run_with_suite(cfg, &suite, out_dir)
}

pub fn execute_run_with_suite(cfg: &RunConfig, suite: &Suite, out_dir: &Path) -> Result<RunResult> {
    let exec = Executor::new(cfg.workers);
    let result = run_continual(cfg, suite, &exec)?;
    write_run_outputs(out_dir, cfg, &result)?;
    Ok(result)
}

/// Headline numbers parsed back from one results directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub method: String,
    pub seed: u64,
    pub stages: usize,
    pub avg_step_acc: f64,
    pub avg_traj_acc: f64,
    pub fm_step: Option<f64>,
    pub fm_traj: Option<f64>,
}

fn json_field<'a>(text: &'a str, key: &str) -> Result<&'a str> {
    let needle = format!("\"{key}\":");
    for line in text.lines() {
        if let Some(rest) = line.trim().strip_prefix(&needle) {
            return Ok(rest.trim().trim_end_matches(','));
        }
    }
    Err(Error::parse(format!("missing field `{key}` in fm.json")))
}

fn json_opt_f64(raw: &str) -> Result<Option<f64>> {
    if raw == "null" {
        Ok(None)
    } else {
        format::parse_f64(raw).map(Some)
    }
}

/// Reads the summary of one results directory.
pub fn read_run_summary(dir: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(dir.join(FM_FILE))
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", dir.display())))?;
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        method: json_field(&text, "method")?.trim_matches('"').to_string(),
        seed: json_field(&text, "seed")?
            .parse()
            .map_err(|_| Error::parse("bad seed in fm.json"))?,
        stages: json_field(&text, "stages")?
            .parse()
            .map_err(|_| Error::parse("bad stages in fm.json"))?,
        avg_step_acc: format::parse_f64(json_field(&text, "avg_step_acc")?)?,
        avg_traj_acc: format::parse_f64(json_field(&text, "avg_traj_acc")?)?,
        fm_step: json_opt_f64(json_field(&text, "fm_step")?)?,
        fm_traj: json_opt_f64(json_field(&text, "fm_traj")?)?,
    })
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

fn opt_pct(v: Option<f64>) -> String {
    v.map(pct).unwrap_or_else(|| "-".to_string())
}

/// Method-by-metric comparison table across results directories.
pub fn summary_table(summaries: &[RunSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:>6} {:>14} {:>14} {:>10} {:>10}",
        "run", "seed", "avg-step-acc%", "avg-traj-acc%", "fm-step", "fm-traj"
    );
    for s in summaries {
        let name = s
            .dir
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| s.method.clone());
        let _ = writeln!(
            out,
            "{:<24} {:>6} {:>14} {:>14} {:>10} {:>10}",
            name,
            s.seed,
            pct(s.avg_step_acc),
            pct(s.avg_traj_acc),
            opt_pct(s.fm_step),
            opt_pct(s.fm_traj),
        );
    }
    out
}

/// CSV version of the comparison table.
pub fn summary_csv(summaries: &[RunSummary]) -> String {
    let mut out = String::from("run,method,seed,avg_step_acc,avg_traj_acc,fm_step,fm_traj\n");
    for s in summaries {
        let name = s
            .dir
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            name,
            s.method,
            s.seed,
            format::fmt_f64(s.avg_step_acc),
            format::fmt_f64(s.avg_traj_acc),
            s.fm_step.map(format::fmt_f64).unwrap_or_default(),
            s.fm_traj.map(format::fmt_f64).unwrap_or_default(),
        );
    }
    out
}

/// Extracts the plot-ready series (step, entropy, lambda, cos_alpha) from a
/// run's telemetry log.
pub fn series_csv(dir: &Path) -> Result<String> {
    let text = std::fs::read_to_string(dir.join(TELEMETRY_FILE))?;
    let mut out = String::from("step,mean_entropy,lambda,cos_alpha\n");
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < 10 {
            return Err(Error::parse(format!("short telemetry row `{line}`")));
        }
        let _ = writeln!(out, "{},{},{},{}", cells[0], cells[3], cells[4], cells[6]);
    }
    Ok(out)
}
