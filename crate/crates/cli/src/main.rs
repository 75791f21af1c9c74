//! `cgl` — command-line driver for the continual GUI-agent learning lab.
//!
//! Subcommands: `generate` a synthetic task suite, `train` a continual run,
//! `report` comparison tables and plot series from results directories,
//! `verify` the entropy-dynamics checks.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input error,
//! 3 config mismatch.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cgl_core::config;
use cgl_core::exec::Executor;
use cgl_core::format;
use cgl_core::report;
use cgl_core::suite::generate_suite;
use cgl_core::theory;
use cgl_core::Error;

#[derive(Parser)]
#[command(name = "cgl", version, about = "Continual GUI-agent learning lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic task suite file from a suite config.
    Generate {
        /// Suite config file (`cgl-suite-config 1` schema). Omit for the
        /// default 7-task suite.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output suite file.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for generation.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Run continual training from a run config and write a results dir.
    Train {
        /// Run config file (`cgl-run 1` schema).
        #[arg(long)]
        config: PathBuf,
        /// Results directory (overrides the config's `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (overrides the config's `workers`).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Summarize one or more results directories and emit plot series.
    Report {
        /// Results directories.
        dirs: Vec<PathBuf>,
        /// Where to write summary.csv and per-run series files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the entropy-dynamics verification checks.
    Verify {
        /// Trials per check per seed.
        #[arg(long, default_value_t = 400)]
        trials: usize,
        /// Number of independent seeds.
        #[arg(long, default_value_t = 100)]
        seeds: usize,
        /// Optional path for the machine-readable report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Verification(_) => 1,
        Error::Config(_) => 3,
        _ => 2,
    }
}

fn cmd_generate(config: Option<&Path>, out: &Path, workers: usize) -> Result<(), Error> {
    let cfg = match config {
        Some(path) => config::read_suite_config(path)?,
        None => cgl_core::suite::SuiteConfig::default(),
    };
    let suite = generate_suite(&cfg, &Executor::new(workers))?;
    let text = format::suite_to_string(&suite);
    std::fs::write(out, &text)?;
    println!(
        "suite: {} tasks x {} apps x {} trajectories (train {} / test {} per task)",
        cfg.n_tasks,
        cfg.apps_per_task,
        cfg.trajs_per_app,
        suite.tasks[0].train.len(),
        suite.tasks[0].test.len()
    );
    println!("{:<10} {:>6} {:>14} {:>12} {:>12}", "task", "apps", "trajectories", "steps", "clicks");
    for task in &suite.tasks {
        let steps: usize = task
            .train
            .iter()
            .chain(&task.test)
            .map(|t| t.steps.len())
            .sum();
        let clicks: usize = task
            .train
            .iter()
            .chain(&task.test)
            .flat_map(|t| &t.steps)
            .filter(|s| s.gt_bbox.is_some())
            .count();
        println!(
            "{:<10} {:>6} {:>14} {:>12} {:>12}",
            task.name,
            cfg.apps_per_task,
            task.train.len() + task.test.len(),
            steps,
            clicks
        );
    }
    println!("digest {}", format::digest(text.as_bytes()));
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_train(config: &Path, out: Option<PathBuf>, workers: Option<usize>) -> Result<(), Error> {
    let mut cfg = config::read_run_config(config)?;
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let out_dir = out
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| Error::config("no output directory: pass --out or set `out`"))?;
    let result = report::execute_run(&cfg, &out_dir)?;
    println!(
        "method {} seed {}: avg step acc {:.2}%, avg traj acc {:.2}%, fm {}",
        cfg.method.kind.name(),
        cfg.seed,
        100.0 * result.avg_step_acc,
        100.0 * result.avg_traj_acc,
        result
            .fm_step
            .map(|f| format!("{:.2}", 100.0 * f))
            .unwrap_or_else(|| "-".into()),
    );
    println!("results in {}", out_dir.display());
    Ok(())
}

fn cmd_report(dirs: &[PathBuf], out: Option<&Path>) -> Result<(), Error> {
    if dirs.is_empty() {
        return Err(Error::invalid("report needs at least one results directory"));
    }
    let mut summaries = Vec::new();
    for dir in dirs {
        match report::read_run_summary(dir) {
            Ok(s) => summaries.push(s),
            Err(e) => eprintln!("warning: skipping {}: {e}", dir.display()),
        }
    }
    if summaries.is_empty() {
        return Err(Error::invalid("no readable results directories"));
    }
    print!("{}", report::summary_table(&summaries));
    if let Some(out_dir) = out {
        std::fs::create_dir_all(out_dir)?;
        std::fs::write(out_dir.join("summary.csv"), report::summary_csv(&summaries))?;
        for s in &summaries {
            let name = s
                .dir
                .file_name()
                .map(|n| n.to_string_lossy().to_string())
                .unwrap_or_else(|| s.method.clone());
            match report::series_csv(&s.dir) {
                Ok(series) => {
                    std::fs::write(out_dir.join(format!("series_{name}.csv")), series)?;
                }
                Err(e) => eprintln!("warning: no series for {}: {e}", s.dir.display()),
            }
        }
        println!("wrote {}", out_dir.display());
    }
    Ok(())
}

fn cmd_verify(trials: usize, seeds: usize, out: Option<&Path>, workers: usize) -> Result<(), Error> {
    let report = theory::run_all(seeds, trials, &Executor::new(workers))?;
    println!(
        "entropy-covariance: {}",
        if report.covariance_failures == 0 { "pass" } else { "FAIL" }
    );
    println!(
        "matthew-effect:     {} (aligned {:.3}, anti {:.3})",
        if report.matthew_failures == 0 { "pass" } else { "FAIL" },
        report.matthew_aligned_rate,
        report.matthew_anti_rate
    );
    println!(
        "sft-injection:      {} (cov {:.3}, rise {:.3})",
        if report.injection_failures == 0 { "pass" } else { "FAIL" },
        report.injection_cov_rate,
        report.injection_rise_rate
    );
    if let Some(path) = out {
        std::fs::write(path, report.to_json())?;
        println!("report written to {}", path.display());
    }
    match report.first_failure() {
        None => Ok(()),
        Some(name) => Err(Error::Verification(format!("check `{name}` failed"))),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate {
            config,
            out,
            workers,
        } => cmd_generate(config.as_deref(), &out, workers),
        Command::Train {
            config,
            out,
            workers,
        } => cmd_train(&config, out, workers),
        Command::Report { dirs, out } => cmd_report(&dirs, out.as_deref()),
        Command::Verify {
            trials,
            seeds,
            out,
            workers,
        } => cmd_verify(trials, seeds, out.as_deref(), workers),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
