//! Config files: a line-based `key value` format with a mandatory schema
//! header. Unknown keys are errors, not warnings; silent config drift is
//! the main reproducibility hazard.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::format::{fmt_f64, parse_f64};
use crate::protocol::{MethodKind, MethodSpec, OrderSpec, RunConfig};
use crate::suite::SuiteConfig;

pub const SUITE_CONFIG_SCHEMA: &str = "cgl-suite-config 1";
pub const RUN_CONFIG_SCHEMA: &str = "cgl-run 1";

/// Splits a config file into its schema line and `key value` pairs.
/// Blank lines and `#` comments are ignored.
fn parse_kv(text: &str, expected_schema: &str) -> Result<Vec<(String, String)>> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let schema = lines
        .next()
        .ok_or_else(|| Error::config("empty config file"))?;
    if schema != expected_schema {
        return Err(Error::config(format!(
            "expected schema `{expected_schema}`, found `{schema}`"
        )));
    }
    let mut pairs = Vec::new();
    for line in lines {
        let (k, v) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::config(format!("bad config line `{line}`")))?;
        pairs.push((k.to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::config(format!("key `{key}`: bad integer `{v}`")))
}

fn parse_u64_v(key: &str, v: &str) -> Result<u64> {
    v.parse()
        .map_err(|_| Error::config(format!("key `{key}`: bad integer `{v}`")))
}

fn parse_float(key: &str, v: &str) -> Result<f64> {
    parse_f64(v).map_err(|_| Error::config(format!("key `{key}`: bad float `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::config(format!("key `{key}`: expected true/false, got `{v}`"))),
    }
}

/// Parses a suite-generation config.
pub fn suite_config_from_str(text: &str) -> Result<SuiteConfig> {
    let mut cfg = SuiteConfig::default();
    for (k, v) in parse_kv(text, SUITE_CONFIG_SCHEMA)? {
        match k.as_str() {
            "n_tasks" => cfg.n_tasks = parse_usize(&k, &v)?,
            "apps_per_task" => cfg.apps_per_task = parse_usize(&k, &v)?,
            "trajs_per_app" => cfg.trajs_per_app = parse_usize(&k, &v)?,
            "steps_min" => cfg.steps_min = parse_usize(&k, &v)?,
            "steps_max" => cfg.steps_max = parse_usize(&k, &v)?,
            "d" => cfg.d = parse_usize(&k, &v)?,
            "d_i" => cfg.d_i = parse_usize(&k, &v)?,
            "grid" => cfg.grid = parse_usize(&k, &v)?,
            "vocab" => cfg.vocab = parse_usize(&k, &v)?,
            "domain_shift" => cfg.domain_shift = parse_float(&k, &v)?,
            "seed" => cfg.seed = parse_u64_v(&k, &v)?,
            other => return Err(Error::config(format!("unknown suite config key `{other}`"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_suite_config(path: &Path) -> Result<SuiteConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
    suite_config_from_str(&text)
}

pub fn suite_config_to_string(cfg: &SuiteConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{SUITE_CONFIG_SCHEMA}");
    let _ = writeln!(out, "n_tasks {}", cfg.n_tasks);
    let _ = writeln!(out, "apps_per_task {}", cfg.apps_per_task);
    let _ = writeln!(out, "trajs_per_app {}", cfg.trajs_per_app);
    let _ = writeln!(out, "steps_min {}", cfg.steps_min);
    let _ = writeln!(out, "steps_max {}", cfg.steps_max);
    let _ = writeln!(out, "d {}", cfg.d);
    let _ = writeln!(out, "d_i {}", cfg.d_i);
    let _ = writeln!(out, "grid {}", cfg.grid);
    let _ = writeln!(out, "vocab {}", cfg.vocab);
    let _ = writeln!(out, "domain_shift {}", fmt_f64(cfg.domain_shift));
    let _ = writeln!(out, "seed {}", cfg.seed);
    out
}

fn parse_order(v: &str) -> Result<OrderSpec> {
    match v {
        "order1" => Ok(OrderSpec::Preset(1)),
        "order2" => Ok(OrderSpec::Preset(2)),
        "order3" => Ok(OrderSpec::Preset(3)),
        list => {
            let ids = list
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::config(format!("bad order entry `{t}`")))
                })
                .collect::<Result<Vec<usize>>>()?;
            Ok(OrderSpec::Explicit(ids))
        }
    }
}

fn order_to_string(order: &OrderSpec) -> String {
    match order {
        OrderSpec::Preset(n) => format!("order{n}"),
        OrderSpec::Explicit(ids) => ids
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(","),
    }
}

/// Parses a run config. `method` and `order` are required; everything else
/// has defaults.
pub fn run_config_from_str(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(MethodSpec::new(MethodKind::Sft));
    let mut saw_method = false;
    let mut saw_order = false;
    for (k, v) in parse_kv(text, RUN_CONFIG_SCHEMA)? {
        match k.as_str() {
            "suite" => cfg.suite_path = Some(PathBuf::from(v)),
            "out" => cfg.out_dir = Some(PathBuf::from(v)),
            "method" => {
                cfg.method.kind = MethodKind::parse(&v)?;
                saw_method = true;
            }
            "order" => {
                cfg.order = parse_order(&v)?;
                saw_order = true;
            }
            "seed" => cfg.seed = parse_u64_v(&k, &v)?,
            "steps_per_task" => cfg.steps_per_task = parse_usize(&k, &v)?,
            "batch_size" => cfg.batch_size = parse_usize(&k, &v)?,
            "group_size" => cfg.group_size = parse_usize(&k, &v)?,
            "g_box" => cfg.g_box = parse_usize(&k, &v)?,
            "learning_rate" => cfg.learning_rate = parse_float(&k, &v)?,
            "rl_learning_rate" => cfg.rl_learning_rate = parse_float(&k, &v)?,
            "kl_beta" => cfg.beta = parse_float(&k, &v)?,
            "clip_eps" => cfg.clip_eps = parse_float(&k, &v)?,
            "lambda_max" => cfg.scheduler.lambda_max = parse_float(&k, &v)?,
            "lambda_min" => cfg.scheduler.lambda_min = parse_float(&k, &v)?,
            "step_w" => cfg.scheduler.step_w = parse_usize(&k, &v)?,
            "gamma" => cfg.scheduler.gamma = parse_float(&k, &v)?,
            "k" => cfg.scheduler.k = parse_float(&k, &v)?,
            "h_max" => cfg.scheduler.h_max = parse_float(&k, &v)?,
            "normalize_entropy" => cfg.scheduler.normalize_entropy = parse_bool(&k, &v)?,
            "clamp_h_max" => cfg.scheduler.clamp_h_max = parse_bool(&k, &v)?,
            "use_routing" => cfg.method.use_routing = parse_bool(&k, &v)?,
            "use_dynamic_lambda" => cfg.method.use_dynamic_lambda = parse_bool(&k, &v)?,
            "use_surgery" => cfg.method.use_surgery = parse_bool(&k, &v)?,
            "static_lambda" => cfg.method.static_lambda = parse_float(&k, &v)?,
            "replay_fraction" => cfg.method.replay_fraction = parse_float(&k, &v)?,
            "workers" => cfg.workers = parse_usize(&k, &v)?,
            other => return Err(Error::config(format!("unknown run config key `{other}`"))),
        }
    }
    if !saw_method || !saw_order {
        return Err(Error::config("run config requires `method` and `order`"));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
    run_config_from_str(&text)
}

/// Canonical echo of a run config, written into the results directory.
pub fn run_config_to_string(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{RUN_CONFIG_SCHEMA}");
    if let Some(p) = &cfg.suite_path {
        let _ = writeln!(out, "suite {}", p.display());
    }
    let _ = writeln!(out, "method {}", cfg.method.kind.name());
    let _ = writeln!(out, "order {}", order_to_string(&cfg.order));
    let _ = writeln!(out, "seed {}", cfg.seed);
    let _ = writeln!(out, "steps_per_task {}", cfg.steps_per_task);
    let _ = writeln!(out, "batch_size {}", cfg.batch_size);
    let _ = writeln!(out, "group_size {}", cfg.group_size);
    let _ = writeln!(out, "g_box {}", cfg.g_box);
    let _ = writeln!(out, "learning_rate {}", fmt_f64(cfg.learning_rate));
    let _ = writeln!(out, "rl_learning_rate {}", fmt_f64(cfg.rl_learning_rate));
    let _ = writeln!(out, "kl_beta {}", fmt_f64(cfg.beta));
    let _ = writeln!(out, "clip_eps {}", fmt_f64(cfg.clip_eps));
    let _ = writeln!(out, "lambda_max {}", fmt_f64(cfg.scheduler.lambda_max));
    let _ = writeln!(out, "lambda_min {}", fmt_f64(cfg.scheduler.lambda_min));
    let _ = writeln!(out, "step_w {}", cfg.scheduler.step_w);
    let _ = writeln!(out, "gamma {}", fmt_f64(cfg.scheduler.gamma));
    let _ = writeln!(out, "k {}", fmt_f64(cfg.scheduler.k));
    let _ = writeln!(out, "h_max {}", fmt_f64(cfg.scheduler.h_max));
    let _ = writeln!(out, "normalize_entropy {}", cfg.scheduler.normalize_entropy);
    let _ = writeln!(out, "clamp_h_max {}", cfg.scheduler.clamp_h_max);
    let _ = writeln!(out, "use_routing {}", cfg.method.use_routing);
    let _ = writeln!(out, "use_dynamic_lambda {}", cfg.method.use_dynamic_lambda);
    let _ = writeln!(out, "use_surgery {}", cfg.method.use_surgery);
    let _ = writeln!(out, "static_lambda {}", fmt_f64(cfg.method.static_lambda));
    let _ = writeln!(out, "replay_fraction {}", fmt_f64(cfg.method.replay_fraction));
    let _ = writeln!(out, "workers {}", cfg.workers);
    out
}
