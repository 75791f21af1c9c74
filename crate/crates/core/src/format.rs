//! Text serialization: suite files, policy checkpoints, accuracy-matrix
//! CSVs, the FM summary, and telemetry logs. All floats are written with 17
//! significant digits so every value round-trips bit-for-bit; see
//! FORMATS.md at the repository root for the documented schemas.

use std::fmt::Write as _;
use std::path::Path;

use crate::action::{BoundingBox, GuiAction, ScrollDirection};
use crate::data::{Step, TaskDataset, Trajectory};
use crate::error::{Error, Result};
use crate::metrics::AccuracyMatrix;
use crate::policy::{PolicyModel, PolicyParams};
use crate::protocol::{RunResult, TelemetryRow};
use crate::suite::{Suite, SuiteConfig};

pub const SUITE_MAGIC: &str = "cgl-suite 1";
pub const CKPT_MAGIC: &str = "cgl-ckpt 1";

/// 17 significant digits: enough to reconstruct any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::parse(format!("bad float `{s}`")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| Error::parse(format!("bad integer `{s}`")))
}

fn parse_u64(s: &str) -> Result<u64> {
    s.parse::<u64>()
        .map_err(|_| Error::parse(format!("bad integer `{s}`")))
}

/// FNV-1a 64-bit digest, hex-encoded. Used to fingerprint generated files.
pub fn digest(bytes: &[u8]) -> String {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    format!("{h:016x}")
}

fn action_tokens(action: &GuiAction, out: &mut String) {
    match *action {
        GuiAction::Click { x, y } => {
            let _ = write!(out, "click {} {}", fmt_f64(x), fmt_f64(y));
        }
        GuiAction::LongPress { x, y } => {
            let _ = write!(out, "longpress {} {}", fmt_f64(x), fmt_f64(y));
        }
        GuiAction::InputText { token } => {
            let _ = write!(out, "input {token}");
        }
        GuiAction::Scroll { direction } => {
            let _ = write!(out, "scroll {}", direction.name());
        }
        GuiAction::OpenApp { app } => {
            let _ = write!(out, "open {app}");
        }
        GuiAction::Home => out.push_str("home"),
        GuiAction::Back => out.push_str("back"),
        GuiAction::Wait => out.push_str("wait"),
        GuiAction::Finish => out.push_str("finish"),
    }
}

fn parse_action(tokens: &mut std::slice::Iter<'_, &str>) -> Result<GuiAction> {
    let kind = tokens
        .next()
        .ok_or_else(|| Error::parse("missing action"))?;
    Ok(match *kind {
        "click" | "longpress" => {
            let x = parse_f64(tokens.next().ok_or_else(|| Error::parse("missing x"))?)?;
            let y = parse_f64(tokens.next().ok_or_else(|| Error::parse("missing y"))?)?;
            if *kind == "click" {
                GuiAction::Click { x, y }
            } else {
                GuiAction::LongPress { x, y }
            }
        }
        "input" => GuiAction::InputText {
            token: parse_usize(tokens.next().ok_or_else(|| Error::parse("missing token"))?)?
                as u32,
        },
        "scroll" => GuiAction::Scroll {
            direction: ScrollDirection::parse(
                tokens.next().ok_or_else(|| Error::parse("missing direction"))?,
            )?,
        },
        "open" => GuiAction::OpenApp {
            app: parse_usize(tokens.next().ok_or_else(|| Error::parse("missing app"))?)?
                as u32,
        },
        "home" => GuiAction::Home,
        "back" => GuiAction::Back,
        "wait" => GuiAction::Wait,
        "finish" => GuiAction::Finish,
        other => return Err(Error::parse(format!("unknown action `{other}`"))),
    })
}

/// Serializes a suite to its line-based text form.
pub fn suite_to_string(suite: &Suite) -> String {
    let c = &suite.config;
    let mut out = String::new();
    let _ = writeln!(out, "{SUITE_MAGIC}");
    let _ = writeln!(out, "n_tasks {}", c.n_tasks);
    let _ = writeln!(out, "apps_per_task {}", c.apps_per_task);
    let _ = writeln!(out, "trajs_per_app {}", c.trajs_per_app);
    let _ = writeln!(out, "steps_min {}", c.steps_min);
    let _ = writeln!(out, "steps_max {}", c.steps_max);
    let _ = writeln!(out, "d {}", c.d);
    let _ = writeln!(out, "d_i {}", c.d_i);
    let _ = writeln!(out, "grid {}", c.grid);
    let _ = writeln!(out, "vocab {}", c.vocab);
    let _ = writeln!(out, "domain_shift {}", fmt_f64(c.domain_shift));
    let _ = writeln!(out, "seed {}", c.seed);
    for task in &suite.tasks {
        let _ = writeln!(
            out,
            "task {} {} {} {}",
            task.task_id,
            task.name,
            task.train.len(),
            task.test.len()
        );
        for traj in task.train.iter().chain(&task.test) {
            let _ = writeln!(out, "traj {}", traj.steps.len());
            out.push_str("instr");
            for v in &traj.instruction {
                let _ = write!(out, " {}", fmt_f64(*v));
            }
            out.push('\n');
            for step in &traj.steps {
                out.push_str("step ");
                action_tokens(&step.gt_action, &mut out);
                match &step.gt_bbox {
                    Some(b) => {
                        let _ = write!(
                            out,
                            " bbox {} {} {} {}",
                            fmt_f64(b.x_min),
                            fmt_f64(b.y_min),
                            fmt_f64(b.x_max),
                            fmt_f64(b.y_max)
                        );
                    }
                    None => out.push_str(" nobox"),
                }
                out.push_str(" obs");
                for v in &step.observation {
                    let _ = write!(out, " {}", fmt_f64(*v));
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_suite(suite: &Suite, path: &Path) -> Result<()> {
    std::fs::write(path, suite_to_string(suite))?;
    Ok(())
}

/// Parses a suite file, validating dimensions and invariants.
pub fn suite_from_str(text: &str) -> Result<Suite> {
    let mut lines = text.lines();
    if lines.next() != Some(SUITE_MAGIC) {
        return Err(Error::parse(format!("expected `{SUITE_MAGIC}` header")));
    }
    let mut header = std::collections::HashMap::new();
    let mut rest: Vec<&str> = Vec::new();
    for line in lines.by_ref() {
        if line.starts_with("task ") {
            rest.push(line);
            break;
        }
        let (k, v) = line
            .split_once(' ')
            .ok_or_else(|| Error::parse(format!("bad header line `{line}`")))?;
        header.insert(k.to_string(), v.to_string());
    }
    rest.extend(lines);
    let get = |k: &str| -> Result<String> {
        header
            .get(k)
            .cloned()
            .ok_or_else(|| Error::parse(format!("missing header key `{k}`")))
    };
    let config = SuiteConfig {
        n_tasks: parse_usize(&get("n_tasks")?)?,
        apps_per_task: parse_usize(&get("apps_per_task")?)?,
        trajs_per_app: parse_usize(&get("trajs_per_app")?)?,
        steps_min: parse_usize(&get("steps_min")?)?,
        steps_max: parse_usize(&get("steps_max")?)?,
        d: parse_usize(&get("d")?)?,
        d_i: parse_usize(&get("d_i")?)?,
        grid: parse_usize(&get("grid")?)?,
        vocab: parse_usize(&get("vocab")?)?,
        domain_shift: parse_f64(&get("domain_shift")?)?,
        seed: parse_u64(&get("seed")?)?,
    };
    let mut tasks = Vec::new();
    let mut it = rest.into_iter().peekable();
    while let Some(line) = it.next() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 5 || tokens[0] != "task" {
            return Err(Error::parse(format!("expected task line, got `{line}`")));
        }
        let task_id = parse_usize(tokens[1])?;
        let name = tokens[2].to_string();
        let n_train = parse_usize(tokens[3])?;
        let n_test = parse_usize(tokens[4])?;
        let mut trajectories = Vec::with_capacity(n_train + n_test);
        for _ in 0..n_train + n_test {
            let traj_line = it
                .next()
                .ok_or_else(|| Error::parse("unexpected end of file in trajectory"))?;
            let n_steps = traj_line
                .strip_prefix("traj ")
                .ok_or_else(|| Error::parse(format!("expected traj line, got `{traj_line}`")))
                .and_then(parse_usize)?;
            let instr_line = it
                .next()
                .ok_or_else(|| Error::parse("missing instr line"))?;
            let instr_tokens: Vec<&str> = instr_line.split_whitespace().collect();
            if instr_tokens.first() != Some(&"instr") {
                return Err(Error::parse(format!("expected instr line, got `{instr_line}`")));
            }
            let instruction = instr_tokens[1..]
                .iter()
                .map(|t| parse_f64(t))
                .collect::<Result<Vec<f64>>>()?;
            let mut steps = Vec::with_capacity(n_steps);
            for _ in 0..n_steps {
                let step_line = it
                    .next()
                    .ok_or_else(|| Error::parse("missing step line"))?;
                let tokens: Vec<&str> = step_line.split_whitespace().collect();
                if tokens.first() != Some(&"step") {
                    return Err(Error::parse(format!("expected step line, got `{step_line}`")));
                }
                let mut iter = tokens[1..].iter();
                let gt_action = parse_action(&mut iter)?;
                let marker = iter
                    .next()
                    .ok_or_else(|| Error::parse("missing bbox marker"))?;
                let gt_bbox = match *marker {
                    "bbox" => {
                        let mut vals = [0.0; 4];
                        for v in vals.iter_mut() {
                            *v = parse_f64(
                                iter.next()
                                    .ok_or_else(|| Error::parse("missing bbox value"))?,
                            )?;
                        }
                        Some(BoundingBox::new(vals[0], vals[1], vals[2], vals[3])?)
                    }
                    "nobox" => None,
                    other => return Err(Error::parse(format!("bad bbox marker `{other}`"))),
                };
                let obs_marker = iter
                    .next()
                    .ok_or_else(|| Error::parse("missing obs marker"))?;
                if *obs_marker != "obs" {
                    return Err(Error::parse(format!("bad obs marker `{obs_marker}`")));
                }
                let observation = iter
                    .map(|t| parse_f64(t))
                    .collect::<Result<Vec<f64>>>()?;
                steps.push(Step {
                    observation,
                    gt_action,
                    gt_bbox,
                });
            }
            trajectories.push(Trajectory { instruction, steps });
        }
        let test = trajectories.split_off(n_train);
        let dataset = TaskDataset {
            task_id,
            name,
            train: trajectories,
            test,
        };
        dataset.validate(config.d, config.d_i)?;
        tasks.push(dataset);
    }
    if tasks.len() != config.n_tasks {
        return Err(Error::parse(format!(
            "header says {} tasks, found {}",
            config.n_tasks,
            tasks.len()
        )));
    }
    Ok(Suite { config, tasks })
}

pub fn read_suite(path: &Path) -> Result<Suite> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read suite {}: {e}", path.display())))?;
    suite_from_str(&text)
}

/// Checkpoint: header plus one parameter per line.
pub fn checkpoint_to_string(model: &PolicyModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CKPT_MAGIC}");
    let _ = writeln!(out, "actions {}", model.action_count());
    let _ = writeln!(out, "input_dim {}", model.input_dim());
    for w in model.params() {
        let _ = writeln!(out, "{}", fmt_f64(*w));
    }
    out
}

pub fn write_checkpoint(model: &PolicyModel, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_to_string(model))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<PolicyModel> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CKPT_MAGIC) {
        return Err(Error::parse(format!("expected `{CKPT_MAGIC}` header")));
    }
    let actions = lines
        .next()
        .and_then(|l| l.strip_prefix("actions "))
        .ok_or_else(|| Error::parse("missing actions line"))
        .and_then(parse_usize)?;
    let input_dim = lines
        .next()
        .and_then(|l| l.strip_prefix("input_dim "))
        .ok_or_else(|| Error::parse("missing input_dim line"))
        .and_then(parse_usize)?;
    let params = lines
        .map(parse_f64)
        .collect::<Result<Vec<f64>>>()?;
    PolicyModel::from_params(actions, input_dim, PolicyParams(params))
}

/// Accuracy matrix as CSV: `stage` column then one column per trained task
/// in training order; short rows leave trailing cells empty.
pub fn matrix_to_csv(matrix: &AccuracyMatrix, order: &[usize]) -> String {
    let mut out = String::from("stage");
    for task in order {
        let _ = write!(out, ",task{task}");
    }
    out.push('\n');
    for (n, row) in matrix.rows.iter().enumerate() {
        let _ = write!(out, "{}", n + 1);
        for k in 0..order.len() {
            match row.get(k) {
                Some(v) => {
                    let _ = write!(out, ",{}", fmt_f64(*v));
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn telemetry_to_csv(rows: &[TelemetryRow]) -> String {
    let mut out = String::from(
        "step,task,step_in_task,mean_entropy,lambda,routed_fraction,cos_alpha,grad_grpo,grad_sft_raw,grad_sft_final\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.global_step,
            r.task_id,
            r.step_in_task,
            fmt_f64(r.mean_entropy),
            opt_cell(r.lambda),
            opt_cell(r.routed_fraction),
            opt_cell(r.cos_alpha),
            opt_cell(r.grad_grpo),
            opt_cell(r.grad_sft_raw),
            opt_cell(r.grad_sft_final),
        );
    }
    out
}

fn json_f64(v: Option<f64>) -> String {
    match v {
        Some(x) => fmt_f64(x),
        None => "null".to_string(),
    }
}

/// Flat JSON summary of one run's headline numbers.
pub fn fm_summary_json(method: &str, seed: u64, result: &RunResult) -> String {
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"schema\": \"cgl-fm/1\",");
    let _ = writeln!(out, "  \"method\": \"{method}\",");
    let _ = writeln!(out, "  \"seed\": {seed},");
    let _ = writeln!(out, "  \"stages\": {},", result.step_matrix.rows.len());
    let _ = writeln!(out, "  \"avg_step_acc\": {},", fmt_f64(result.avg_step_acc));
    let _ = writeln!(out, "  \"avg_traj_acc\": {},", fmt_f64(result.avg_traj_acc));
    let _ = writeln!(out, "  \"fm_step\": {},", json_f64(result.fm_step));
    let _ = writeln!(out, "  \"fm_traj\": {}", json_f64(result.fm_traj));
    out.push_str("}\n");
    out
}
