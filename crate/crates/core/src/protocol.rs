//! Continual-learning driver: sequential task training under strict data
//! isolation with parameter inheritance, cumulative evaluation after every
//! stage, and the full set of update rules (SFT, SFT+KL, SFT+Replay, GRPO,
//! the hybrid rule, and a joint-training upper bound).

use std::path::PathBuf;

use crate::action::ActionSpace;
use crate::data::TaskDataset;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::grpo::Query;
use crate::hybrid::{self, HybridConfig, SchedulerState};
use crate::metrics::{self, AccuracyMatrix, MetricKind};
use crate::policy::{accumulate_outer, PolicyModel};
use crate::rng::{stream_id, RngStream};
use crate::sft;
use crate::suite::Suite;

const S_BATCH: u64 = 20;
const S_STEP: u64 = 21;
const S_REPLAY: u64 = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Sft,
    SftKl,
    SftReplay,
    Grpo,
    Cgl,
    /// Multi-task training on the union of all train sets; the
    /// upper-bound reference, not a sequential method.
    Joint,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Sft => "sft",
            MethodKind::SftKl => "sft_kl",
            MethodKind::SftReplay => "sft_replay",
            MethodKind::Grpo => "grpo",
            MethodKind::Cgl => "cgl",
            MethodKind::Joint => "joint",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "sft" => MethodKind::Sft,
            "sft_kl" => MethodKind::SftKl,
            "sft_replay" => MethodKind::SftReplay,
            "grpo" => MethodKind::Grpo,
            "cgl" => MethodKind::Cgl,
            "joint" => MethodKind::Joint,
            other => return Err(Error::config(format!("unknown method `{other}`"))),
        })
    }
}

/// A training method plus its toggles. The ablation switches only matter
/// for the hybrid method; `replay_fraction` only for SFT+Replay.
#[derive(Debug, Clone)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub use_routing: bool,
    pub use_dynamic_lambda: bool,
    pub use_surgery: bool,
    pub static_lambda: f64,
    pub replay_fraction: f64,
}

impl MethodSpec {
    pub fn new(kind: MethodKind) -> Self {
        MethodSpec {
            kind,
            use_routing: true,
            use_dynamic_lambda: true,
            use_surgery: true,
            static_lambda: 1.0,
            replay_fraction: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.replay_fraction) || self.replay_fraction <= 0.0 {
            return Err(Error::config("replay_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Task ordering: the three named presets for 7-task suites, or an explicit
/// permutation.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderSpec {
    Preset(u8),
    Explicit(Vec<usize>),
}

impl OrderSpec {
    pub fn resolve(&self, n_tasks: usize) -> Result<Vec<usize>> {
        let order = match self {
            OrderSpec::Preset(n) => {
                if n_tasks != 7 {
                    return Err(Error::config(format!(
                        "order preset {n} requires a 7-task suite, got {n_tasks}"
                    )));
                }
                match n {
                    1 => vec![0, 1, 2, 3, 4, 5, 6],
                    2 => vec![0, 6, 5, 4, 3, 2, 1],
                    3 => vec![5, 6, 3, 0, 2, 1, 4],
                    other => return Err(Error::config(format!("unknown order preset {other}"))),
                }
            }
            OrderSpec::Explicit(v) => v.clone(),
        };
        if order.len() != n_tasks {
            return Err(Error::config(format!(
                "order length {} != task count {n_tasks}",
                order.len()
            )));
        }
        let mut seen = vec![false; n_tasks];
        for &t in &order {
            if t >= n_tasks || seen[t] {
                return Err(Error::config("order must be a permutation of task ids"));
            }
            seen[t] = true;
        }
        Ok(order)
    }
}

/// Everything that defines one training run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub suite_path: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub method: MethodSpec,
    pub order: OrderSpec,
    pub seed: u64,
    pub steps_per_task: usize,
    pub batch_size: usize,
    pub group_size: usize,
    pub g_box: usize,
    /// Step size for the supervised family.
    pub learning_rate: f64,
    /// Step size for the rollout-based family; an order of magnitude
    /// below the supervised one, mirroring the usual SFT/RL split.
    pub rl_learning_rate: f64,
    pub beta: f64,
    pub clip_eps: f64,
    pub scheduler: SchedulerState,
    pub workers: usize,
}

impl RunConfig {
    pub fn new(method: MethodSpec) -> Self {
        RunConfig {
            suite_path: None,
            out_dir: None,
            method,
            order: OrderSpec::Explicit(Vec::new()),
            seed: 0,
            steps_per_task: 300,
            batch_size: 16,
            group_size: 8,
            g_box: 8,
            learning_rate: 1.0,
            rl_learning_rate: 0.1,
            beta: 0.01,
            clip_eps: 0.2,
            scheduler: SchedulerState::default(),
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.method.validate()?;
        self.scheduler.validate()?;
        if self.steps_per_task == 0 || self.batch_size == 0 {
            return Err(Error::config("steps_per_task and batch_size must be positive"));
        }
        if self.group_size < 2 {
            return Err(Error::config("group_size must be >= 2"));
        }
        Ok(())
    }

    fn hybrid_config(&self, method: &MethodSpec) -> HybridConfig {
        let grpo_only = method.kind == MethodKind::Grpo;
        HybridConfig {
            group_size: self.group_size,
            g_box: self.g_box,
            learning_rate: self.rl_learning_rate,
            clip_eps: self.clip_eps,
            beta: self.beta,
            use_routing: if grpo_only { true } else { method.use_routing },
            use_dynamic_lambda: if grpo_only { false } else { method.use_dynamic_lambda },
            use_surgery: if grpo_only { false } else { method.use_surgery },
            static_lambda: if grpo_only { 0.0 } else { method.static_lambda },
        }
    }
}

/// One telemetry row per optimizer step. Fields not defined for a method
/// stay empty.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRow {
    pub global_step: usize,
    pub task_id: usize,
    pub step_in_task: usize,
    pub mean_entropy: f64,
    pub lambda: Option<f64>,
    pub routed_fraction: Option<f64>,
    pub cos_alpha: Option<f64>,
    pub grad_grpo: Option<f64>,
    pub grad_sft_raw: Option<f64>,
    pub grad_sft_final: Option<f64>,
}

/// Output of one continual (or joint) run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub order: Vec<usize>,
    pub step_matrix: AccuracyMatrix,
    pub traj_matrix: AccuracyMatrix,
    pub fm_step: Option<f64>,
    pub fm_traj: Option<f64>,
    pub avg_step_acc: f64,
    pub avg_traj_acc: f64,
    pub telemetry: Vec<TelemetryRow>,
    pub final_model: PolicyModel,
}

fn task_queries(task: &TaskDataset) -> Vec<Query> {
    let mut queries = Vec::new();
    for traj in &task.train {
        for (si, step) in traj.steps.iter().enumerate() {
            queries.push(Query {
                features: traj.combined_features(si),
                gt_action: step.gt_action,
                gt_bbox: step.gt_bbox,
                task_id: task.task_id,
                from_replay: false,
            });
        }
    }
    queries
}

fn enforce_isolation(batch: &[Query], current_task: usize, method: &MethodSpec) -> Result<()> {
    for q in batch {
        let allowed = q.task_id == current_task
            || (method.kind == MethodKind::SftReplay && q.from_replay)
            || method.kind == MethodKind::Joint;
        if !allowed {
            return Err(Error::Contract(format!(
                "data isolation violated: task {} query in task {current_task} training",
                q.task_id
            )));
        }
    }
    Ok(())
}

/// Supervised step shared by SFT, SFT+KL, SFT+Replay, and the mandatory
/// SFT stage on the first task. `model_ref` adds the `beta * KL` anchor.
#[allow(clippy::too_many_arguments)]
fn sft_family_step(
    model: &mut PolicyModel,
    model_ref: Option<&PolicyModel>,
    space: &ActionSpace,
    batch: &[Query],
    lr: f64,
    beta: f64,
    g_box: usize,
    step_seed: u64,
    exec: &Executor,
) -> Result<TelemetryParts> {
    let results: Vec<Result<(Vec<f64>, f64)>> = exec.map_indexed(batch, |qi, query| {
        let dist = model.forward(&query.features)?;
        let mut bbox_rng = RngStream::new(step_seed, stream_id(&[2, qi as u64]));
        let targets = sft::sft_targets(space, query, g_box, &mut bbox_rng)?;
        let (_, mut logit_grad) = sft::sft_logit_loss_grad(&dist, &targets);
        if let Some(reference) = model_ref {
            let dist_ref = reference.forward(&query.features)?;
            for (g, kg) in logit_grad.iter_mut().zip(dist.kl_logit_grad(&dist_ref)) {
                *g += beta * kg;
            }
        }
        Ok((logit_grad, dist.entropy()))
    });
    let mut grad = vec![0.0; model.param_count()];
    let scale = 1.0 / batch.len() as f64;
    let mut entropy_sum = 0.0;
    for (query, r) in batch.iter().zip(results) {
        let (logit_grad, entropy) = r?;
        accumulate_outer(&mut grad, &logit_grad, &query.features, scale);
        entropy_sum += entropy;
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    model.apply_gradient(&grad, lr);
    Ok(TelemetryParts {
        mean_entropy: entropy_sum * scale,
        lambda: None,
        routed_fraction: None,
        cos_alpha: None,
        grad_grpo: None,
        grad_sft_raw: Some(norm),
        grad_sft_final: Some(norm),
    })
}

struct TelemetryParts {
    mean_entropy: f64,
    lambda: Option<f64>,
    routed_fraction: Option<f64>,
    cos_alpha: Option<f64>,
    grad_grpo: Option<f64>,
    grad_sft_raw: Option<f64>,
    grad_sft_final: Option<f64>,
}

/// Applies one optimizer step of `method` to `model` on `batch`.
#[allow(clippy::too_many_arguments)]
fn method_step(
    method: &MethodSpec,
    cfg: &RunConfig,
    model: &mut PolicyModel,
    model_ref: &PolicyModel,
    space: &ActionSpace,
    batch: &[Query],
    sched: &mut SchedulerState,
    step_seed: u64,
    exec: &Executor,
) -> Result<TelemetryParts> {
    match method.kind {
        MethodKind::Sft | MethodKind::SftReplay | MethodKind::Joint => sft_family_step(
            model,
            None,
            space,
            batch,
            cfg.learning_rate,
            0.0,
            cfg.g_box,
            step_seed,
            exec,
        ),
        MethodKind::SftKl => sft_family_step(
            model,
            Some(model_ref),
            space,
            batch,
            cfg.learning_rate,
            cfg.beta,
            cfg.g_box,
            step_seed,
            exec,
        ),
        MethodKind::Grpo | MethodKind::Cgl => {
            let hybrid_cfg = cfg.hybrid_config(method);
            let model_old = model.clone();
            let report = hybrid::hybrid_step(
                model,
                &model_old,
                model_ref,
                space,
                batch,
                sched,
                &hybrid_cfg,
                step_seed,
                exec,
            )?;
            Ok(TelemetryParts {
                mean_entropy: report.mean_entropy,
                lambda: Some(report.lambda_used),
                routed_fraction: Some(report.routed_queries as f64 / report.batch_size as f64),
                cos_alpha: report.cos_alpha,
                grad_grpo: Some(report.grad_norm_grpo),
                grad_sft_raw: Some(report.grad_norm_sft_raw),
                grad_sft_final: Some(report.grad_norm_sft_final),
            })
        }
    }
}

fn draw_batch(
    pool: &[Query],
    replay: &[Query],
    batch_size: usize,
    rng: &mut RngStream,
) -> Vec<Query> {
    let total = pool.len() + replay.len();
    (0..batch_size)
        .map(|_| {
            let i = rng.below_usize(total);
            if i < pool.len() {
                pool[i].clone()
            } else {
                replay[i - pool.len()].clone()
            }
        })
        .collect()
}

fn evaluate_row(
    model: &PolicyModel,
    space: &ActionSpace,
    suite: &Suite,
    seen: &[usize],
    exec: &Executor,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut step_row = Vec::with_capacity(seen.len());
    let mut traj_row = Vec::with_capacity(seen.len());
    for &task_id in seen {
        let (s, t) = metrics::eval_dataset(model, space, &suite.tasks[task_id], exec)?;
        step_row.push(s);
        traj_row.push(t);
    }
    Ok((step_row, traj_row))
}

/// Runs the full sequential protocol (or joint training) and returns the
/// accuracy matrices, forgetting measures, telemetry, and final model.
///
/// Every method trains the first task in its order with pure SFT to
/// establish a shared starting point; the method's own rule applies from
/// the second task onward.
pub fn run_continual(cfg: &RunConfig, suite: &Suite, exec: &Executor) -> Result<RunResult> {
    cfg.validate()?;
    let order = cfg.order.resolve(suite.tasks.len())?;
    let space = suite.config.action_space();
    let input_dim = suite.config.input_dim();
    let mut model = PolicyModel::zeros(space.len(), input_dim);

    if cfg.method.kind == MethodKind::Joint {
        return run_joint(cfg, suite, &order, model, exec);
    }

    let mut sched = cfg.scheduler.clone();
    let mut telemetry = Vec::new();
    let mut step_matrix = AccuracyMatrix::new(MetricKind::Step);
    let mut traj_matrix = AccuracyMatrix::new(MetricKind::Trajectory);
    let mut replay: Vec<Query> = Vec::new();
    let mut global_step = 0usize;
    let pure_sft = MethodSpec::new(MethodKind::Sft);

    for (pos, &task_id) in order.iter().enumerate() {
        let pool = task_queries(&suite.tasks[task_id]);
        let model_ref = model.clone();
        sched.start_task();
        // first task: SFT for every method, per the shared-baseline protocol
        let method = if pos == 0 { &pure_sft } else { &cfg.method };
        let replay_pool: &[Query] =
            if cfg.method.kind == MethodKind::SftReplay && method.kind == MethodKind::SftReplay {
                &replay
            } else {
                &[]
            };
        for step in 0..cfg.steps_per_task {
            let mut batch_rng = RngStream::new(
                cfg.seed,
                stream_id(&[S_BATCH, pos as u64, step as u64]),
            );
            let batch = draw_batch(&pool, replay_pool, cfg.batch_size, &mut batch_rng);
            enforce_isolation(&batch, task_id, method)?;
            let step_seed = stream_id(&[S_STEP, cfg.seed, pos as u64, step as u64]);
            let parts = method_step(
                method, cfg, &mut model, &model_ref, &space, &batch, &mut sched, step_seed, exec,
            )?;
            telemetry.push(TelemetryRow {
                global_step,
                task_id,
                step_in_task: step,
                mean_entropy: parts.mean_entropy,
                lambda: parts.lambda,
                routed_fraction: parts.routed_fraction,
                cos_alpha: parts.cos_alpha,
                grad_grpo: parts.grad_grpo,
                grad_sft_raw: parts.grad_sft_raw,
                grad_sft_final: parts.grad_sft_final,
            });
            global_step += 1;
        }
        if cfg.method.kind == MethodKind::SftReplay {
            let mut replay_rng =
                RngStream::new(cfg.seed, stream_id(&[S_REPLAY, pos as u64]));
            replay.extend(sample_replay(
                &suite.tasks[task_id],
                cfg.method.replay_fraction,
                &mut replay_rng,
            ));
        }
        let (step_row, traj_row) = evaluate_row(&model, &space, suite, &order[..=pos], exec)?;
        step_matrix.push_row(step_row);
        traj_matrix.push_row(traj_row);
    }

    step_matrix.validate_lower_triangular()?;
    traj_matrix.validate_lower_triangular()?;
    let fm_step = metrics::forgetting_measure(&step_matrix).ok();
    let fm_traj = metrics::forgetting_measure(&traj_matrix).ok();
    Ok(RunResult {
        order,
        avg_step_acc: metrics::final_stage_average(&step_matrix)?,
        avg_traj_acc: metrics::final_stage_average(&traj_matrix)?,
        fm_step,
        fm_traj,
        step_matrix,
        traj_matrix,
        telemetry,
        final_model: model,
    })
}

/// Replay buffer contribution of one finished task: a fixed fraction of
/// its train trajectories, sampled once without replacement.
fn sample_replay(task: &TaskDataset, fraction: f64, rng: &mut RngStream) -> Vec<Query> {
    let count = ((task.train.len() as f64) * fraction).floor() as usize;
    let mut queries = Vec::new();
    for &ti in &rng.pick_distinct(task.train.len(), count) {
        let traj = &task.train[ti];
        for (si, step) in traj.steps.iter().enumerate() {
            queries.push(Query {
                features: traj.combined_features(si),
                gt_action: step.gt_action,
                gt_bbox: step.gt_bbox,
                task_id: task.task_id,
                from_replay: true,
            });
        }
    }
    queries
}

fn run_joint(
    cfg: &RunConfig,
    suite: &Suite,
    order: &[usize],
    mut model: PolicyModel,
    exec: &Executor,
) -> Result<RunResult> {
    let space = suite.config.action_space();
    let mut pool = Vec::new();
    for task in &suite.tasks {
        pool.extend(task_queries(task));
    }
    let total_steps = cfg.steps_per_task * suite.tasks.len();
    let mut sched = cfg.scheduler.clone();
    let mut telemetry = Vec::new();
    let method = MethodSpec::new(MethodKind::Joint);
    let model_ref = model.clone();
    for step in 0..total_steps {
        let mut batch_rng =
            RngStream::new(cfg.seed, stream_id(&[S_BATCH, 0, step as u64]));
        let batch = draw_batch(&pool, &[], cfg.batch_size, &mut batch_rng);
        let step_seed = stream_id(&[S_STEP, cfg.seed, 0, step as u64]);
        let parts = method_step(
            &method, cfg, &mut model, &model_ref, &space, &batch, &mut sched, step_seed, exec,
        )?;
        telemetry.push(TelemetryRow {
            global_step: step,
            task_id: usize::MAX,
            step_in_task: step,
            mean_entropy: parts.mean_entropy,
            lambda: None,
            routed_fraction: None,
            cos_alpha: None,
            grad_grpo: None,
            grad_sft_raw: parts.grad_sft_raw,
            grad_sft_final: parts.grad_sft_final,
        });
    }
    // single evaluation row over every task; no forgetting measure exists
    let (step_row, traj_row) = evaluate_row(&model, &space, suite, order, exec)?;
    let mut step_matrix = AccuracyMatrix::new(MetricKind::Step);
    let mut traj_matrix = AccuracyMatrix::new(MetricKind::Trajectory);
    step_matrix.push_row(step_row);
    traj_matrix.push_row(traj_row);
    Ok(RunResult {
        order: order.to_vec(),
        avg_step_acc: metrics::final_stage_average(&step_matrix)?,
        avg_traj_acc: metrics::final_stage_average(&traj_matrix)?,
        fm_step: None,
        fm_traj: None,
        step_matrix,
        traj_matrix,
        telemetry,
        final_model: model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suite::{generate_suite, SuiteConfig};

    fn tiny_suite() -> Suite {
        generate_suite(
            &SuiteConfig {
                n_tasks: 2,
                apps_per_task: 1,
                trajs_per_app: 5,
                steps_min: 3,
                steps_max: 5,
                d: 16,
                d_i: 4,
                grid: 4,
                vocab: 4,
                ..SuiteConfig::default()
            },
            &Executor::default(),
        )
        .unwrap()
    }

    fn tiny_run(kind: MethodKind) -> RunConfig {
        let mut cfg = RunConfig::new(MethodSpec::new(kind));
        cfg.order = OrderSpec::Explicit(vec![0, 1]);
        cfg.steps_per_task = 12;
        cfg.batch_size = 4;
        cfg.group_size = 4;
        cfg
    }

    #[test]
    fn order_presets_resolve() {
        assert_eq!(
            OrderSpec::Preset(2).resolve(7).unwrap(),
            vec![0, 6, 5, 4, 3, 2, 1]
        );
        assert!(OrderSpec::Preset(1).resolve(3).is_err());
        assert!(OrderSpec::Explicit(vec![0, 0]).resolve(2).is_err());
        assert!(OrderSpec::Explicit(vec![0, 2]).resolve(2).is_err());
    }

    #[test]
    fn single_task_order_has_no_fm() {
        let suite = generate_suite(
            &SuiteConfig {
                n_tasks: 2,
                apps_per_task: 1,
                trajs_per_app: 5,
                steps_min: 3,
                steps_max: 4,
                d: 12,
                d_i: 2,
                grid: 4,
                vocab: 4,
                ..SuiteConfig::default()
            },
            &Executor::default(),
        )
        .unwrap();
        // train on just one task by shrinking the order
        let mut cfg = tiny_run(MethodKind::Sft);
        cfg.order = OrderSpec::Explicit(vec![0]);
        // an order shorter than the suite is a mismatch
        assert!(run_continual(&cfg, &suite, &Executor::default()).is_err());
        // a genuine 1-task suite cannot be generated (n_tasks >= 2), so the
        // N < 2 branch is covered by the metrics module directly.
    }

    #[test]
    fn runs_are_deterministic() {
        let suite = tiny_suite();
        let cfg = tiny_run(MethodKind::Cgl);
        let a = run_continual(&cfg, &suite, &Executor::default()).unwrap();
        let b = run_continual(&cfg, &suite, &Executor::default()).unwrap();
        assert_eq!(a.step_matrix, b.step_matrix);
        assert_eq!(a.telemetry, b.telemetry);
        assert_eq!(a.final_model.params(), b.final_model.params());
        // worker count must not change results
        let c = run_continual(&cfg, &suite, &Executor::new(4)).unwrap();
        assert_eq!(a.step_matrix, c.step_matrix);
        assert_eq!(a.final_model.params(), c.final_model.params());
    }

    #[test]
    fn degenerate_hybrid_equals_grpo() {
        let suite = tiny_suite();
        let grpo = tiny_run(MethodKind::Grpo);
        let mut degenerate = tiny_run(MethodKind::Cgl);
        degenerate.method.use_routing = false;
        degenerate.method.use_dynamic_lambda = false;
        degenerate.method.use_surgery = false;
        degenerate.method.static_lambda = 0.0;
        let a = run_continual(&grpo, &suite, &Executor::default()).unwrap();
        let b = run_continual(&degenerate, &suite, &Executor::default()).unwrap();
        assert_eq!(a.step_matrix, b.step_matrix);
        assert_eq!(a.traj_matrix, b.traj_matrix);
        assert_eq!(a.fm_step, b.fm_step);
        assert_eq!(a.final_model.params(), b.final_model.params());
    }

    #[test]
    fn sft_kl_at_reference_matches_sft_step() {
        // With theta = theta_ref the KL gradient vanishes exactly, so one
        // SFT+KL step equals one plain SFT step bit for bit.
        let suite = tiny_suite();
        let space = suite.config.action_space();
        let mut rng = RngStream::new(77, 1);
        let base = crate::policy::testutil::random_model(
            space.len(),
            suite.config.input_dim(),
            &mut rng,
            0.1,
        );
        let batch = task_queries(&suite.tasks[0])[..4].to_vec();
        let mut with_kl = base.clone();
        let reference = base.clone();
        sft_family_step(
            &mut with_kl,
            Some(&reference),
            &space,
            &batch,
            0.05,
            0.01,
            4,
            123,
            &Executor::default(),
        )
        .unwrap();
        let mut plain = base.clone();
        sft_family_step(
            &mut plain,
            None,
            &space,
            &batch,
            0.05,
            0.0,
            4,
            123,
            &Executor::default(),
        )
        .unwrap();
        assert_eq!(with_kl.params(), plain.params());
    }

    #[test]
    fn isolation_violation_is_caught() {
        let suite = tiny_suite();
        let mut batch = task_queries(&suite.tasks[1]);
        batch.truncate(2);
        let err = enforce_isolation(&batch, 0, &MethodSpec::new(MethodKind::Sft));
        assert!(err.is_err());
        // replay-tagged queries are allowed only for SFT+Replay
        let mut replayed = batch.clone();
        for q in replayed.iter_mut() {
            q.from_replay = true;
        }
        assert!(enforce_isolation(&replayed, 0, &MethodSpec::new(MethodKind::SftReplay)).is_ok());
        assert!(enforce_isolation(&replayed, 0, &MethodSpec::new(MethodKind::Sft)).is_err());
    }

    #[test]
    fn replay_fraction_zero_items_matches_sft() {
        // a fraction too small to select any trajectory leaves the buffer
        // empty, so SFT+Replay degenerates to SFT
        let suite = tiny_suite();
        let mut replay_cfg = tiny_run(MethodKind::SftReplay);
        replay_cfg.method.replay_fraction = 0.01; // floor(5 * 0.01) = 0
        let sft_cfg = tiny_run(MethodKind::Sft);
        let a = run_continual(&replay_cfg, &suite, &Executor::default()).unwrap();
        let b = run_continual(&sft_cfg, &suite, &Executor::default()).unwrap();
        assert_eq!(a.step_matrix, b.step_matrix);
        assert_eq!(a.final_model.params(), b.final_model.params());
    }

    #[test]
    fn matrices_are_lower_triangular_and_monotone_shapes() {
        let suite = tiny_suite();
        let result = run_continual(&tiny_run(MethodKind::Sft), &suite, &Executor::default()).unwrap();
        assert_eq!(result.step_matrix.rows.len(), 2);
        assert_eq!(result.step_matrix.rows[0].len(), 1);
        assert_eq!(result.step_matrix.rows[1].len(), 2);
        assert!(result.fm_step.is_some());
        assert_eq!(result.telemetry.len(), 24);
    }

    #[test]
    fn joint_trains_on_union() {
        let suite = tiny_suite();
        let result =
            run_continual(&tiny_run(MethodKind::Joint), &suite, &Executor::default()).unwrap();
        assert_eq!(result.step_matrix.rows.len(), 1);
        assert_eq!(result.step_matrix.rows[0].len(), 2);
        assert!(result.fm_step.is_none());
    }
}
