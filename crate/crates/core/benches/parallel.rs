//! Sequential vs. parallel throughput for the data-parallel inner loops:
//! suite generation, rollout batches, evaluation, and the verification
//! trials.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cgl_core::exec::Executor;
use cgl_core::grpo::Query;
use cgl_core::hybrid::{hybrid_step, HybridConfig, SchedulerState};
use cgl_core::metrics::eval_task;
use cgl_core::policy::PolicyModel;
use cgl_core::suite::{generate_suite, SuiteConfig};
use cgl_core::theory::run_all;

fn executors() -> Vec<(String, Executor)> {
    let cores = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(2)
        .max(2);
    vec![
        ("seq".to_string(), Executor::new(1)),
        (format!("par{cores}"), Executor::new(cores)),
    ]
}

fn bench_generate(c: &mut Criterion) {
    let cfg = SuiteConfig::default();
    let mut group = c.benchmark_group("generate_suite");
    for (name, exec) in executors() {
        group.bench_with_input(BenchmarkId::from_parameter(&name), &exec, |b, exec| {
            b.iter(|| generate_suite(&cfg, exec).unwrap());
        });
    }
    group.finish();
}

fn bench_hybrid_step(c: &mut Criterion) {
    let cfg = SuiteConfig::default();
    let suite = generate_suite(&cfg, &Executor::new(1)).unwrap();
    let space = cfg.action_space();
    let model = PolicyModel::zeros(space.len(), cfg.input_dim());
    let task = &suite.tasks[0];
    let batch: Vec<Query> = task
        .train
        .iter()
        .flat_map(|traj| {
            (0..traj.steps.len()).map(move |si| Query {
                features: traj.combined_features(si),
                gt_action: traj.steps[si].gt_action,
                gt_bbox: traj.steps[si].gt_bbox,
                task_id: task.task_id,
                from_replay: false,
            })
        })
        .take(16)
        .collect();
    let hybrid_cfg = HybridConfig::default();
    let mut group = c.benchmark_group("hybrid_step_batch16");
    for (name, exec) in executors() {
        group.bench_with_input(BenchmarkId::from_parameter(&name), &exec, |b, exec| {
            b.iter(|| {
                let mut m = model.clone();
                let old = model.clone();
                let mut sched = SchedulerState::default();
                hybrid_step(
                    &mut m, &old, &model, &space, &batch, &mut sched, &hybrid_cfg, 7, exec,
                )
                .unwrap()
            });
        });
    }
    group.finish();
}

fn bench_eval(c: &mut Criterion) {
    let cfg = SuiteConfig::default();
    let suite = generate_suite(&cfg, &Executor::new(1)).unwrap();
    let space = cfg.action_space();
    let model = PolicyModel::zeros(space.len(), cfg.input_dim());
    let test: Vec<_> = suite.tasks.iter().flat_map(|t| t.test.clone()).collect();
    let mut group = c.benchmark_group("eval_42_trajectories");
    for (name, exec) in executors() {
        group.bench_with_input(BenchmarkId::from_parameter(&name), &exec, |b, exec| {
            b.iter(|| eval_task(&model, &space, &test, exec).unwrap());
        });
    }
    group.finish();
}

fn bench_verify(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify_20x200");
    group.sample_size(10);
    for (name, exec) in executors() {
        group.bench_with_input(BenchmarkId::from_parameter(&name), &exec, |b, exec| {
            b.iter(|| run_all(20, 200, exec).unwrap());
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_generate,
    bench_hybrid_step,
    bench_eval,
    bench_verify
);
criterion_main!(benches);
