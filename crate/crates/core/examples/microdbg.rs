use cgl_core::exec::Executor;
use cgl_core::metrics::eval_task;
use cgl_core::policy::PolicyModel;
use cgl_core::protocol::{run_continual, MethodKind, MethodSpec, OrderSpec, RunConfig};
use cgl_core::suite::{generate_suite, SuiteConfig};

fn main() {
    let suite_cfg = SuiteConfig::default();
    let suite = generate_suite(&suite_cfg, &Executor::new(1)).unwrap();
    let space = suite_cfg.action_space();

    // run SFT on a 2-task explicit order but probe matrices directly
    let mut cfg = RunConfig::new(MethodSpec::new(MethodKind::Sft));
    cfg.order = OrderSpec::Explicit(vec![0, 1, 2, 3, 4, 5, 6]);
    cfg.steps_per_task = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(200);
    cfg.learning_rate = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.05);
    let result = run_continual(&cfg, &suite, &Executor::new(4)).unwrap();
    println!("sft matrix:");
    for row in &result.step_matrix.rows {
        let fmt: Vec<String> = row.iter().map(|v| format!("{:5.1}", 100.0 * v)).collect();
        println!("  {}", fmt.join(" "));
    }

    // train accuracy of the final model on the last task
    let (train_acc, _) = eval_task(&result.final_model, &space, &suite.tasks[6].train, &Executor::new(1)).unwrap();
    println!("final model train acc on task6: {:.1}%", 100.0 * train_acc);

    // probe: zero model baseline
    let zero = PolicyModel::zeros(space.len(), suite_cfg.input_dim());
    let (z_acc, _) = eval_task(&zero, &space, &suite.tasks[0].test, &Executor::new(1)).unwrap();
    println!("zero-model acc on task0 test: {:.1}%", 100.0 * z_acc);

    // telemetry: entropy trace of the sft run
    let hs: Vec<f64> = result.telemetry.iter().map(|r| r.mean_entropy).collect();
    println!(
        "entropy: start {:.3} after task1 {:.3} end {:.3}",
        hs[0],
        hs[cfg.steps_per_task - 1],
        hs.last().unwrap()
    );
}
