use cgl_core::exec::Executor;
use cgl_core::protocol::{run_continual, MethodKind, MethodSpec, OrderSpec, RunConfig};
use cgl_core::suite::{generate_suite, SuiteConfig};

fn main() {
    let rl_lr: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.15);
    let beta: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0.02);
    let steps: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(350);
    let kind = match std::env::args().nth(4).as_deref() {
        Some("grpo") => MethodKind::Grpo,
        _ => MethodKind::Cgl,
    };
    let shift: f64 = std::env::args().nth(5).and_then(|s| s.parse().ok()).unwrap_or(0.4);
    let gamma: f64 = std::env::args().nth(6).and_then(|s| s.parse().ok()).unwrap_or(20.0);
    let norm: bool = std::env::args().nth(7).map(|s| s == "1").unwrap_or(true);
    let suite = generate_suite(&SuiteConfig { domain_shift: shift, ..SuiteConfig::default() }, &Executor::new(1)).unwrap();
    let mut cfg = RunConfig::new(MethodSpec::new(kind));
    cfg.order = OrderSpec::Preset(1);
    cfg.steps_per_task = steps;
    cfg.rl_learning_rate = rl_lr;
    cfg.beta = beta;
    cfg.scheduler.gamma = gamma;
    cfg.scheduler.normalize_entropy = norm;
    let result = run_continual(&cfg, &suite, &Executor::new(2)).unwrap();
    println!("{} rl_lr={rl_lr} beta={beta} steps={steps} shift={shift} gamma={gamma} norm={norm}", kind.name());
    for row in &result.step_matrix.rows {
        let fmt: Vec<String> = row.iter().map(|v| format!("{:5.1}", 100.0 * v)).collect();
        println!("  {}", fmt.join(" "));
    }
    println!(
        "avg_step {:.2}% fm_step {:+.2}",
        100.0 * result.avg_step_acc,
        100.0 * result.fm_step.unwrap()
    );
    for task_pos in 1..7 {
        let rows: Vec<_> = result
            .telemetry
            .iter()
            .filter(|r| r.global_step >= task_pos * steps && r.global_step < (task_pos + 1) * steps)
            .collect();
        let h = |i: usize| rows[i].mean_entropy;
        let lam = |i: usize| rows[i].lambda.unwrap_or(f64::NAN);
        let routed_end: f64 = rows[rows.len() - 20..].iter().filter_map(|r| r.routed_fraction).sum::<f64>() / 20.0;
        println!(
            "task{}: H {:.2}->{:.2}->{:.2} lam {:.3}->{:.3}->{:.4} routed_end {:.2}",
            task_pos, h(0), h(rows.len() / 2), h(rows.len() - 1),
            lam(6), lam(rows.len() / 2), lam(rows.len() - 1), routed_end,
        );
    }
}
