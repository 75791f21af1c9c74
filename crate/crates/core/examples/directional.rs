use cgl_core::exec::Executor;
use cgl_core::protocol::{run_continual, MethodKind, MethodSpec, OrderSpec, RunConfig, RunResult};
use cgl_core::suite::{generate_suite, SuiteConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let rl_lr: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.15);
    let beta: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.02);
    let steps: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(350);
    let shift: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.45);
    let lr: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let normalize: bool = args.get(6).map(|s| s == "1").unwrap_or(true);
    let lambda_max: f64 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let gamma: f64 = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(20.0);
    let grpo_lr: f64 = args.get(9).and_then(|s| s.parse().ok()).unwrap_or(0.5);

    let suite_cfg = SuiteConfig {
        domain_shift: shift,
        ..SuiteConfig::default()
    };
    let suite = generate_suite(&suite_cfg, &Executor::new(1)).unwrap();
    let methods = [
        MethodKind::Sft,
        MethodKind::SftReplay,
        MethodKind::Grpo,
        MethodKind::Cgl,
        MethodKind::Joint,
    ];
    let mut jobs: Vec<(MethodKind, u64, u8)> = Vec::new();
    for &m in &methods {
        for seed in 0..3u64 {
            for order in 1..=3u8 {
                jobs.push((m, seed, order));
            }
        }
    }
    let exec = Executor::new(
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(2),
    );
    let t = std::time::Instant::now();
    let results: Vec<(MethodKind, u64, u8, RunResult)> = exec
        .map_indexed(&jobs, |_, &(m, seed, order)| {
            let mut cfg = RunConfig::new(MethodSpec::new(m));
            cfg.order = OrderSpec::Preset(order);
            cfg.seed = seed;
            cfg.steps_per_task = steps;
            cfg.learning_rate = lr;
            cfg.rl_learning_rate = if m == MethodKind::Grpo { grpo_lr } else { rl_lr };
            cfg.beta = beta;
            cfg.scheduler.normalize_entropy = normalize;
            cfg.scheduler.lambda_max = lambda_max;
            cfg.scheduler.gamma = gamma;
            let r = run_continual(&cfg, &suite, &Executor::new(1)).unwrap();
            (m, seed, order, r)
        })
        .into_iter()
        .collect();
    println!("total {:.1}s for {} runs", t.elapsed().as_secs_f64(), results.len());

    let mean = |m: MethodKind, f: &dyn Fn(&RunResult) -> f64| -> f64 {
        let vals: Vec<f64> = results
            .iter()
            .filter(|(k, _, _, _)| *k == m)
            .map(|(_, _, _, r)| f(r))
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    println!(
        "{:<11} {:>9} {:>9} {:>9} {:>9}",
        "method", "avg-step", "fm-mean", "fm-min", "fm-max"
    );
    for &m in &methods {
        let fms: Vec<f64> = results
            .iter()
            .filter(|(k, _, _, _)| *k == m)
            .filter_map(|(_, _, _, r)| r.fm_step)
            .collect();
        let fm_mean = if fms.is_empty() { f64::NAN } else { fms.iter().sum::<f64>() / fms.len() as f64 };
        let fm_min = fms.iter().cloned().fold(f64::INFINITY, f64::min);
        let fm_max = fms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{:<11} {:>9.2} {:>9.2} {:>9.2} {:>9.2}",
            m.name(),
            100.0 * mean(m, &|r| r.avg_step_acc),
            100.0 * fm_mean,
            100.0 * fm_min,
            100.0 * fm_max,
        );
    }
    // criterion checks
    let avg_sft = mean(MethodKind::Sft, &|r| r.avg_step_acc);
    let avg_replay = mean(MethodKind::SftReplay, &|r| r.avg_step_acc);
    let avg_grpo = mean(MethodKind::Grpo, &|r| r.avg_step_acc);
    let avg_cgl = mean(MethodKind::Cgl, &|r| r.avg_step_acc);
    let avg_joint = mean(MethodKind::Joint, &|r| r.avg_step_acc);
    let fm_of = |m: MethodKind| mean(m, &|r| r.fm_step.unwrap_or(f64::NAN));
    let fm_sft = fm_of(MethodKind::Sft);
    let fm_replay = fm_of(MethodKind::SftReplay);
    let fm_grpo = fm_of(MethodKind::Grpo);
    let fm_cgl = fm_of(MethodKind::Cgl);
    // 8-of-9 count
    let mut beats = 0;
    for seed in 0..3u64 {
        for order in 1..=3u8 {
            let find = |m: MethodKind| {
                results
                    .iter()
                    .find(|(k, s, o, _)| *k == m && *s == seed && *o == order)
                    .map(|(_, _, _, r)| r.avg_step_acc)
                    .unwrap()
            };
            if find(MethodKind::Cgl) > find(MethodKind::Sft) {
                beats += 1;
            }
        }
    }
    println!("5a: fm_sft < fm_replay < 0: {} ({:.2} < {:.2} < 0)", fm_sft < fm_replay && fm_replay < 0.0, 100.0*fm_sft, 100.0*fm_replay);
    println!("5a: fm_grpo - fm_sft >= 3pp: {} ({:.2})", fm_grpo - fm_sft >= 0.03, 100.0*(fm_grpo - fm_sft));
    println!("5b: fm_cgl >= fm_grpo: {} ({:.2} vs {:.2})", fm_cgl >= fm_grpo, 100.0*fm_cgl, 100.0*fm_grpo);
    println!("5b: |fm_cgl| <= 2pp: {} ({:.2})", fm_cgl.abs() <= 0.02, 100.0*fm_cgl);
    println!("5c: cgl >= grpo - 0.5pp: {} ({:.2} vs {:.2})", avg_cgl >= avg_grpo - 0.005, 100.0*avg_cgl, 100.0*avg_grpo);
    println!("5c: grpo >= sft - 0.5pp: {} ({:.2} vs {:.2})", avg_grpo >= avg_sft - 0.005, 100.0*avg_grpo, 100.0*avg_sft);
    println!("5c: cgl beats sft in >= 8 of 9: {} ({beats}/9)", beats >= 8);
    for seed in 0..3u64 { for order in 1..=3u8 { let find = |m: MethodKind| results.iter().find(|(k, s, o, _)| *k == m && *s == seed && *o == order).map(|(_, _, _, r)| r.avg_step_acc).unwrap(); println!("  seed {seed} order {order}: sft {:.2} grpo {:.2} cgl {:.2} (cgl-sft {:+.2})", 100.0*find(MethodKind::Sft), 100.0*find(MethodKind::Grpo), 100.0*find(MethodKind::Cgl), 100.0*(find(MethodKind::Cgl)-find(MethodKind::Sft))); } }
println!("5d: joint >= all: {} ({:.2})", avg_joint >= avg_cgl && avg_joint >= avg_grpo && avg_joint >= avg_sft && avg_joint >= avg_replay, 100.0*avg_joint);
}
