use std::time::Instant;

use cgl_core::exec::Executor;
use cgl_core::protocol::{run_continual, MethodKind, MethodSpec, OrderSpec, RunConfig};
use cgl_core::suite::{generate_suite, SuiteConfig};

fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; n];
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    cov / (vx.sqrt() * vy.sqrt())
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let rl_lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let beta: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut suite_cfg = SuiteConfig::default();
    suite_cfg.domain_shift = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let exec = Executor::new(
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    );
    let suite = generate_suite(&suite_cfg, &Executor::new(1)).unwrap();
    println!("lr={lr} rl_lr={rl_lr} beta={beta} steps={steps} seed={seed}");
    for kind in [
        MethodKind::Sft,
        MethodKind::SftKl,
        MethodKind::SftReplay,
        MethodKind::Grpo,
        MethodKind::Cgl,
        MethodKind::Joint,
    ] {
        let mut cfg = RunConfig::new(MethodSpec::new(kind));
        cfg.order = OrderSpec::Preset(1);
        cfg.seed = seed;
        cfg.steps_per_task = steps;
        if kind == MethodKind::Grpo || kind == MethodKind::Cgl { if let Some(s) = args.get(8).and_then(|s| s.parse().ok()) { cfg.steps_per_task = s; } }
        cfg.learning_rate = lr;
        cfg.rl_learning_rate = rl_lr;
        cfg.beta = beta;
        cfg.scheduler.normalize_entropy = args.get(6).map(|s| s == "1").unwrap_or(false);
        let t = Instant::now();
        let result = run_continual(&cfg, &suite, &exec).unwrap();
        let elapsed = t.elapsed().as_secs_f64();
        println!(
            "{:<11} avg_step {:>6.2}% avg_traj {:>6.2}% fm_step {:>7} fm_traj {:>7}  ({elapsed:.1}s)",
            kind.name(),
            100.0 * result.avg_step_acc,
            100.0 * result.avg_traj_acc,
            result
                .fm_step
                .map(|f| format!("{:+.2}", 100.0 * f))
                .unwrap_or_else(|| "-".into()),
            result
                .fm_traj
                .map(|f| format!("{:+.2}", 100.0 * f))
                .unwrap_or_else(|| "-".into()),
        );
        if kind == MethodKind::Cgl {
            // telemetry shape diagnostics
            let decay: Vec<_> = result
                .telemetry
                .iter()
                .filter(|r| r.lambda.is_some() && r.step_in_task >= 5)
                .collect();
            let lambdas: Vec<f64> = decay.iter().map(|r| r.lambda.unwrap()).collect();
            let entropies: Vec<f64> = decay.iter().map(|r| r.mean_entropy).collect();
            let capped = lambdas.iter().filter(|&&l| l >= 1.0).count();
            let rho = spearman(&lambdas, &entropies);
            let routed: f64 = result
                .telemetry
                .iter()
                .filter_map(|r| r.routed_fraction)
                .sum::<f64>()
                / result.telemetry.iter().filter(|r| r.routed_fraction.is_some()).count() as f64;
            let conflicts = result
                .telemetry
                .iter()
                .filter(|r| r.cos_alpha.map(|c| c < 0.0).unwrap_or(false))
                .count();
            println!(
                "            decay rows {} capped {} ({:.0}%) spearman {:.3} routed_frac {:.2} conflicts {}",
                decay.len(),
                capped,
                100.0 * capped as f64 / decay.len().max(1) as f64,
                rho,
                routed,
                conflicts
            );
            // per-task diagonal and final row
            let m = &result.step_matrix;
            let diag: Vec<String> = (0..m.rows.len()).map(|i| format!("{:.0}", 100.0 * m.rows[i][i])).collect();
            let last: Vec<String> = m.rows.last().unwrap().iter().map(|v| format!("{:.0}", 100.0 * v)).collect();
            println!("            diag {:?} last {:?}", diag, last);
        }
        if kind == MethodKind::Sft {
            let m = &result.step_matrix;
            let diag: Vec<String> = (0..m.rows.len()).map(|i| format!("{:.0}", 100.0 * m.rows[i][i])).collect();
            let last: Vec<String> = m.rows.last().unwrap().iter().map(|v| format!("{:.0}", 100.0 * v)).collect();
            println!("            diag {:?} last {:?}", diag, last);
        }
        if kind == MethodKind::Grpo {
            let m = &result.step_matrix;
            let diag: Vec<String> = (0..m.rows.len()).map(|i| format!("{:.0}", 100.0 * m.rows[i][i])).collect();
            let last: Vec<String> = m.rows.last().unwrap().iter().map(|v| format!("{:.0}", 100.0 * v)).collect();
            println!("            diag {:?} last {:?}", diag, last);
        }
    }
}
