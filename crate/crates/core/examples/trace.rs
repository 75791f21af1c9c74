use cgl_core::action::GuiAction;
use cgl_core::exec::Executor;
use cgl_core::grpo::Query;
use cgl_core::hybrid::{hybrid_step, HybridConfig, SchedulerState};
use cgl_core::rng::{stream_id, RngStream};
use cgl_core::suite::{generate_suite, SuiteConfig};

fn queries_of(task: &cgl_core::data::TaskDataset) -> Vec<Query> {
    task.train
        .iter()
        .flat_map(|t| {
            (0..t.steps.len()).map(move |si| Query {
                features: t.combined_features(si),
                gt_action: t.steps[si].gt_action,
                gt_bbox: t.steps[si].gt_bbox,
                task_id: task.task_id,
                from_replay: false,
            })
        })
        .collect()
}

fn main() {
    let rl_lr: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.3);
    let beta: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0.03);
    let shift: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let suite = generate_suite(&SuiteConfig { domain_shift: shift, ..SuiteConfig::default() }, &Executor::new(1)).unwrap();
    let space = suite.config.action_space();
    let mut model = cgl_core::policy::PolicyModel::zeros(space.len(), suite.config.input_dim());
    let q0 = queries_of(&suite.tasks[0]);
    let mut rng = RngStream::new(0, 1);
    for step in 0..350 {
        let batch: Vec<Query> = (0..16).map(|_| q0[rng.below_usize(q0.len())].clone()).collect();
        let mut grad = vec![0.0; model.param_count()];
        for (qi, q) in batch.iter().enumerate() {
            let dist = model.forward(&q.features).unwrap();
            let mut brng = RngStream::new(step as u64, qi as u64);
            let targets = cgl_core::sft::sft_targets(&space, q, 8, &mut brng).unwrap();
            let (_, lg) = cgl_core::sft::sft_logit_loss_grad(&dist, &targets);
            cgl_core::policy::accumulate_outer(&mut grad, &lg, &q.features, 1.0 / 16.0);
        }
        model.apply_gradient(&grad, 1.0);
    }
    let q1 = queries_of(&suite.tasks[1]);
    // pick representative queries
    let token_q = q1.iter().find(|q| matches!(q.gt_action, GuiAction::InputText { .. })).unwrap().clone();
    let app_q = q1.iter().find(|q| matches!(q.gt_action, GuiAction::OpenApp { .. })).unwrap().clone();
    let click_q = q1.iter().find(|q| matches!(q.gt_action, GuiAction::Click { .. })).unwrap().clone();
    let fin_q = q1.iter().find(|q| q.gt_action == GuiAction::Finish).unwrap().clone();
    let p_of = |m: &cgl_core::policy::PolicyModel, q: &Query| {
        let d = m.forward(&q.features).unwrap();
        let idx = space.encode(&q.gt_action).unwrap();
        (d.probs[idx], d.probs[d.argmax()], d.argmax() == idx)
    };
    let cfg = HybridConfig {
        learning_rate: rl_lr,
        beta,
        use_routing: true,
        use_dynamic_lambda: false,
        use_surgery: false,
        static_lambda: 0.0,
        ..HybridConfig::default()
    };
    let model_ref = model.clone();
    let mut sched = SchedulerState::default();
    println!("step | token p(gt)/pmax ok | app p/pmax ok | click p/pmax ok | fin p/pmax ok");
    for step in 0..350 {
        if step % 35 == 0 {
            let (pt, mt, ot) = p_of(&model, &token_q);
            let (pa, ma, oa) = p_of(&model, &app_q);
            let (pc, mc, oc) = p_of(&model, &click_q);
            let (pf, mf, of) = p_of(&model, &fin_q);
            println!("{:4} | {:.3}/{:.3} {} | {:.3}/{:.3} {} | {:.4}/{:.3} {} | {:.3}/{:.3} {}", step, pt, mt, ot, pa, ma, oa, pc, mc, oc, pf, mf, of);
        }
        let batch: Vec<Query> = (0..16).map(|_| q1[rng.below_usize(q1.len())].clone()).collect();
        let old = model.clone();
        hybrid_step(&mut model, &old, &model_ref, &space, &batch, &mut sched, &cfg, stream_id(&[9, step as u64]), &Executor::new(2)).unwrap();
    }
    let (pt, mt, ot) = p_of(&model, &token_q);
    let (pa, ma, oa) = p_of(&model, &app_q);
    let (pc, mc, oc) = p_of(&model, &click_q);
    let (pf, mf, of) = p_of(&model, &fin_q);
    println!("end  | {:.3}/{:.3} {} | {:.3}/{:.3} {} | {:.4}/{:.3} {} | {:.3}/{:.3} {}", pt, mt, ot, pa, ma, oa, pc, mc, oc, pf, mf, of);
}
