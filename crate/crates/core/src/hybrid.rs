//! The combined update rule `L = L_GRPO + lambda * L_SFT`: error-aware
//! routing of supervised corrections, an entropy-regulated schedule for the
//! SFT weight, and conditional gradient surgery when the two gradients
//! conflict.

use crate::action::ActionSpace;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::grpo::{self, Query, RolloutGroup};
use crate::policy::{accumulate_outer, PolicyModel};
use crate::rng::{stream_id, RngStream};
use crate::sft;

/// Norm below which a gradient is treated as zero when deciding conflicts.
pub const ZERO_GRAD_EPS: f64 = 1e-12;

/// SFT-weight schedule parameters plus the per-task step counter.
///
/// During the first `step_w` optimizer steps of a task, `lambda` ramps
/// linearly to `lambda_max`; afterwards it follows
/// `(lambda_max - lambda_min) * min(1, k * exp(gamma * H)) + lambda_min`
/// as a function of the mean policy entropy `H`.
#[derive(Debug, Clone)]
pub struct SchedulerState {
    pub step_in_task: usize,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub step_w: usize,
    pub gamma: f64,
    pub k: f64,
    pub h_max: f64,
    /// Divide the entropy by `ln K` before the exponential schedule.
    pub normalize_entropy: bool,
    /// Clamp the entropy at `h_max` before the exponential schedule.
    /// Off by default; retained for sensitivity experiments.
    pub clamp_h_max: bool,
}

impl Default for SchedulerState {
    fn default() -> Self {
        SchedulerState {
            step_in_task: 0,
            lambda_max: 1.0,
            lambda_min: 0.0,
            step_w: 5,
            gamma: 20.0,
            k: (-10.0f64).exp(),
            h_max: 0.45,
            normalize_entropy: false,
            clamp_h_max: false,
        }
    }
}

impl SchedulerState {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_min > self.lambda_max {
            return Err(Error::config("lambda_min must be <= lambda_max"));
        }
        if self.step_w < 1 {
            return Err(Error::config("step_w must be >= 1"));
        }
        if self.k <= 0.0 || self.gamma <= 0.0 {
            return Err(Error::config("k and gamma must be positive"));
        }
        Ok(())
    }

    /// Reset the warmup counter at a task boundary.
    pub fn start_task(&mut self) {
        self.step_in_task = 0;
    }
}

/// SFT weight for the current step. `ln_k_actions` is `ln K` of the action
/// space, used only when entropy normalization is enabled.
pub fn lambda_value(state: &SchedulerState, mean_entropy: f64, ln_k_actions: f64) -> f64 {
    let range = state.lambda_max - state.lambda_min;
    let lambda = if state.step_in_task < state.step_w {
        state.lambda_min + range * (state.step_in_task + 1) as f64 / state.step_w as f64
    } else {
        let mut h = mean_entropy;
        if state.normalize_entropy && ln_k_actions > 0.0 {
            h /= ln_k_actions;
        }
        if state.clamp_h_max {
            h = h.min(state.h_max);
        }
        range * (state.k * (state.gamma * h).exp()).min(1.0) + state.lambda_min
    };
    lambda.clamp(state.lambda_min, state.lambda_max)
}

/// True when no rollout in the group reached the full reward for the
/// query's ground-truth class, i.e. exploration failed and a supervised
/// correction should be injected.
pub fn should_route_to_sft(group: &RolloutGroup) -> bool {
    group.max_reward() < group.r_max()
}

/// Conditional orthogonal projection: if the gradients conflict
/// (`cos < 0`), strip from `g_sft` its component along `g_grpo`; otherwise
/// return `g_sft` unchanged. Near-zero gradients count as no conflict.
///
/// Returns the (possibly projected) vector and the cosine when both inputs
/// were non-degenerate.
pub fn surgery(g_sft: &[f64], g_grpo: &[f64]) -> Result<(Vec<f64>, Option<f64>)> {
    debug_assert_eq!(g_sft.len(), g_grpo.len());
    let mut dot = 0.0;
    let mut n_sft = 0.0;
    let mut n_grpo = 0.0;
    for (a, b) in g_sft.iter().zip(g_grpo) {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::Numeric("non-finite gradient in surgery".into()));
        }
        dot += a * b;
        n_sft += a * a;
        n_grpo += b * b;
    }
    let n_sft = n_sft.sqrt();
    let n_grpo = n_grpo.sqrt();
    if n_sft < ZERO_GRAD_EPS || n_grpo < ZERO_GRAD_EPS {
        return Ok((g_sft.to_vec(), None));
    }
    let cos = dot / (n_sft * n_grpo);
    if cos >= 0.0 {
        return Ok((g_sft.to_vec(), Some(cos)));
    }
    let coeff = dot / (n_grpo * n_grpo);
    let projected: Vec<f64> = g_sft
        .iter()
        .zip(g_grpo)
        .map(|(a, b)| a - coeff * b)
        .collect();
    Ok((projected, Some(cos)))
}

/// Toggles and constants for one hybrid optimizer step.
#[derive(Debug, Clone)]
pub struct HybridConfig {
    pub group_size: usize,
    pub g_box: usize,
    pub learning_rate: f64,
    pub clip_eps: f64,
    pub beta: f64,
    /// Error-aware routing; when off, every query receives the SFT loss.
    pub use_routing: bool,
    /// Entropy-regulated lambda; when off, `static_lambda` is used.
    pub use_dynamic_lambda: bool,
    pub use_surgery: bool,
    pub static_lambda: f64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            group_size: 8,
            g_box: 8,
            learning_rate: 1e-2,
            clip_eps: 0.2,
            beta: 0.01,
            use_routing: true,
            use_dynamic_lambda: true,
            use_surgery: true,
            static_lambda: 1.0,
        }
    }
}

/// Telemetry from one hybrid step.
#[derive(Debug, Clone)]
pub struct HybridStepReport {
    pub lambda_used: f64,
    pub routed_queries: usize,
    pub batch_size: usize,
    pub mean_entropy: f64,
    pub conflict_detected: bool,
    pub cos_alpha: Option<f64>,
    pub grad_norm_grpo: f64,
    pub grad_norm_sft_raw: f64,
    pub grad_norm_sft_final: f64,
    pub mean_grpo_loss: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One combined optimizer step over a batch of queries.
///
/// Rolls out every query from `model_old`, accumulates the mean GRPO
/// gradient, routes failing queries to SFT, schedules `lambda` from the
/// batch-mean policy entropy, optionally projects the SFT gradient, and
/// applies `theta <- theta - lr * (g_grpo + lambda * g_sft)`.
///
/// `step_seed` must be unique per (run, task, step); per-query streams are
/// derived from it so rollout and bbox sampling are reproducible under any
/// degree of parallelism.
#[allow(clippy::too_many_arguments)]
pub fn hybrid_step(
    model: &mut PolicyModel,
    model_old: &PolicyModel,
    model_ref: &PolicyModel,
    space: &ActionSpace,
    batch: &[Query],
    state: &mut SchedulerState,
    cfg: &HybridConfig,
    step_seed: u64,
    exec: &Executor,
) -> Result<HybridStepReport> {
    if batch.is_empty() {
        return Err(Error::invalid("hybrid step requires a non-empty batch"));
    }
    let param_count = model.param_count();
    let k_actions = model.action_count();
    let ln_k = (k_actions as f64).ln();

    // Per-query work is independent: rollout, current/ref forwards, logit
    // gradients. The reduction below stays in batch order regardless of the
    // executor, so results are seed-stable.
    struct QueryResult {
        grpo_logit_grad: Vec<f64>,
        grpo_loss: f64,
        sft_logit_grad: Option<Vec<f64>>,
        entropy: f64,
    }

    let results: Vec<Result<QueryResult>> = exec.map_indexed(batch, |qi, query| {
        let mut rollout_rng = RngStream::new(step_seed, stream_id(&[1, qi as u64]));
        let group = grpo::rollout(model_old, space, query.clone(), cfg.group_size, &mut rollout_rng)?;
        let dist = model.forward(&query.features)?;
        let dist_ref = model_ref.forward(&query.features)?;
        let (grpo_loss, grpo_logit_grad) =
            grpo::grpo_logit_loss_grad(&dist, &dist_ref, &group, cfg.clip_eps, cfg.beta)?;
        let routed = !cfg.use_routing || should_route_to_sft(&group);
        let sft_logit_grad = if routed {
            let mut bbox_rng = RngStream::new(step_seed, stream_id(&[2, qi as u64]));
            let targets = sft::sft_targets(space, query, cfg.g_box, &mut bbox_rng)?;
            Some(sft::sft_logit_loss_grad(&dist, &targets).1)
        } else {
            None
        };
        Ok(QueryResult {
            grpo_logit_grad,
            grpo_loss,
            sft_logit_grad,
            entropy: dist.entropy(),
        })
    });

    let mut g_grpo = vec![0.0; param_count];
    let mut g_sft = vec![0.0; param_count];
    let mut routed_queries = 0usize;
    let mut entropy_sum = 0.0;
    let mut grpo_loss_sum = 0.0;
    let batch_scale = 1.0 / batch.len() as f64;
    for (query, result) in batch.iter().zip(results) {
        let r = result?;
        accumulate_outer(&mut g_grpo, &r.grpo_logit_grad, &query.features, batch_scale);
        if let Some(lg) = &r.sft_logit_grad {
            routed_queries += 1;
            accumulate_outer(&mut g_sft, lg, &query.features, 1.0);
        }
        entropy_sum += r.entropy;
        grpo_loss_sum += r.grpo_loss;
    }
    // SFT loss is the mean over the queries it actually touched
    if routed_queries > 0 {
        let s = 1.0 / routed_queries as f64;
        for g in g_sft.iter_mut() {
            *g *= s;
        }
    }

    let mean_entropy = entropy_sum * batch_scale;
    let lambda_used = if cfg.use_dynamic_lambda {
        lambda_value(state, mean_entropy, ln_k)
    } else {
        cfg.static_lambda
    };

    let (g_sft_final, cos_alpha) = if cfg.use_surgery {
        surgery(&g_sft, &g_grpo)?
    } else {
        (g_sft.clone(), None)
    };
    let conflict_detected = cos_alpha.is_some_and(|c| c < 0.0);

    let grad_norm_grpo = norm(&g_grpo);
    let grad_norm_sft_raw = norm(&g_sft);
    let grad_norm_sft_final = norm(&g_sft_final);

    {
        let params = model.params_mut();
        for ((w, gg), gs) in params.iter_mut().zip(&g_grpo).zip(&g_sft_final) {
            *w -= cfg.learning_rate * (gg + lambda_used * gs);
        }
    }
    state.step_in_task += 1;

    Ok(HybridStepReport {
        lambda_used,
        routed_queries,
        batch_size: batch.len(),
        mean_entropy,
        conflict_detected,
        cos_alpha,
        grad_norm_grpo,
        grad_norm_sft_raw,
        grad_norm_sft_final,
        mean_grpo_loss: grpo_loss_sum * batch_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::GuiAction;
    use crate::grpo::RolloutSample;
    use proptest::prelude::*;

    fn group_with_rewards(rewards: &[u32], gt: GuiAction) -> RolloutGroup {
        let samples: Vec<RolloutSample> = rewards
            .iter()
            .map(|&r| RolloutSample {
                action_index: 0,
                reward: r,
                old_logprob: -1.0,
            })
            .collect();
        let rs: Vec<f64> = rewards.iter().map(|&r| r as f64).collect();
        let (advantages, reward_mean, reward_std) = grpo::normalize_advantages(&rs);
        RolloutGroup {
            query: Query {
                features: vec![],
                gt_action: gt,
                gt_bbox: None,
                task_id: 0,
                from_replay: false,
            },
            samples,
            advantages,
            reward_mean,
            reward_std,
        }
    }

    #[test]
    fn routing_rule() {
        let gt_spatial = GuiAction::Click { x: 0.5, y: 0.5 };
        assert!(!should_route_to_sft(&group_with_rewards(
            &[1, 1, 2],
            gt_spatial
        )));
        assert!(should_route_to_sft(&group_with_rewards(
            &[0, 1, 1],
            gt_spatial
        )));
        assert!(!should_route_to_sft(&group_with_rewards(
            &[1],
            GuiAction::Home
        )));
    }

    #[test]
    fn lambda_spot_values() {
        let mut state = SchedulerState::default();
        state.step_in_task = state.step_w; // decay phase
        let lam = |h: f64| lambda_value(&state, h, 0.0);
        assert!((lam(0.45) - (-1.0f64).exp()).abs() <= 1e-12);
        assert_eq!(lam(0.5), 1.0);
        assert!((lam(0.0) - (-10.0f64).exp()).abs() <= 1e-15);
        assert_eq!(lam(3.0), 1.0);

        // warmup endpoint reaches lambda_max at step_w - 1
        let mut warm = SchedulerState::default();
        warm.step_in_task = 4;
        assert_eq!(lambda_value(&warm, 0.0, 0.0), 1.0);
        warm.step_in_task = 0;
        assert!((lambda_value(&warm, 0.0, 0.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn lambda_monotone_and_bounded() {
        let mut state = SchedulerState::default();
        // warmup phase: non-decreasing in step_in_task
        let mut prev = 0.0;
        for s in 0..state.step_w {
            state.step_in_task = s;
            let lam = lambda_value(&state, 0.0, 0.0);
            assert!(lam >= prev);
            prev = lam;
        }
        // decay phase: non-decreasing in entropy, always within bounds
        state.step_in_task = state.step_w;
        let mut prev = -1.0;
        for i in 0..200 {
            let h = i as f64 * 0.005;
            let lam = lambda_value(&state, h, 0.0);
            assert!(lam >= prev);
            assert!((0.0..=1.0).contains(&lam));
            prev = lam;
        }
    }

    #[test]
    fn lambda_normalized_entropy() {
        let mut state = SchedulerState::default();
        state.step_in_task = state.step_w;
        state.normalize_entropy = true;
        let ln_k = 560f64.ln();
        // H = 0.45 * ln K normalizes to 0.45 -> e^{-1}
        let lam = lambda_value(&state, 0.45 * ln_k, ln_k);
        assert!((lam - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn surgery_conflict_projection() {
        let (out, cos) = surgery(&[1.0, 0.0], &[-1.0, 1.0]).unwrap();
        assert!(cos.unwrap() < 0.0);
        assert!((out[0] - 0.5).abs() < 1e-15);
        assert!((out[1] - 0.5).abs() < 1e-15);
        let dot = out[0] * -1.0 + out[1] * 1.0;
        assert!(dot.abs() < 1e-15);
    }

    #[test]
    fn surgery_no_conflict_is_bit_exact_identity() {
        let g_sft = vec![1.0, 0.0, -0.25];
        let g_grpo = vec![1.0, 1.0, 0.5];
        let (out, cos) = surgery(&g_sft, &g_grpo).unwrap();
        assert!(cos.unwrap() >= 0.0);
        for (a, b) in out.iter().zip(&g_sft) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn surgery_fully_opposed_gives_zero() {
        let g_grpo = vec![0.3, -0.7, 2.0];
        let g_sft: Vec<f64> = g_grpo.iter().map(|x| -2.5 * x).collect();
        let (out, _) = surgery(&g_sft, &g_grpo).unwrap();
        let n = norm(&out);
        assert!(n <= 1e-12 * norm(&g_sft), "norm {n}");
    }

    #[test]
    fn surgery_zero_grad_guard() {
        let g_sft = vec![1.0, 2.0];
        let (out, cos) = surgery(&g_sft, &[0.0, 0.0]).unwrap();
        assert_eq!(out, g_sft);
        assert!(cos.is_none());
        assert!(surgery(&[f64::NAN, 0.0], &[1.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn prop_surgery_norm_never_increases(
            sft in proptest::collection::vec(-10.0f64..10.0, 4),
            grpo in proptest::collection::vec(-10.0f64..10.0, 4),
        ) {
            let (out, _) = surgery(&sft, &grpo).unwrap();
            prop_assert!(norm(&out) <= norm(&sft) * (1.0 + 1e-12));
            // post-surgery compatibility: never anti-aligned with g_grpo
            let dot: f64 = out.iter().zip(&grpo).map(|(a, b)| a * b).sum();
            prop_assert!(dot >= -1e-9 * norm(&out).max(1.0) * norm(&grpo).max(1.0));
        }

        #[test]
        fn prop_conflict_decision_scale_invariant(
            sft in proptest::collection::vec(-5.0f64..5.0, 3),
            grpo in proptest::collection::vec(-5.0f64..5.0, 3),
            ls in -5.0f64..5.0,
            lg in -5.0f64..5.0,
        ) {
            let s_sft = 10f64.powf(ls);
            let s_grpo = 10f64.powf(lg);
            let (_, cos_a) = surgery(&sft, &grpo).unwrap();
            let scaled_sft: Vec<f64> = sft.iter().map(|x| x * s_sft).collect();
            let scaled_grpo: Vec<f64> = grpo.iter().map(|x| x * s_grpo).collect();
            let (_, cos_b) = surgery(&scaled_sft, &scaled_grpo).unwrap();
            match (cos_a, cos_b) {
                (Some(a), Some(b)) => prop_assert_eq!(a < 0.0, b < 0.0),
                // degenerate norms may differ under extreme scaling; skip
                _ => {}
            }
        }
    }
}
