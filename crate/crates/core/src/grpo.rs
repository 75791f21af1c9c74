//! Group-relative policy optimization at query granularity: rollout groups
//! sampled from the old policy, group-normalized advantages, and a clipped
//! ratio surrogate with an exact KL penalty to a reference policy.
//!
//! Each rollout is a single structured action, so the per-token sums of the
//! usual sequence objective collapse to one term per sample.

use crate::action::{ActionSpace, BoundingBox, GuiAction};
use crate::error::{Error, Result};
use crate::policy::{accumulate_outer, ActionDistribution, PolicyModel};
use crate::reward;
use crate::rng::RngStream;

/// Denominator epsilon in the advantage normalization.
pub const ADV_EPS: f64 = 1e-4;

/// One training query: combined instruction+observation features plus the
/// ground truth needed for scoring.
#[derive(Debug, Clone)]
pub struct Query {
    pub features: Vec<f64>,
    pub gt_action: GuiAction,
    pub gt_bbox: Option<BoundingBox>,
    /// Provenance for the data-isolation check.
    pub task_id: usize,
    pub from_replay: bool,
}

/// One sampled candidate action with its reward and behavior log-prob.
#[derive(Debug, Clone, Copy)]
pub struct RolloutSample {
    pub action_index: usize,
    pub reward: u32,
    pub old_logprob: f64,
}

/// The `G` sampled candidates for one query with normalized advantages.
#[derive(Debug, Clone)]
pub struct RolloutGroup {
    pub query: Query,
    pub samples: Vec<RolloutSample>,
    pub advantages: Vec<f64>,
    pub reward_mean: f64,
    pub reward_std: f64,
}

impl RolloutGroup {
    pub fn group_size(&self) -> usize {
        self.samples.len()
    }

    /// Full-reward ceiling for this query's ground-truth class.
    pub fn r_max(&self) -> u32 {
        self.query.gt_action.class().r_max()
    }

    pub fn max_reward(&self) -> u32 {
        self.samples.iter().map(|s| s.reward).max().unwrap_or(0)
    }
}

/// Normalized advantages `(r_i - mean) / (std + eps)` with the population
/// standard deviation. All-equal rewards give all-zero advantages.
pub fn normalize_advantages(rewards: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let adv = rewards.iter().map(|r| (r - mean) / (std + ADV_EPS)).collect();
    (adv, mean, std)
}

/// Samples `G` actions for a query from the old policy and scores them.
pub fn rollout(
    model_old: &PolicyModel,
    space: &ActionSpace,
    query: Query,
    group_size: usize,
    rng: &mut RngStream,
) -> Result<RolloutGroup> {
    if group_size < 2 {
        return Err(Error::invalid("rollout group size must be >= 2"));
    }
    let dist = model_old.forward(&query.features)?;
    let mut samples = Vec::with_capacity(group_size);
    for _ in 0..group_size {
        let action_index = dist.sample(rng);
        let action = space.decode(action_index)?;
        let outcome = reward::score(&action, &query.gt_action, query.gt_bbox.as_ref())?;
        samples.push(RolloutSample {
            action_index,
            reward: outcome.value,
            old_logprob: dist.log_prob(action_index),
        });
    }
    let rewards: Vec<f64> = samples.iter().map(|s| s.reward as f64).collect();
    let (advantages, reward_mean, reward_std) = normalize_advantages(&rewards);
    Ok(RolloutGroup {
        query,
        samples,
        advantages,
        reward_mean,
        reward_std,
    })
}

/// Clipped-surrogate loss and its logit-space gradient for one group, given
/// the current and reference distributions at the query's state.
///
/// Loss per group: `-(1/G) sum_i min(rho_i A_i, clip(rho_i) A_i)
/// + beta * KL(pi || pi_ref)`. Samples whose min picks a saturated clip
/// contribute no gradient.
pub fn grpo_logit_loss_grad(
    dist: &ActionDistribution,
    dist_ref: &ActionDistribution,
    group: &RolloutGroup,
    clip_eps: f64,
    beta: f64,
) -> Result<(f64, Vec<f64>)> {
    let g = group.group_size() as f64;
    let mut loss = 0.0;
    let mut logit_grad = vec![0.0; dist.len()];
    for (sample, &adv) in group.samples.iter().zip(&group.advantages) {
        let ratio = (dist.log_prob(sample.action_index) - sample.old_logprob).exp();
        if !ratio.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite importance ratio for action {}",
                sample.action_index
            )));
        }
        let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
        let unclipped_term = ratio * adv;
        let clipped_term = clipped * adv;
        if unclipped_term <= clipped_term {
            // gradient flows through rho * A
            loss -= unclipped_term / g;
            let coeff = -unclipped_term / g; // d(rho)/dz = rho * dlogpi/dz
            for (gr, &p) in logit_grad.iter_mut().zip(&dist.probs) {
                *gr += coeff * (-p);
            }
            logit_grad[sample.action_index] += coeff;
        } else {
            // min picked the saturated clip: constant w.r.t. theta
            loss -= clipped_term / g;
        }
    }
    let kl = dist.kl(dist_ref);
    loss += beta * kl;
    if beta != 0.0 {
        for (gr, kg) in logit_grad.iter_mut().zip(dist.kl_logit_grad(dist_ref)) {
            *gr += beta * kg;
        }
    }
    Ok((loss, logit_grad))
}

/// Loss and flat parameter gradient of the GRPO objective for one group.
pub fn grpo_loss_and_grad(
    model: &PolicyModel,
    model_ref: &PolicyModel,
    group: &RolloutGroup,
    clip_eps: f64,
    beta: f64,
) -> Result<(f64, Vec<f64>)> {
    let dist = model.forward(&group.query.features)?;
    let dist_ref = model_ref.forward(&group.query.features)?;
    let (loss, logit_grad) = grpo_logit_loss_grad(&dist, &dist_ref, group, clip_eps, beta)?;
    let mut grad = vec![0.0; model.param_count()];
    accumulate_outer(&mut grad, &logit_grad, &group.query.features, 1.0);
    Ok((loss, grad))
}

/// Exact `KL(p || q)` over the discrete action space.
pub fn kl_exact(p: &ActionDistribution, q: &ActionDistribution) -> f64 {
    p.kl(q)
}
