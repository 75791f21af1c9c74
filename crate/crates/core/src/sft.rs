//! Supervised fine-tuning on ground-truth actions, with bounding-box point
//! sampling for spatial targets, plus the logit-space update used by the
//! entropy-dynamics analysis.

use crate::action::{ActionClass, ActionSpace, GuiAction};
use crate::error::Result;
use crate::grpo::Query;
use crate::policy::{accumulate_outer, ActionDistribution, PolicyModel};
use crate::rng::RngStream;

/// Target indices for one query's SFT update. Spatial ground truths expand
/// into `g_box` grid cells sampled uniformly (with replacement) among the
/// cells whose centers lie inside the bounding box; a bbox containing no
/// cell center falls back to the single cell holding the bbox center.
pub fn sft_targets(
    space: &ActionSpace,
    query: &Query,
    g_box: usize,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    if query.gt_action.class() != ActionClass::Spatial {
        return Ok(vec![space.encode(&query.gt_action)?]);
    }
    let bbox = query.gt_bbox.as_ref().ok_or_else(|| {
        crate::error::Error::Contract("spatial ground truth requires a bbox".into())
    })?;
    let r = space.grid;
    let mut cells = Vec::new();
    for iy in 0..r {
        for ix in 0..r {
            let (cx, cy) = space.cell_center(ix, iy);
            if bbox.contains(cx, cy) {
                cells.push((ix, iy));
            }
        }
    }
    if cells.is_empty() {
        log::warn!("bbox contains no cell center; falling back to its center cell");
        let cx = 0.5 * (bbox.x_min + bbox.x_max);
        let cy = 0.5 * (bbox.y_min + bbox.y_max);
        cells.push(space.discretize(cx, cy)?);
    }
    let long_press = matches!(query.gt_action, GuiAction::LongPress { .. });
    let mut targets = Vec::with_capacity(g_box);
    for _ in 0..g_box.max(1) {
        let (ix, iy) = cells[rng.below_usize(cells.len())];
        let (x, y) = space.cell_center(ix, iy);
        let action = if long_press {
            GuiAction::LongPress { x, y }
        } else {
            GuiAction::Click { x, y }
        };
        targets.push(space.encode(&action)?);
    }
    Ok(targets)
}

/// Mean negative log-likelihood over target indices and its logit-space
/// gradient `(1/n) sum_t (pi - onehot_t)`.
pub fn sft_logit_loss_grad(dist: &ActionDistribution, targets: &[usize]) -> (f64, Vec<f64>) {
    let n = targets.len() as f64;
    // aggregate duplicate targets so a single-cell bbox reproduces the
    // unaugmented loss to the last bit
    let mut counts: Vec<(usize, f64)> = Vec::new();
    for t in targets {
        match counts.iter_mut().find(|(i, _)| i == t) {
            Some((_, c)) => *c += 1.0,
            None => counts.push((*t, 1.0)),
        }
    }
    let mut loss = 0.0;
    // per-target gradient is (pi - onehot_t); pi is target-independent, so
    // the mean is pi minus the averaged one-hot mass
    let mut grad: Vec<f64> = dist.probs.clone();
    for (t, c) in counts {
        loss -= c * dist.log_prob(t) / n;
        grad[t] -= c / n;
    }
    (loss, grad)
}

/// SFT loss and flat parameter gradient for one query.
pub fn sft_loss_and_grad(
    model: &PolicyModel,
    space: &ActionSpace,
    query: &Query,
    g_box: usize,
    rng: &mut RngStream,
) -> Result<(f64, Vec<f64>)> {
    let targets = sft_targets(space, query, g_box, rng)?;
    let dist = model.forward(&query.features)?;
    let (loss, logit_grad) = sft_logit_loss_grad(&dist, &targets);
    let mut grad = vec![0.0; model.param_count()];
    accumulate_outer(&mut grad, &logit_grad, &query.features, 1.0);
    Ok((loss, grad))
}

/// The probability-maximization logit update analyzed by the entropy
/// injection lemma: `dz_a = eta * pi(a*) * (1[a=a*] - pi(a))`.
/// Components always sum to zero.
pub fn sft_logit_update(dist: &ActionDistribution, target: usize, eta: f64) -> Vec<f64> {
    let p_star = dist.probs[target];
    let mut delta: Vec<f64> = dist.probs.iter().map(|p| eta * p_star * (-p)).collect();
    delta[target] += eta * p_star;
    delta
}
