//! Accuracy metrics: per-task step/trajectory accuracy under greedy
//! teacher-forced decoding, the lower-triangular accuracy matrix over
//! training stages, and the forgetting measure.

use crate::action::ActionSpace;
use crate::data::TaskDataset;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::policy::PolicyModel;
use crate::reward;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Step,
    Trajectory,
}

/// `rows[n][k]` is the accuracy on the k-th trained task after finishing
/// stage n (0-indexed); row n has n+1 entries.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyMatrix {
    pub metric_kind: MetricKind,
    pub rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new(metric_kind: MetricKind) -> Self {
        AccuracyMatrix {
            metric_kind,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        self.rows.push(row);
    }

    pub fn stage_count(&self) -> usize {
        self.rows.len()
    }

    pub fn validate_lower_triangular(&self) -> Result<()> {
        for (n, row) in self.rows.iter().enumerate() {
            if row.len() != n + 1 {
                return Err(Error::invalid(format!(
                    "row {n} has {} entries, expected {}",
                    row.len(),
                    n + 1
                )));
            }
            if row.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(Error::invalid(format!("row {n} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Step and trajectory accuracy of greedy decoding on a test set. Teacher
/// forcing: each step is scored against its own ground truth with the
/// dataset-provided features.
pub fn eval_task(
    model: &PolicyModel,
    space: &ActionSpace,
    dataset_test: &[crate::data::Trajectory],
    exec: &Executor,
) -> Result<(f64, f64)> {
    if dataset_test.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let per_traj: Vec<Result<(usize, usize)>> = exec.map_indexed(dataset_test, |_, traj| {
        let mut correct = 0usize;
        for (si, step) in traj.steps.iter().enumerate() {
            let features = traj.combined_features(si);
            let dist = model.forward(&features)?;
            let action = space.decode(dist.argmax())?;
            let outcome = reward::score(&action, &step.gt_action, step.gt_bbox.as_ref())?;
            if reward::is_step_correct(&outcome) {
                correct += 1;
            }
        }
        Ok((correct, traj.steps.len()))
    });
    let mut steps_correct = 0usize;
    let mut steps_total = 0usize;
    let mut trajs_correct = 0usize;
    for r in per_traj {
        let (correct, total) = r?;
        steps_correct += correct;
        steps_total += total;
        if correct == total {
            trajs_correct += 1;
        }
    }
    Ok((
        steps_correct as f64 / steps_total as f64,
        trajs_correct as f64 / dataset_test.len() as f64,
    ))
}

/// Convenience wrapper over [`eval_task`] for a whole [`TaskDataset`].
pub fn eval_dataset(
    model: &PolicyModel,
    space: &ActionSpace,
    dataset: &TaskDataset,
    exec: &Executor,
) -> Result<(f64, f64)> {
    eval_task(model, space, &dataset.test, exec)
}

/// Forgetting measure over a completed matrix:
/// `(1/(N-1)) * sum_{k<N} (A[N][k] - A[k][k])`. Negative values mean
/// forgetting, positive values backward transfer.
pub fn forgetting_measure(matrix: &AccuracyMatrix) -> Result<f64> {
    let n = matrix.stage_count();
    if n < 2 {
        return Err(Error::invalid("forgetting measure needs at least 2 stages"));
    }
    let last = &matrix.rows[n - 1];
    if last.len() != n {
        return Err(Error::invalid("final row incomplete"));
    }
    let mut sum = 0.0;
    for k in 0..n - 1 {
        if matrix.rows[k].len() <= k {
            return Err(Error::invalid(format!("diagonal entry {k} missing")));
        }
        sum += last[k] - matrix.rows[k][k];
    }
    Ok(sum / (n - 1) as f64)
}

/// Mean accuracy across all tasks seen by the final stage.
pub fn final_stage_average(matrix: &AccuracyMatrix) -> Result<f64> {
    let last = matrix
        .rows
        .last()
        .ok_or_else(|| Error::invalid("empty matrix"))?;
    Ok(last.iter().sum::<f64>() / last.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::GuiAction;
    use crate::data::{Step, Trajectory};
    use crate::policy::PolicyParams;
    use crate::rng::RngStream;

    fn matrix(rows: Vec<Vec<f64>>) -> AccuracyMatrix {
        AccuracyMatrix {
            metric_kind: MetricKind::Step,
            rows,
        }
    }

    #[test]
    fn fm_examples() {
        // no change -> 0
        let m = matrix(vec![vec![0.8], vec![0.8, 0.9]]);
        assert_eq!(forgetting_measure(&m).unwrap(), 0.0);
        // N=3 worked example
        let m = matrix(vec![
            vec![0.8],
            vec![0.7, 0.85],
            vec![0.7, 0.9, 0.6],
        ]);
        assert!((forgetting_measure(&m).unwrap() - (-0.025)).abs() < 1e-15);
        // single-term case
        let m = matrix(vec![vec![0.8], vec![0.7, 0.5]]);
        assert!((forgetting_measure(&m).unwrap() - (-0.1)).abs() < 1e-15);
        // N < 2 is an error
        let m = matrix(vec![vec![0.8]]);
        assert!(forgetting_measure(&m).is_err());
    }

    #[test]
    fn fm_matches_brute_force_on_random_matrices() {
        let mut rng = RngStream::new(30, 1);
        for _ in 0..1000 {
            let n = 2 + rng.below_usize(8);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|r| (0..=r).map(|_| rng.next_f64()).collect())
                .collect();
            let m = matrix(rows.clone());
            // independent brute-force loop over the definition
            let mut acc = 0.0;
            let mut count = 0.0;
            for k in 0..n - 1 {
                acc += rows[n - 1][k] - rows[k][k];
                count += 1.0;
            }
            let brute = acc / count;
            assert_eq!(forgetting_measure(&m).unwrap(), brute);
        }
    }

    #[test]
    fn stage_average() {
        let m = matrix(vec![vec![0.8], vec![0.8, 0.9]]);
        assert!((final_stage_average(&m).unwrap() - 0.85).abs() < 1e-15);
        let single = matrix(vec![vec![0.42]]);
        assert_eq!(final_stage_average(&single).unwrap(), 0.42);
        let mut rng = RngStream::new(31, 1);
        for _ in 0..100 {
            let n = 1 + rng.below_usize(9);
            let row: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            let brute = row.iter().sum::<f64>() / n as f64;
            let m = matrix(vec![row]);
            assert_eq!(final_stage_average(&m).unwrap(), brute);
        }
    }

    #[test]
    fn lower_triangular_validation() {
        let good = matrix(vec![vec![0.5], vec![0.5, 0.5]]);
        assert!(good.validate_lower_triangular().is_ok());
        let bad = matrix(vec![vec![0.5, 0.6]]);
        assert!(bad.validate_lower_triangular().is_err());
        let out_of_range = matrix(vec![vec![1.5]]);
        assert!(out_of_range.validate_lower_triangular().is_err());
    }

    #[test]
    fn eval_counts_one_wrong_step() {
        // Single-feature model over a 10-action space (grid 1); feature
        // selects the logit directly. Build a 5-step trajectory where the
        // model's argmax is wrong on exactly one step.
        let space = ActionSpace::new(1, 0, 0).unwrap();
        let k = space.len();
        // weights: identity-ish on a one-hot feature of dim k
        let mut w = vec![0.0; k * k];
        for a in 0..k {
            w[a * k + a] = 1.0;
        }
        let model = PolicyModel::from_params(k, k, PolicyParams(w)).unwrap();
        let mk_step = |action: GuiAction, feature_idx: usize| {
            let mut obs = vec![0.0; k];
            obs[feature_idx] = 5.0;
            Step {
                observation: obs,
                gt_action: action,
                gt_bbox: None,
            }
        };
        let home = space.encode(&GuiAction::Home).unwrap();
        let back = space.encode(&GuiAction::Back).unwrap();
        let wait = space.encode(&GuiAction::Wait).unwrap();
        let finish = space.encode(&GuiAction::Finish).unwrap();
        let traj = Trajectory {
            instruction: vec![],
            steps: vec![
                mk_step(GuiAction::Home, home),
                mk_step(GuiAction::Back, back),
                mk_step(GuiAction::Wait, wait),
                mk_step(GuiAction::Home, back), // model answers Back, gt Home
                mk_step(GuiAction::Finish, finish),
            ],
        };
        let (step_acc, traj_acc) =
            eval_task(&model, &space, &[traj], &Executor::default()).unwrap();
        assert!((step_acc - 0.8).abs() < 1e-12);
        assert_eq!(traj_acc, 0.0);
    }

    #[test]
    fn eval_is_deterministic() {
        let space = ActionSpace::new(2, 2, 1).unwrap();
        let mut rng = RngStream::new(32, 1);
        let model = crate::policy::testutil::random_model(space.len(), 3, &mut rng, 0.5);
        let traj = Trajectory {
            instruction: vec![0.5],
            steps: vec![Step {
                observation: vec![rng.normal(), rng.normal()],
                gt_action: GuiAction::Finish,
                gt_bbox: None,
            }],
        };
        let a = eval_task(&model, &space, &[traj.clone()], &Executor::default()).unwrap();
        let b = eval_task(&model, &space, &[traj], &Executor::new(4)).unwrap();
        assert_eq!(a, b);
    }
}
