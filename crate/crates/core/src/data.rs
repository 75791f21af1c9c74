//! Trajectory-level data types shared by the generator, trainers, and
//! evaluation.

use crate::action::{ActionClass, BoundingBox, GuiAction};
use crate::error::{Error, Result};

/// One step of a demonstration: the observation features, the ground-truth
/// action, and (for spatial actions) the target element's bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub gt_action: GuiAction,
    pub gt_bbox: Option<BoundingBox>,
}

impl Step {
    pub fn validate(&self, obs_dim: usize) -> Result<()> {
        if self.observation.len() != obs_dim {
            return Err(Error::invalid(format!(
                "observation length {} != {obs_dim}",
                self.observation.len()
            )));
        }
        let spatial = self.gt_action.class() == ActionClass::Spatial;
        if spatial != self.gt_bbox.is_some() {
            return Err(Error::Contract(format!(
                "bbox presence must match action class (spatial={spatial})"
            )));
        }
        Ok(())
    }
}

/// An instruction plus its demonstrated step sequence. The final step is
/// always `Finish`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub instruction: Vec<f64>,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn validate(&self, obs_dim: usize, instr_dim: usize) -> Result<()> {
        if self.instruction.len() != instr_dim {
            return Err(Error::invalid(format!(
                "instruction length {} != {instr_dim}",
                self.instruction.len()
            )));
        }
        let last = self
            .steps
            .last()
            .ok_or_else(|| Error::invalid("empty trajectory"))?;
        if last.gt_action != GuiAction::Finish {
            return Err(Error::invalid("trajectory must end with Finish"));
        }
        for step in &self.steps {
            step.validate(obs_dim)?;
        }
        Ok(())
    }

    /// Policy input for one step: observation features with the
    /// instruction features appended.
    pub fn combined_features(&self, step: usize) -> Vec<f64> {
        let mut f = self.steps[step].observation.clone();
        f.extend_from_slice(&self.instruction);
        f
    }
}

/// Train/test trajectories for one task in a suite.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub task_id: usize,
    pub name: String,
    pub train: Vec<Trajectory>,
    pub test: Vec<Trajectory>,
}

impl TaskDataset {
    pub fn validate(&self, obs_dim: usize, instr_dim: usize) -> Result<()> {
        if self.train.is_empty() || self.test.is_empty() {
            return Err(Error::invalid(format!(
                "task {} needs non-empty train and test splits",
                self.task_id
            )));
        }
        for t in self.train.iter().chain(self.test.iter()) {
            t.validate(obs_dim, instr_dim)?;
        }
        Ok(())
    }
}
