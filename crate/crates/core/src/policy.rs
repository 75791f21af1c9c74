//! Linear-softmax policy over the discrete action space, with exact
//! log-probabilities, entropy, sampling, and analytic parameter gradients.
//!
//! The parameter vector is a `K x input_dim` weight matrix stored row-major
//! in one flat `Vec<f64>`; logits are `W * features`. All gradients here are
//! verified against central finite differences in the test suite.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Flat policy parameter vector. The unit on which gradients, surgery, and
/// updates operate.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams(pub Vec<f64>);

impl PolicyParams {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// A linear policy: `logits(s) = W * phi(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel {
    weights: Vec<f64>,
    action_count: usize,
    input_dim: usize,
}

impl PolicyModel {
    pub fn zeros(action_count: usize, input_dim: usize) -> Self {
        PolicyModel {
            weights: vec![0.0; action_count * input_dim],
            action_count,
            input_dim,
        }
    }

    pub fn from_params(action_count: usize, input_dim: usize, params: PolicyParams) -> Result<Self> {
        if params.len() != action_count * input_dim {
            return Err(Error::invalid(format!(
                "parameter length {} != {action_count} x {input_dim}",
                params.len()
            )));
        }
        if !params.all_finite() {
            return Err(Error::Numeric("non-finite policy parameters".into()));
        }
        Ok(PolicyModel {
            weights: params.0,
            action_count,
            input_dim,
        })
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.weights
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Gradient-descent update `theta <- theta - lr * grad`.
    pub fn apply_gradient(&mut self, grad: &[f64], lr: f64) {
        debug_assert_eq!(grad.len(), self.weights.len());
        for (w, g) in self.weights.iter_mut().zip(grad) {
            *w -= lr * g;
        }
    }

    fn logits(&self, features: &[f64]) -> Vec<f64> {
        let mut logits = vec![0.0; self.action_count];
        for (a, logit) in logits.iter_mut().enumerate() {
            let row = &self.weights[a * self.input_dim..(a + 1) * self.input_dim];
            let mut acc = 0.0;
            for (w, f) in row.iter().zip(features) {
                acc += w * f;
            }
            *logit = acc;
        }
        logits
    }

    /// Action distribution at a state.
    pub fn forward(&self, features: &[f64]) -> Result<ActionDistribution> {
        if features.len() != self.input_dim {
            return Err(Error::invalid(format!(
                "feature length {} != input dim {}",
                features.len(),
                self.input_dim
            )));
        }
        Ok(ActionDistribution::from_logits(self.logits(features)))
    }

    /// Exact gradient of `log pi(index | features)` w.r.t. the flat
    /// parameter vector.
    pub fn logprob_grad(&self, features: &[f64], index: usize) -> Result<Vec<f64>> {
        let dist = self.forward(features)?;
        let logit_grad = dist.logprob_logit_grad(index);
        let mut grad = vec![0.0; self.param_count()];
        accumulate_outer(&mut grad, &logit_grad, features, 1.0);
        Ok(grad)
    }

    /// Exact gradient of the policy entropy w.r.t. the flat parameter
    /// vector.
    pub fn entropy_grad(&self, features: &[f64]) -> Result<Vec<f64>> {
        let dist = self.forward(features)?;
        let logit_grad = dist.entropy_logit_grad();
        let mut grad = vec![0.0; self.param_count()];
        accumulate_outer(&mut grad, &logit_grad, features, 1.0);
        Ok(grad)
    }
}

/// Adds `scale * logit_grad (outer) features` into a flat parameter
/// gradient. This is the chain rule through the linear map, factored out so
/// every loss shares one code path.
pub fn accumulate_outer(grad: &mut [f64], logit_grad: &[f64], features: &[f64], scale: f64) {
    let dim = features.len();
    debug_assert_eq!(grad.len(), logit_grad.len() * dim);
    for (a, &lg) in logit_grad.iter().enumerate() {
        if lg == 0.0 {
            continue;
        }
        let coeff = scale * lg;
        let row = &mut grad[a * dim..(a + 1) * dim];
        for (g, f) in row.iter_mut().zip(features) {
            *g += coeff * f;
        }
    }
}

/// A softmax distribution over action indices, kept alongside its logits
/// and log-probabilities.
#[derive(Debug, Clone)]
pub struct ActionDistribution {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl ActionDistribution {
    /// Numerically stable softmax (max subtraction).
    pub fn from_logits(logits: Vec<f64>) -> Self {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let shifted: Vec<f64> = logits.iter().map(|z| z - max).collect();
        for z in &shifted {
            sum += z.exp();
        }
        let log_sum = sum.ln();
        let log_probs: Vec<f64> = shifted.iter().map(|z| z - log_sum).collect();
        let probs: Vec<f64> = log_probs.iter().map(|lp| lp.exp()).collect();
        ActionDistribution {
            logits,
            probs,
            log_probs,
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn log_prob(&self, index: usize) -> f64 {
        self.log_probs[index]
    }

    /// Shannon entropy in nats; in `[0, ln K]`.
    pub fn entropy(&self) -> f64 {
        let mut h = 0.0;
        for (&p, &lp) in self.probs.iter().zip(&self.log_probs) {
            if p > 0.0 {
                h -= p * lp;
            }
        }
        h
    }

    /// Ties broken toward the lowest index, for deterministic decoding.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        let mut best_p = self.probs[0];
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > best_p {
                best = i;
                best_p = p;
            }
        }
        best
    }

    pub fn sample(&self, rng: &mut RngStream) -> usize {
        rng.sample_weighted(&self.probs)
    }

    /// Logit-space gradient of `log pi(index)`: `1[a=index] - pi(a)`.
    pub fn logprob_logit_grad(&self, index: usize) -> Vec<f64> {
        let mut g: Vec<f64> = self.probs.iter().map(|p| -p).collect();
        g[index] += 1.0;
        g
    }

    /// Logit-space gradient of the entropy:
    /// `dH/dz_a = -pi(a) * (log pi(a) - E_pi[log pi])`.
    pub fn entropy_logit_grad(&self) -> Vec<f64> {
        let h = self.entropy();
        // E_pi[log pi] = -H
        self.probs
            .iter()
            .zip(&self.log_probs)
            .map(|(&p, &lp)| -p * (lp + h))
            .collect()
    }

    /// Exact `KL(self || other)` over the shared index space; >= 0, zero
    /// iff the distributions coincide.
    pub fn kl(&self, other: &ActionDistribution) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        let mut kl = 0.0;
        for ((&p, &lp), &lq) in self.probs.iter().zip(&self.log_probs).zip(&other.log_probs) {
            kl += p * (lp - lq);
        }
        kl.max(0.0)
    }

    /// Logit-space gradient of `KL(self || ref)` w.r.t. self's logits:
    /// `pi(a) * (log pi(a) - log ref(a) - KL)`.
    pub fn kl_logit_grad(&self, other: &ActionDistribution) -> Vec<f64> {
        let kl = self.kl(other);
        self.probs
            .iter()
            .zip(&self.log_probs)
            .zip(&other.log_probs)
            .map(|((&p, &lp), &lq)| p * (lp - lq - kl))
            .collect()
    }
}
