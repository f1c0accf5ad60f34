//! Clipped surrogate policy update.
//!
//! For a group with turns `(i, t)`, sampled actions `a` in rows `s` and
//! advantages `A`:
//!
//! ```text
//! J = 1/sum|tau_i| * sum_{i,t} min(psi * A, clip(psi, 1 - eps_low, 1 + eps_high) * A)
//! psi = pi(a | s) / pi_old(a | s)
//! ```
//!
//! There is no KL term. The gradient with respect to the logits of row `s`
//! is `A * psi * (onehot(a) - pi(. | s))` for turns whose unclipped branch
//! is active and zero otherwise.

use serde::{Deserialize, Serialize};

use crate::advantage::AdvantageBundle;
use crate::error::{Error, Result};
use crate::sim::policy::{log_softmax_at, softmax, ToyPolicy};
use crate::sim::rollout::SimGroup;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClipRange {
    pub eps_low: f64,
    pub eps_high: f64,
}

impl Default for ClipRange {
    fn default() -> Self {
        ClipRange {
            eps_low: 0.2,
            eps_high: 0.28,
        }
    }
}

impl ClipRange {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_low > 0.0 && self.eps_low <= self.eps_high && self.eps_high.is_finite()) {
            return Err(Error::param(format!(
                "clip range needs 0 < eps_low <= eps_high, got ({}, {})",
                self.eps_low, self.eps_high
            )));
        }
        Ok(())
    }

    pub fn clip(&self, ratio: f64) -> f64 {
        ratio.clamp(1.0 - self.eps_low, 1.0 + self.eps_high)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateConfig {
    pub learning_rate: f64,
    pub clip: ClipRange,
    /// Gradient steps per rollout group; the first always has `psi = 1`.
    pub epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    /// Surrogate value before the first step.
    pub objective: f64,
    /// Gradient norm at the first step.
    pub grad_norm: f64,
    /// Share of turns whose clipped branch was active, over all epochs.
    pub clipped_fraction: f64,
    pub epochs: usize,
}

/// Surrogate objective, its gradient with respect to every logit, and the
/// number of clipped turns.
pub fn surrogate(policy: &ToyPolicy, sim: &SimGroup, advantages: &[Vec<f64>], clip: &ClipRange) -> Result<(f64, Vec<f64>, usize)> {
    if advantages.len() != sim.steps.len()
        || advantages.iter().zip(&sim.steps).any(|(a, s)| a.len() != s.len())
    {
        return Err(Error::shape("advantages are not aligned with the rollout"));
    }
    let total = sim.total_turns();
    let mut grad = vec![0.0; policy.logits().len()];
    if total == 0 {
        return Ok((0.0, grad, 0));
    }
    let scale = 1.0 / total as f64;
    let k = policy.actions();
    let mut objective = 0.0;
    let mut clipped = 0;
    for (steps, advs) in sim.steps.iter().zip(advantages) {
        for (step, &adv) in steps.iter().zip(advs) {
            let logits = policy.row_logits(step.row);
            let probs = softmax(logits);
            let ratio = (log_softmax_at(logits, step.action) - step.old_log_prob).exp();
            let unclipped = ratio * adv;
            let clipped_term = clip.clip(ratio) * adv;
            objective += unclipped.min(clipped_term) * scale;
            let active = if adv >= 0.0 {
                ratio <= 1.0 + clip.eps_high
            } else {
                ratio >= 1.0 - clip.eps_low
            };
            if !active {
                clipped += 1;
                continue;
            }
            if adv == 0.0 {
                continue;
            }
            let coeff = adv * ratio * scale;
            let row = &mut grad[step.row * k..(step.row + 1) * k];
            for (g, p) in row.iter_mut().zip(&probs) {
                *g -= coeff * p;
            }
            row[step.action] += coeff;
        }
    }
    Ok((objective, grad, clipped))
}

/// Gradient ascent on the surrogate for `config.epochs` steps.
pub fn clipped_update(
    policy: &mut ToyPolicy,
    sim: &SimGroup,
    advantages: &AdvantageBundle,
    config: &UpdateConfig,
) -> Result<UpdateDiagnostics> {
    config.clip.validate()?;
    let mut diag = UpdateDiagnostics {
        epochs: config.epochs,
        ..Default::default()
    };
    if advantages.degenerate {
        return Ok(diag);
    }
    let mut clipped_total = 0;
    for epoch in 0..config.epochs {
        let (objective, grad, clipped) = surrogate(policy, sim, &advantages.combined, &config.clip)?;
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() || !objective.is_finite() {
            return Err(Error::NonFinite(format!(
                "group `{}` epoch {epoch}: objective {objective}, gradient norm {norm}",
                sim.group.group_id
            )));
        }
        if epoch == 0 {
            diag.objective = objective;
            diag.grad_norm = norm;
        }
        clipped_total += clipped;
        for (l, g) in policy.logits_mut().iter_mut().zip(&grad) {
            *l += config.learning_rate * g;
        }
    }
    let turns = sim.total_turns() * config.epochs.max(1);
    diag.clipped_fraction = if turns > 0 {
        clipped_total as f64 / turns as f64
    } else {
        0.0
    };
    Ok(diag)
}
