//! Group-relative advantages.
//!
//! Turn rewards are pooled over every turn of every trajectory in the group
//! and centered against that pool. Decayed trajectory rewards are centered
//! over the group's trajectories. The two are summed per turn as
//! `A = A_traj + beta * A_turn`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::RolloutGroup;
use crate::reward::{population_std, RewardBundle, TurnValues};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// Center only (normalization factor 1).
    #[default]
    #[serde(alias = "const")]
    ConstOne,
    /// Center and divide by the population standard deviation.
    Std,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdvantageParams {
    pub beta: f64,
    pub norm_mode: NormMode,
    /// Lower bound on the divisor in [`NormMode::Std`].
    pub std_floor: f64,
    pub use_turn: bool,
    pub use_traj: bool,
}

impl Default for AdvantageParams {
    fn default() -> Self {
        AdvantageParams {
            beta: 1.0,
            norm_mode: NormMode::ConstOne,
            std_floor: 1e-8,
            use_turn: true,
            use_traj: true,
        }
    }
}

impl AdvantageParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::param(format!("beta must be non-negative, got {}", self.beta)));
        }
        if self.std_floor.is_nan() || self.std_floor <= 0.0 {
            return Err(Error::param(format!(
                "std_floor must be positive, got {}",
                self.std_floor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageBundle {
    /// Zeros when turn advantages are disabled.
    pub turn_advantages: TurnValues,
    /// Zeros when trajectory advantages are disabled.
    pub trajectory_advantages: Vec<f64>,
    pub combined: TurnValues,
    /// Every combined advantage is exactly zero: the group yields no gradient.
    pub degenerate: bool,
}

/// Subtracts the mean and divides by 1 or by `max(std, std_floor)`.
///
/// A list of identical values maps to exact zeros.
pub fn center_normalize(values: &[f64], mode: NormMode, std_floor: f64) -> Vec<f64> {
    let Some(&first) = values.first() else {
        return Vec::new();
    };
    if values.iter().all(|&v| v == first) {
        return vec![0.0; values.len()];
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let scale = match mode {
        NormMode::ConstOne => 1.0,
        NormMode::Std => population_std(values).max(std_floor),
    };
    values.iter().map(|v| (v - mean) / scale).collect()
}

/// Standardized per-trajectory advantages of plain group-relative
/// optimization.
pub fn grpo_advantages(rewards: &[f64], std_floor: f64) -> Vec<f64> {
    center_normalize(rewards, NormMode::Std, std_floor)
}

/// Repeats each trajectory's value on every one of its turns.
pub fn broadcast_to_turns(group: &RolloutGroup, per_trajectory: &[f64]) -> TurnValues {
    group
        .trajectories
        .iter()
        .zip(per_trajectory)
        .map(|(t, &a)| vec![a; t.turns.len()])
        .collect()
}

/// Centers the pool of all turn rewards in the group.
pub fn turn_advantages(bundle: &RewardBundle, params: &AdvantageParams) -> TurnValues {
    let pooled: Vec<f64> = bundle.turn_rewards.iter().flatten().copied().collect();
    let normalized = center_normalize(&pooled, params.norm_mode, params.std_floor);
    let mut it = normalized.into_iter();
    bundle
        .turn_rewards
        .iter()
        .map(|turns| it.by_ref().take(turns.len()).collect())
        .collect()
}

/// Centers the decayed trajectory rewards over the group.
pub fn trajectory_advantages(bundle: &RewardBundle, params: &AdvantageParams) -> Vec<f64> {
    center_normalize(
        &bundle.decayed_trajectory_rewards,
        params.norm_mode,
        params.std_floor,
    )
}

/// Sums the two levels into per-turn advantages and flags degenerate groups.
pub fn combine(turn: TurnValues, trajectory: Vec<f64>, params: &AdvantageParams) -> Result<AdvantageBundle> {
    if turn.len() != trajectory.len() {
        return Err(Error::shape(format!(
            "{} trajectories of turn advantages but {} trajectory advantages",
            turn.len(),
            trajectory.len()
        )));
    }
    let combined: TurnValues = turn
        .iter()
        .zip(&trajectory)
        .map(|(turns, &a_traj)| {
            turns
                .iter()
                .map(|&a_turn| {
                    let traj_part = if params.use_traj { a_traj } else { 0.0 };
                    let turn_part = if params.use_turn { params.beta * a_turn } else { 0.0 };
                    traj_part + turn_part
                })
                .collect()
        })
        .collect();
    let degenerate = combined.iter().flatten().all(|&a| a == 0.0);
    Ok(AdvantageBundle {
        turn_advantages: turn,
        trajectory_advantages: trajectory,
        combined,
        degenerate,
    })
}

pub fn combined_advantages(bundle: &RewardBundle, params: &AdvantageParams) -> Result<AdvantageBundle> {
    params.validate()?;
    if bundle.turn_rewards.len() != bundle.decayed_trajectory_rewards.len() {
        return Err(Error::shape("turn and trajectory rewards disagree on trajectory count"));
    }
    let turn = if params.use_turn {
        turn_advantages(bundle, params)
    } else {
        bundle.turn_rewards.iter().map(|t| vec![0.0; t.len()]).collect()
    };
    let trajectory = if params.use_traj {
        trajectory_advantages(bundle, params)
    } else {
        vec![0.0; bundle.decayed_trajectory_rewards.len()]
    };
    combine(turn, trajectory, params)
}
