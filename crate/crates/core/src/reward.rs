//! Dense turn rewards from difficulty-weighted partial success, and
//! efficiency-decayed trajectory outcomes.
//!
//! Everything here is computed from one rollout group at a time. Test
//! statistics are online: they describe how the current policy fares on each
//! test and are rebuilt for every group.
//!
//! The pipeline for a group with `m` tests:
//!
//! 1. `rho_j`: share of all executed turns that pass test `j`.
//! 2. `w_j = exp(-alpha * rho_j)`: harder tests weigh more.
//! 3. `dens_j = sum_k exp(-(rho_j - rho_k)^2 / (2 sigma^2))` with
//!    `sigma = std(rho) / 2`: how crowded the difficulty level of test `j` is.
//! 4. `w'_j = w_j / (dens_j + eps)`: crowded (redundant) levels are damped.
//! 5. A turn earns the sum of `w'_j` over the tests it passes.
//!
//! Trajectories additionally earn `gamma^len` when their final turn passes
//! the whole suite, and zero otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::RolloutGroup;

/// Per-trajectory, per-turn values laid out like `group.trajectories[i].turns[t]`.
pub type TurnValues = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Difficulty weights damped by difficulty density.
    #[default]
    Verpo,
    /// Uniform `1/m` weights: the turn reward is the fraction of tests passed.
    #[serde(alias = "ps")]
    PassRate,
    /// Difficulty weights without density damping.
    #[serde(alias = "diff")]
    DifficultyOnly,
    /// No turn rewards; only the trajectory outcome is kept.
    Binary,
}

impl RewardMode {
    pub fn has_turn_rewards(self) -> bool {
        !matches!(self, RewardMode::Binary)
    }
}

/// Kernel used for the difficulty density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KdeKernel {
    /// Bare Gaussian kernel sum; every density is at least 1 (the self term).
    #[default]
    Unnormalized,
    /// Proper density estimate, scaled by `1 / (m * sigma * sqrt(2 pi))`.
    /// With `sigma = 0` it falls back to the unnormalized value.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    pub alpha: f64,
    pub gamma: f64,
    pub kde_epsilon: f64,
    pub reward_mode: RewardMode,
    pub kde_kernel: KdeKernel,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            alpha: 2.0,
            gamma: 0.95,
            kde_epsilon: 1e-8,
            reward_mode: RewardMode::Verpo,
            kde_kernel: KdeKernel::Unnormalized,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::param(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.kde_epsilon > 0.0 && self.kde_epsilon.is_finite()) {
            return Err(Error::param(format!(
                "kde_epsilon must be positive, got {}",
                self.kde_epsilon
            )));
        }
        Ok(())
    }
}

/// Per-test statistics of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTestStats {
    pub pass_rates: Vec<f64>,
    pub raw_weights: Vec<f64>,
    pub densities: Vec<f64>,
    pub normalized_weights: Vec<f64>,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBundle {
    pub turn_rewards: TurnValues,
    pub trajectory_outcomes: Vec<bool>,
    pub decayed_trajectory_rewards: Vec<f64>,
    /// Per-test weights the turn rewards were built from; empty in binary mode.
    pub applied_weights: Vec<f64>,
    /// `None` in binary mode, where no test statistics are needed.
    pub stats: Option<GroupTestStats>,
}

/// Empirical pass rate of every test over all turns of the group.
pub fn pass_rates(group: &RolloutGroup) -> Result<Vec<f64>> {
    let m = group.test_count()?;
    let total = group.total_turns();
    if total == 0 {
        return Err(Error::Empty("group has no executed turns"));
    }
    let mut counts = vec![0u32; m];
    for (_, turn) in group.turns() {
        for (c, &p) in counts.iter_mut().zip(&turn.passes) {
            *c += u32::from(p);
        }
    }
    let denom = total as f64;
    Ok(counts.into_iter().map(|c| f64::from(c) / denom).collect())
}

pub fn difficulty_weights(pass_rates: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param(format!("alpha must be positive, got {alpha}")));
    }
    Ok(pass_rates.iter().map(|&r| (-alpha * r).exp()).collect())
}

/// Population standard deviation.
pub(crate) fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt()
}

/// Gaussian kernel density of each pass rate among all pass rates, with
/// bandwidth `std(rho) / 2`. Returns `(densities, bandwidth)`.
///
/// Pass rates are multiples of `1 / total_turns`, so a group has few distinct
/// values; the kernel sum is evaluated once per distinct value.
pub fn kde_densities(pass_rates: &[f64]) -> Result<(Vec<f64>, f64)> {
    kde_densities_with(pass_rates, KdeKernel::Unnormalized)
}

pub fn kde_densities_with(pass_rates: &[f64], kernel: KdeKernel) -> Result<(Vec<f64>, f64)> {
    if pass_rates.is_empty() {
        return Err(Error::Empty("no pass rates"));
    }
    let m = pass_rates.len();
    let sigma = population_std(pass_rates) / 2.0;
    let first = pass_rates[0];
    if sigma == 0.0 || pass_rates.iter().all(|&r| r == first) {
        // Coincident points: every kernel term is exactly 1.
        return Ok((vec![m as f64; m], 0.0));
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_unstable_by(|&a, &b| pass_rates[a].total_cmp(&pass_rates[b]));
    let mut levels: Vec<(f64, f64)> = Vec::new();
    let mut level_of = vec![0usize; m];
    for &j in &order {
        let v = pass_rates[j];
        match levels.last_mut() {
            Some((last, count)) if *last == v => *count += 1.0,
            _ => levels.push((v, 1.0)),
        }
        level_of[j] = levels.len() - 1;
    }

    let inv = 1.0 / (2.0 * sigma * sigma);
    // Symmetric kernel: evaluate each pair of levels once.
    let mut level_density: Vec<f64> = levels.iter().map(|&(_, count)| count).collect();
    for (a, &(v, count_v)) in levels.iter().enumerate() {
        for (b, &(u, count_u)) in levels.iter().enumerate().skip(a + 1) {
            let d = v - u;
            let k = (-(d * d) * inv).exp();
            level_density[a] += count_u * k;
            level_density[b] += count_v * k;
        }
    }

    let scale = match kernel {
        KdeKernel::Unnormalized => 1.0,
        KdeKernel::Normalized => 1.0 / (m as f64 * sigma * (2.0 * std::f64::consts::PI).sqrt()),
    };
    let densities = level_of.iter().map(|&l| level_density[l] * scale).collect();
    Ok((densities, sigma))
}

pub fn normalized_weights(weights: &[f64], densities: &[f64], kde_epsilon: f64) -> Result<Vec<f64>> {
    if weights.len() != densities.len() {
        return Err(Error::shape(format!(
            "{} weights but {} densities",
            weights.len(),
            densities.len()
        )));
    }
    if kde_epsilon.is_nan() || kde_epsilon <= 0.0 {
        return Err(Error::param(format!("kde_epsilon must be positive, got {kde_epsilon}")));
    }
    Ok(weights
        .iter()
        .zip(densities)
        .map(|(w, d)| w / (d + kde_epsilon))
        .collect())
}

/// Weighted partial success of every turn.
pub fn turn_rewards(group: &RolloutGroup, weights: &[f64]) -> Result<TurnValues> {
    group
        .trajectories
        .iter()
        .map(|traj| {
            traj.turns
                .iter()
                .map(|turn| {
                    if turn.passes.len() != weights.len() {
                        return Err(Error::shape(format!(
                            "pass vector of length {} against {} weights",
                            turn.passes.len(),
                            weights.len()
                        )));
                    }
                    Ok(turn
                        .passes
                        .iter()
                        .zip(weights)
                        .filter(|(&p, _)| p)
                        .map(|(_, w)| w)
                        .sum())
                })
                .collect()
        })
        .collect()
}

/// Binary outcome of each trajectory and its `gamma^len` decayed value.
pub fn trajectory_rewards(group: &RolloutGroup, gamma: f64) -> Result<(Vec<bool>, Vec<f64>)> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let outcomes: Vec<bool> = group.trajectories.iter().map(|t| t.solved()).collect();
    let decayed = group
        .trajectories
        .iter()
        .zip(&outcomes)
        .map(|(t, &ok)| if ok { gamma.powi(t.len() as i32) } else { 0.0 })
        .collect();
    Ok((outcomes, decayed))
}

/// Test statistics through the density-damped weights.
pub fn group_test_stats(group: &RolloutGroup, params: &RewardParams) -> Result<GroupTestStats> {
    let pass_rates = pass_rates(group)?;
    let raw_weights = difficulty_weights(&pass_rates, params.alpha)?;
    let (densities, bandwidth) = kde_densities_with(&pass_rates, params.kde_kernel)?;
    let normalized_weights = normalized_weights(&raw_weights, &densities, params.kde_epsilon)?;
    Ok(GroupTestStats {
        pass_rates,
        raw_weights,
        densities,
        normalized_weights,
        bandwidth,
    })
}

/// Output of the turn-level half of [`compute_rewards`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTurnRewards {
    pub turn_rewards: TurnValues,
    pub applied_weights: Vec<f64>,
    pub stats: Option<GroupTestStats>,
}

/// Turn-level rewards for the configured mode. Binary mode yields zeros
/// without computing any statistics.
pub fn dense_turn_rewards(group: &RolloutGroup, params: &RewardParams) -> Result<DenseTurnRewards> {
    if !params.reward_mode.has_turn_rewards() {
        return Ok(DenseTurnRewards {
            turn_rewards: zeros_like(group),
            applied_weights: Vec::new(),
            stats: None,
        });
    }
    let stats = group_test_stats(group, params)?;
    let applied_weights = match params.reward_mode {
        RewardMode::Verpo => stats.normalized_weights.clone(),
        RewardMode::DifficultyOnly => stats.raw_weights.clone(),
        RewardMode::PassRate => {
            let m = stats.pass_rates.len();
            vec![1.0 / m as f64; m]
        }
        RewardMode::Binary => unreachable!(),
    };
    let turn_rewards = turn_rewards(group, &applied_weights)?;
    Ok(DenseTurnRewards {
        turn_rewards,
        applied_weights,
        stats: Some(stats),
    })
}

pub fn compute_rewards(group: &RolloutGroup, params: &RewardParams) -> Result<RewardBundle> {
    params.validate()?;
    group.test_count()?;
    let dense = dense_turn_rewards(group, params)?;
    let (trajectory_outcomes, decayed_trajectory_rewards) = trajectory_rewards(group, params.gamma)?;
    Ok(RewardBundle {
        turn_rewards: dense.turn_rewards,
        trajectory_outcomes,
        decayed_trajectory_rewards,
        applied_weights: dense.applied_weights,
        stats: dense.stats,
    })
}

pub(crate) fn zeros_like(group: &RolloutGroup) -> TurnValues {
    group
        .trajectories
        .iter()
        .map(|t| vec![0.0; t.turns.len()])
        .collect()
}
