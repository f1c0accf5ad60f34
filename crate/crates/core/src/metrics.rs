//! Evaluation analytics: unbiased pass@k, degenerate-group ratio and a
//! per-stage wall-clock breakdown of the training pipeline.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::advantage::AdvantageBundle;
use crate::error::{Error, Result};

/// Unbiased pass@k for `n` samples of which `c` pass: `1 - C(n-c, k) / C(n, k)`.
///
/// Evaluated as `1 - prod_{i=n-c+1}^{n} (1 - k/i)` so large `n` never
/// overflows.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64> {
    if c > n {
        return Err(Error::param(format!("c = {c} exceeds n = {n}")));
    }
    if k == 0 || k > n {
        return Err(Error::param(format!("k = {k} must lie in 1..={n}")));
    }
    if n - c < k {
        return Ok(1.0);
    }
    let kf = k as f64;
    let prod: f64 = (n - c + 1..=n).map(|i| 1.0 - kf / i as f64).product();
    Ok(1.0 - prod)
}

/// Mean of per-problem pass@k over `(n, c)` pairs.
pub fn aggregate_pass_at_k(samples: &[(u64, u64)], k: u64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("no problems to aggregate"));
    }
    let mut sum = 0.0;
    for &(n, c) in samples {
        sum += pass_at_k(n, c, k)?;
    }
    Ok(sum / samples.len() as f64)
}

pub fn degenerate_ratio(batch: &[AdvantageBundle]) -> Result<f64> {
    let flags: Vec<bool> = batch.iter().map(|b| b.degenerate).collect();
    degenerate_ratio_of(&flags)
}

pub fn degenerate_ratio_of(flags: &[bool]) -> Result<f64> {
    if flags.is_empty() {
        return Err(Error::Empty("no groups in batch"));
    }
    let degenerate = flags.iter().filter(|&&d| d).count();
    Ok(degenerate as f64 / flags.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Rollout,
    Reward,
    Advantage,
    Update,
    /// Turn-level dense rewards plus turn advantages. Nested inside
    /// `Reward` and `Advantage`, never added to them.
    TurnAdvantage,
}

/// Accumulates monotonic wall time per stage.
#[derive(Debug, Clone)]
pub struct StageTimer {
    started: Instant,
    iterations: usize,
    rollout: Duration,
    reward: Duration,
    advantage: Duration,
    update: Duration,
    turn_advantage: Duration,
}

impl Default for StageTimer {
    fn default() -> Self {
        Self::new()
    }
}

impl StageTimer {
    pub fn new() -> Self {
        StageTimer {
            started: Instant::now(),
            iterations: 0,
            rollout: Duration::ZERO,
            reward: Duration::ZERO,
            advantage: Duration::ZERO,
            update: Duration::ZERO,
            turn_advantage: Duration::ZERO,
        }
    }

    pub fn add(&mut self, stage: Stage, elapsed: Duration) {
        let slot = match stage {
            Stage::Rollout => &mut self.rollout,
            Stage::Reward => &mut self.reward,
            Stage::Advantage => &mut self.advantage,
            Stage::Update => &mut self.update,
            Stage::TurnAdvantage => &mut self.turn_advantage,
        };
        *slot += elapsed;
    }

    /// Runs `f` and charges its wall time to `stage`.
    pub fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.add(stage, start.elapsed());
        out
    }

    pub fn finish_iteration(&mut self) {
        self.iterations += 1;
    }

    /// Folds another timer's stage totals into this one.
    pub fn merge(&mut self, other: &StageTimer) {
        self.rollout += other.rollout;
        self.reward += other.reward;
        self.advantage += other.advantage;
        self.update += other.update;
        self.turn_advantage += other.turn_advantage;
        self.iterations += other.iterations;
    }

    pub fn elapsed(&self) -> Duration {
        self.started.elapsed()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub iterations: usize,
    pub rollout_ms: f64,
    pub reward_ms: f64,
    pub advantage_ms: f64,
    pub update_ms: f64,
    pub total_ms: f64,
    /// Portion of reward + advantage spent on turn-level work.
    pub turn_advantage_ms: f64,
    pub turn_advantage_fraction: f64,
    /// `(reward + advantage) / total`.
    pub reward_advantage_fraction: f64,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn fraction(part: f64, total: f64) -> f64 {
    if total > 0.0 {
        (part / total).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Freezes the timer into a report; total is the wall time since creation.
pub fn timing_breakdown(timer: &StageTimer) -> TimingReport {
    let rollout_ms = ms(timer.rollout);
    let reward_ms = ms(timer.reward);
    let advantage_ms = ms(timer.advantage);
    let update_ms = ms(timer.update);
    let stages = rollout_ms + reward_ms + advantage_ms + update_ms;
    let total_ms = ms(timer.elapsed()).max(stages);
    let turn_advantage_ms = ms(timer.turn_advantage);
    TimingReport {
        iterations: timer.iterations,
        rollout_ms,
        reward_ms,
        advantage_ms,
        update_ms,
        total_ms,
        turn_advantage_ms,
        turn_advantage_fraction: fraction(turn_advantage_ms, total_ms),
        reward_advantage_fraction: fraction(reward_ms + advantage_ms, total_ms),
    }
}

impl TimingReport {
    pub const CSV_HEADER: &'static str = "iterations,rollout_ms,reward_ms,advantage_ms,update_ms,total_ms,turn_advantage_ms,turn_advantage_fraction,reward_advantage_fraction";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.8},{:.8}",
            self.iterations,
            self.rollout_ms,
            self.reward_ms,
            self.advantage_ms,
            self.update_ms,
            self.total_ms,
            self.turn_advantage_ms,
            self.turn_advantage_fraction,
            self.reward_advantage_fraction
        )
    }
}
