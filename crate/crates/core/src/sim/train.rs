//! Training loop: sample problems, roll out groups, score them, compute
//! advantages and apply one clipped update per group.
//!
//! Every problem owns its own tabular policy. All randomness comes from
//! ChaCha substreams keyed by `(seed, step, slot)`, so results do not depend
//! on how many worker threads run the rollouts.

use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advantage::{self, AdvantageBundle, AdvantageParams, NormMode};
use crate::error::{Error, Result};
use crate::metrics::{timing_breakdown, Stage, StageTimer, TimingReport};
use crate::reward::{self, RewardBundle, RewardMode, RewardParams};
use crate::sim::env::{EnvConfig, Environment};
use crate::sim::policy::ToyPolicy;
use crate::sim::rollout::{rollout_group, SimGroup};
use crate::sim::update::{clipped_update, ClipRange, UpdateConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub label: String,
    /// Trajectories per problem (N).
    pub group_size: usize,
    /// Turn limit (T).
    pub turn_limit: usize,
    pub batch_problems: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Gradient steps per rollout batch.
    pub update_epochs: usize,
    /// Solve rate that counts as "reached" in comparisons.
    pub solve_threshold: f64,
    /// Rollout worker threads; 1 runs everything on the calling thread.
    pub workers: usize,
    pub reward: RewardParams,
    pub advantage: AdvantageParams,
    pub clip: ClipRange,
    pub env: EnvConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            label: "verpo".into(),
            group_size: 10,
            turn_limit: 4,
            batch_problems: 32,
            steps: 300,
            learning_rate: 1.0,
            seed: 0,
            update_epochs: 1,
            solve_threshold: 0.9,
            workers: 1,
            reward: RewardParams::default(),
            advantage: AdvantageParams::default(),
            clip: ClipRange::default(),
            env: EnvConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::param(format!("group_size must be at least 2, got {}", self.group_size)));
        }
        if self.turn_limit == 0 {
            return Err(Error::param("turn_limit must be at least 1"));
        }
        if self.batch_problems == 0 {
            return Err(Error::param("batch_problems must be at least 1"));
        }
        if self.update_epochs == 0 {
            return Err(Error::param("update_epochs must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::param("workers must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..=1.0).contains(&self.solve_threshold) {
            return Err(Error::param("solve_threshold must lie in [0, 1]"));
        }
        self.reward.validate()?;
        self.advantage.validate()?;
        self.clip.validate()
    }

    fn update_config(&self) -> UpdateConfig {
        UpdateConfig {
            learning_rate: self.learning_rate,
            clip: self.clip,
            epochs: self.update_epochs,
        }
    }
}

/// Metrics of one batch of rollouts (taken before that batch's update).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// 1-based training step; 0 for the evaluation of the initial policy.
    pub step: usize,
    /// Share of trajectories ending in a full pass.
    pub solve_rate: f64,
    /// Share of groups whose advantages are all zero.
    pub degenerate_group_ratio: f64,
    /// Mean length of solved trajectories; `None` if nothing was solved.
    pub mean_turns_to_solve: Option<f64>,
    pub clipped_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub label: String,
    pub seed: u64,
    pub initial: StepMetrics,
    pub steps: Vec<StepMetrics>,
    pub timing: TimingReport,
}

impl TrainRun {
    /// First step whose solve rate reaches `threshold`.
    pub fn steps_to(&self, threshold: f64) -> Option<usize> {
        self.steps.iter().find(|m| m.solve_rate >= threshold).map(|m| m.step)
    }

    pub fn mean_degenerate_ratio(&self) -> f64 {
        if self.steps.is_empty() {
            return self.initial.degenerate_group_ratio;
        }
        self.steps.iter().map(|m| m.degenerate_group_ratio).sum::<f64>() / self.steps.len() as f64
    }

    pub fn final_solve_rate(&self) -> f64 {
        self.steps.last().unwrap_or(&self.initial).solve_rate
    }
}

/// The documented reference run: verpo rewards on [`reference_env`] with
/// standardized advantages.
///
/// Standardizing keeps the comparison between reward modes about the shape
/// of the rewards rather than their scale; with centering only, modes whose
/// turn rewards are larger simply take larger steps.
///
/// [`reference_env`]: crate::sim::env::reference_env
pub fn reference_config() -> TrainConfig {
    TrainConfig {
        advantage: AdvantageParams {
            norm_mode: NormMode::Std,
            ..Default::default()
        },
        ..Default::default()
    }
}

/// The reference run plus its ablations, labelled `verpo`, `no_turn_adv`,
/// `no_traj_adv`, `pass_rate`, `difficulty_only` and `binary`.
pub fn ablation_configs() -> Vec<TrainConfig> {
    let base = reference_config();
    let variant = |label: &str, mode: RewardMode, use_turn: bool, use_traj: bool| TrainConfig {
        label: label.into(),
        reward: RewardParams {
            reward_mode: mode,
            ..base.reward
        },
        advantage: AdvantageParams {
            use_turn,
            use_traj,
            ..base.advantage
        },
        ..base.clone()
    };
    vec![
        variant("verpo", RewardMode::Verpo, true, true),
        variant("no_turn_adv", RewardMode::Verpo, false, true),
        variant("no_traj_adv", RewardMode::Verpo, true, false),
        variant("pass_rate", RewardMode::PassRate, true, true),
        variant("difficulty_only", RewardMode::DifficultyOnly, true, true),
        variant("binary", RewardMode::Binary, true, true),
    ]
}

const SELECT_SLOT: u64 = (1 << 24) - 1;
const INITIAL_STEP: u64 = (1 << 40) - 1;

/// Independent random stream for `(seed, step, slot)`.
pub fn substream(seed: u64, step: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((step << 24) | (slot & SELECT_SLOT));
    rng
}

/// Mutable training state: the environment and one policy per problem.
pub struct Trainer {
    config: TrainConfig,
    env: Environment,
    policies: Vec<ToyPolicy>,
    pool: Option<rayon::ThreadPool>,
}

/// Everything computed for one batch.
pub struct BatchOutcome {
    pub groups: Vec<SimGroup>,
    pub rewards: Vec<RewardBundle>,
    pub advantages: Vec<AdvantageBundle>,
    pub metrics: StepMetrics,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let env = config.env.build()?;
        let policies = env
            .problems
            .iter()
            .map(|p| ToyPolicy::new(config.turn_limit, p.test_count(), p.action_count()))
            .collect();
        let pool = if config.workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.workers)
                    .build()
                    .map_err(|e| Error::Infrastructure(format!("building worker pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Trainer {
            config,
            env,
            policies,
            pool,
        })
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn policies(&self) -> &[ToyPolicy] {
        &self.policies
    }

    fn select(&self, step: u64) -> Vec<usize> {
        let count = self.env.problems.len();
        let want = self.config.batch_problems.min(count);
        let mut rng = substream(self.config.seed, step, SELECT_SLOT);
        index::sample(&mut rng, count, want).into_vec()
    }

    fn rollouts(&self, step: u64, chosen: &[usize]) -> Vec<SimGroup> {
        let cfg = &self.config;
        let one = |(slot, &p): (usize, &usize)| {
            let mut rng = substream(cfg.seed, step, slot as u64);
            rollout_group(
                &self.policies[p],
                &self.env.problems[p],
                &format!("s{step}-{}", self.env.problems[p].problem_id),
                cfg.group_size,
                cfg.turn_limit,
                &mut rng,
            )
        };
        match &self.pool {
            Some(pool) => pool.install(|| chosen.par_iter().enumerate().map(one).collect()),
            None => chosen.iter().enumerate().map(one).collect(),
        }
    }

    /// Rolls out and scores one batch without touching the policies.
    pub fn evaluate_batch(&self, step: u64, timer: &mut StageTimer) -> Result<(Vec<usize>, BatchOutcome)> {
        let chosen = self.select(step);
        let groups = timer.time(Stage::Rollout, || self.rollouts(step, &chosen));
        let cfg = &self.config;
        let turn_level = cfg.reward.reward_mode.has_turn_rewards() && cfg.advantage.use_turn;

        let mut rewards = Vec::with_capacity(groups.len());
        for sim in &groups {
            let start = Instant::now();
            let dense = if turn_level {
                reward::dense_turn_rewards(&sim.group, &cfg.reward)?
            } else {
                reward::DenseTurnRewards {
                    turn_rewards: reward::zeros_like(&sim.group),
                    applied_weights: Vec::new(),
                    stats: None,
                }
            };
            let dense_time = start.elapsed();
            let (trajectory_outcomes, decayed_trajectory_rewards) =
                reward::trajectory_rewards(&sim.group, cfg.reward.gamma)?;
            timer.add(Stage::Reward, start.elapsed());
            timer.add(Stage::TurnAdvantage, if turn_level { dense_time } else { Default::default() });
            rewards.push(RewardBundle {
                turn_rewards: dense.turn_rewards,
                trajectory_outcomes,
                decayed_trajectory_rewards,
                applied_weights: dense.applied_weights,
                stats: dense.stats,
            });
        }

        let mut advantages = Vec::with_capacity(groups.len());
        for bundle in &rewards {
            let start = Instant::now();
            let turn = if turn_level {
                advantage::turn_advantages(bundle, &cfg.advantage)
            } else {
                bundle.turn_rewards.iter().map(|t| vec![0.0; t.len()]).collect()
            };
            let turn_time = start.elapsed();
            let traj = if cfg.advantage.use_traj {
                advantage::trajectory_advantages(bundle, &cfg.advantage)
            } else {
                vec![0.0; bundle.decayed_trajectory_rewards.len()]
            };
            let combined = advantage::combine(turn, traj, &cfg.advantage)?;
            timer.add(Stage::Advantage, start.elapsed());
            if turn_level {
                timer.add(Stage::TurnAdvantage, turn_time);
            }
            advantages.push(combined);
        }

        let metrics = batch_metrics(step as usize, &groups, &advantages);
        Ok((
            chosen,
            BatchOutcome {
                groups,
                rewards,
                advantages,
                metrics,
            },
        ))
    }

    /// One training step: evaluate a batch, then update every sampled
    /// problem's policy.
    pub fn step(&mut self, step: usize, timer: &mut StageTimer) -> Result<BatchOutcome> {
        let (chosen, mut outcome) = self.evaluate_batch(step as u64, timer)?;
        let update = self.config.update_config();
        let mut clipped = 0.0;
        let start = Instant::now();
        for ((&p, sim), adv) in chosen.iter().zip(&outcome.groups).zip(&outcome.advantages) {
            let diag = clipped_update(&mut self.policies[p], sim, adv, &update)?;
            clipped += diag.clipped_fraction;
        }
        timer.add(Stage::Update, start.elapsed());
        timer.finish_iteration();
        outcome.metrics.clipped_fraction = clipped / chosen.len().max(1) as f64;
        Ok(outcome)
    }
}

fn batch_metrics(step: usize, groups: &[SimGroup], advantages: &[AdvantageBundle]) -> StepMetrics {
    let mut trajectories = 0usize;
    let mut solved = 0usize;
    let mut solved_turns = 0usize;
    for sim in groups {
        for traj in &sim.group.trajectories {
            trajectories += 1;
            if traj.solved() {
                solved += 1;
                solved_turns += traj.len();
            }
        }
    }
    let degenerate = advantages.iter().filter(|a| a.degenerate).count();
    StepMetrics {
        step,
        solve_rate: if trajectories > 0 { solved as f64 / trajectories as f64 } else { 0.0 },
        degenerate_group_ratio: if advantages.is_empty() {
            0.0
        } else {
            degenerate as f64 / advantages.len() as f64
        },
        mean_turns_to_solve: (solved > 0).then(|| solved_turns as f64 / solved as f64),
        clipped_fraction: 0.0,
    }
}

/// Runs `config.steps` training steps and records per-step metrics.
pub fn train(config: &TrainConfig) -> Result<TrainRun> {
    let mut trainer = Trainer::new(config.clone())?;
    let mut timer = StageTimer::new();
    let (_, initial) = trainer.evaluate_batch(INITIAL_STEP, &mut StageTimer::new())?;
    let mut initial = initial.metrics;
    initial.step = 0;
    let mut steps = Vec::with_capacity(config.steps);
    for step in 1..=config.steps {
        steps.push(trainer.step(step, &mut timer)?.metrics);
    }
    Ok(TrainRun {
        label: config.label.clone(),
        seed: config.seed,
        initial,
        steps,
        timing: timing_breakdown(&timer),
    })
}
