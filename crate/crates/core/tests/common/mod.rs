//! Shared test support: a literal, independently written transcription of
//! the reward and advantage formulas, and random group generators.
//!
//! The oracle deliberately avoids every shortcut the library takes: no
//! level deduplication, no early exits for identical values, plain nested
//! loops over raw pass vectors.

#![allow(dead_code)]

pub mod golden;
pub mod props;

use passweight::advantage::{AdvantageParams, NormMode};
use passweight::problem::{RolloutGroup, TrajectoryRecord, TurnRecord};
use passweight::reward::{RewardMode, RewardParams};
use rand::Rng;

/// `passes[i][t][j]`: trajectory i, turn t, test j.
pub type Passes = Vec<Vec<Vec<bool>>>;

#[derive(Debug, Clone)]
pub struct OracleOut {
    pub pass_rates: Vec<f64>,
    pub raw_weights: Vec<f64>,
    pub densities: Vec<f64>,
    pub normalized_weights: Vec<f64>,
    pub turn_rewards: Vec<Vec<f64>>,
    pub outcomes: Vec<bool>,
    pub decayed: Vec<f64>,
    pub turn_adv: Vec<Vec<f64>>,
    pub traj_adv: Vec<f64>,
    pub combined: Vec<Vec<f64>>,
}

fn mean(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

fn pop_std(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    let mut s = 0.0;
    for x in xs {
        s += (x - mu) * (x - mu);
    }
    (s / xs.len() as f64).sqrt()
}

fn normalize(xs: &[f64], mode: NormMode, floor: f64) -> Vec<f64> {
    // Equal values center to exact zeros in either mode.
    if xs.iter().all(|&x| x == xs[0]) {
        return vec![0.0; xs.len()];
    }
    let mu = mean(xs);
    let z = match mode {
        NormMode::ConstOne => 1.0,
        NormMode::Std => pop_std(xs).max(floor),
    };
    xs.iter().map(|x| (x - mu) / z).collect()
}

pub fn oracle(passes: &Passes, rp: &RewardParams, ap: &AdvantageParams) -> OracleOut {
    let m = passes[0][0].len();
    let mut total_turns = 0usize;
    for traj in passes {
        total_turns += traj.len();
    }

    // Pass rate of each test over every turn of every trajectory.
    let mut pass_rates = vec![0.0; m];
    for j in 0..m {
        let mut count = 0usize;
        for traj in passes {
            for turn in traj {
                if turn[j] {
                    count += 1;
                }
            }
        }
        pass_rates[j] = count as f64 / total_turns as f64;
    }

    let raw_weights: Vec<f64> = pass_rates.iter().map(|r| (-rp.alpha * r).exp()).collect();

    let sigma = pop_std(&pass_rates) / 2.0;
    let mut densities = vec![0.0; m];
    for j in 0..m {
        if sigma == 0.0 {
            densities[j] = m as f64;
            continue;
        }
        let mut s = 0.0;
        for k in 0..m {
            let d = pass_rates[j] - pass_rates[k];
            s += (-(d * d) / (2.0 * sigma * sigma)).exp();
        }
        densities[j] = s;
    }

    let normalized_weights: Vec<f64> = (0..m)
        .map(|j| raw_weights[j] / (densities[j] + rp.kde_epsilon))
        .collect();

    let weights: Vec<f64> = match rp.reward_mode {
        RewardMode::Verpo => normalized_weights.clone(),
        RewardMode::DifficultyOnly => raw_weights.clone(),
        RewardMode::PassRate => vec![1.0 / m as f64; m],
        RewardMode::Binary => vec![0.0; m],
    };

    let mut turn_rewards = Vec::new();
    for traj in passes {
        let mut row = Vec::new();
        for turn in traj {
            let mut r = 0.0;
            for j in 0..m {
                if turn[j] {
                    r += weights[j];
                }
            }
            row.push(r);
        }
        turn_rewards.push(row);
    }

    let mut outcomes = Vec::new();
    let mut decayed = Vec::new();
    for traj in passes {
        let last = traj.last().unwrap();
        let solved = last.iter().all(|&p| p);
        outcomes.push(solved);
        let r = if solved { 1.0 } else { 0.0 };
        decayed.push(r * rp.gamma.powi(traj.len() as i32));
    }

    let use_turn = ap.use_turn && rp.reward_mode != RewardMode::Binary;
    let pooled: Vec<f64> = turn_rewards.iter().flatten().copied().collect();
    let pooled_adv = normalize(&pooled, ap.norm_mode, ap.std_floor);
    let mut turn_adv = Vec::new();
    let mut at = 0;
    for traj in passes {
        let mut row = Vec::new();
        for _ in traj {
            row.push(if use_turn { pooled_adv[at] } else { 0.0 });
            at += 1;
        }
        turn_adv.push(row);
    }

    let traj_adv: Vec<f64> = if ap.use_traj {
        normalize(&decayed, ap.norm_mode, ap.std_floor)
    } else {
        vec![0.0; passes.len()]
    };

    let mut combined = Vec::new();
    for i in 0..passes.len() {
        let mut row = Vec::new();
        for t in 0..passes[i].len() {
            row.push(traj_adv[i] + ap.beta * turn_adv[i][t]);
        }
        combined.push(row);
    }

    OracleOut {
        pass_rates,
        raw_weights,
        densities,
        normalized_weights,
        turn_rewards,
        outcomes,
        decayed,
        turn_adv,
        traj_adv,
        combined,
    }
}

/// Normwise error `max|a - b| / max(max|b|, 1)`: relative for values of
/// size one or more, absolute below that.
pub fn norm_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    let mut diff = 0.0f64;
    let mut scale = 1.0f64;
    for (x, y) in a.iter().zip(b) {
        diff = diff.max((x - y).abs());
        scale = scale.max(y.abs());
    }
    diff / scale
}

pub fn nested_err(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len(), "trajectory count mismatch");
    let fa: Vec<f64> = a.iter().flatten().copied().collect();
    let fb: Vec<f64> = b.iter().flatten().copied().collect();
    assert!(a.iter().zip(b).all(|(x, y)| x.len() == y.len()), "turn count mismatch");
    norm_err(&fa, &fb)
}

pub fn to_group(passes: &Passes, turn_limit: usize) -> RolloutGroup {
    RolloutGroup {
        problem_id: "p".into(),
        group_id: "g".into(),
        trajectories: passes
            .iter()
            .enumerate()
            .map(|(i, turns)| TrajectoryRecord {
                problem_id: "p".into(),
                trajectory_id: format!("t{i}"),
                turns: turns
                    .iter()
                    .enumerate()
                    .map(|(t, p)| TurnRecord::new(t + 1, p.clone()))
                    .collect(),
                turn_limit,
            })
            .collect(),
    }
}

/// Random group with `n` trajectories of 1..=`turn_limit` turns over `m`
/// tests. Tests get their own pass probability so that difficulties spread
/// out; a trajectory stops early only on a full pass, like a real rollout.
pub fn random_passes(rng: &mut impl Rng, n: usize, m: usize, turn_limit: usize) -> Passes {
    let shape: u8 = rng.gen_range(0..4);
    let probs: Vec<f64> = (0..m)
        .map(|_| match shape {
            0 => rng.gen::<f64>(),
            1 => {
                if rng.gen_bool(0.8) {
                    0.95
                } else {
                    0.1
                }
            }
            2 => [0.0, 0.5, 1.0][rng.gen_range(0..3)],
            _ => rng.gen::<f64>().powi(3),
        })
        .collect();
    (0..n)
        .map(|_| {
            let mut turns = Vec::new();
            for t in 0..turn_limit {
                let passes: Vec<bool> = probs.iter().map(|&p| rng.gen_bool(p)).collect();
                let full = passes.iter().all(|&p| p);
                turns.push(passes);
                if full || (t + 1 < turn_limit && rng.gen_bool(0.2)) {
                    break;
                }
            }
            turns
        })
        .collect()
}

pub fn random_params(rng: &mut impl Rng) -> (RewardParams, AdvantageParams) {
    let mode = match rng.gen_range(0..10) {
        0 => RewardMode::PassRate,
        1 => RewardMode::DifficultyOnly,
        2 => RewardMode::Binary,
        _ => RewardMode::Verpo,
    };
    let rp = RewardParams {
        alpha: rng.gen_range(0.25..4.0),
        gamma: if rng.gen_bool(0.2) { 1.0 } else { rng.gen_range(0.5..1.0) },
        reward_mode: mode,
        ..Default::default()
    };
    let ap = AdvantageParams {
        beta: rng.gen_range(0.0..2.0),
        norm_mode: if rng.gen_bool(0.5) { NormMode::ConstOne } else { NormMode::Std },
        use_turn: rng.gen_bool(0.9),
        use_traj: rng.gen_bool(0.9),
        ..Default::default()
    };
    (rp, ap)
}

/// Largest deviation between library and oracle over every quantity.
pub fn compare_with_oracle(passes: &Passes, rp: &RewardParams, ap: &AdvantageParams) -> f64 {
    let group = to_group(passes, 4);
    let bundle = passweight::reward::compute_rewards(&group, rp).expect("compute_rewards");
    let adv = passweight::advantage::combined_advantages(&bundle, ap).expect("combined_advantages");
    let o = oracle(passes, rp, ap);

    assert_eq!(bundle.trajectory_outcomes, o.outcomes);
    let mut worst = nested_err(&bundle.turn_rewards, &o.turn_rewards)
        .max(norm_err(&bundle.decayed_trajectory_rewards, &o.decayed))
        .max(nested_err(&adv.turn_advantages, &o.turn_adv))
        .max(norm_err(&adv.trajectory_advantages, &o.traj_adv))
        .max(nested_err(&adv.combined, &o.combined));
    if let Some(stats) = &bundle.stats {
        worst = worst
            .max(norm_err(&stats.pass_rates, &o.pass_rates))
            .max(norm_err(&stats.raw_weights, &o.raw_weights))
            .max(norm_err(&stats.densities, &o.densities))
            .max(norm_err(&stats.normalized_weights, &o.normalized_weights));
    }
    let oracle_degenerate = o.combined.iter().flatten().all(|a| a.abs() <= 1e-12);
    assert_eq!(adv.degenerate, oracle_degenerate, "degenerate flag disagrees");
    worst
}
