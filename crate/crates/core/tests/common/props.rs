//! Property checks shared by the proptest suites and the acceptance loops.
//! Each returns `Err` describing the first violation.

use passweight::advantage::{combined_advantages, AdvantageParams, NormMode};
use passweight::reward::{compute_rewards, turn_rewards, RewardBundle, RewardMode, RewardParams};
use passweight::sim::{rollout_group, surrogate, ClipRange, SyntheticProblem, ToyPolicy};
use rand::Rng;

use super::{to_group, Passes};

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Flipping one failing test to passing, weights held fixed, strictly
/// raises that turn's reward and leaves every other turn alone; a full pass
/// earns exactly the sum of the weights.
pub fn monotone_under_flips(passes: &Passes, rp: &RewardParams, pick: (usize, usize, usize)) -> Check {
    let group = to_group(passes, 4);
    let bundle = compute_rewards(&group, rp).map_err(|e| e.to_string())?;
    if !rp.reward_mode.has_turn_rewards() {
        return Ok(());
    }
    let w = &bundle.applied_weights;
    let before = turn_rewards(&group, w).map_err(|e| e.to_string())?;
    let i = pick.0 % passes.len();
    let t = pick.1 % passes[i].len();
    let m = w.len();
    let mut flipped = passes.clone();
    let Some(j) = (0..m).map(|k| (pick.2 + k) % m).find(|&j| !flipped[i][t][j]) else {
        return Ok(());
    };
    flipped[i][t][j] = true;
    let after = turn_rewards(&to_group(&flipped, 4), w).map_err(|e| e.to_string())?;
    ensure(after[i][t] > before[i][t], || {
        format!("flip ({i},{t},{j}) did not raise reward: {} -> {}", before[i][t], after[i][t])
    })?;
    for (ii, (ra, rb)) in after.iter().zip(&before).enumerate() {
        for (tt, (a, b)) in ra.iter().zip(rb).enumerate() {
            if (ii, tt) != (i, t) && a.to_bits() != b.to_bits() {
                return Err(format!("flip at ({i},{t}) changed the reward of ({ii},{tt})"));
            }
        }
    }
    let total: f64 = w.iter().sum();
    let full = turn_rewards(&to_group(&vec![vec![vec![true; m]]], 4), w).map_err(|e| e.to_string())?;
    ensure((full[0][0] - total).abs() <= 1e-12 * total.max(1.0), || "full pass is not the weight sum".into())?;
    for r in before.iter().flatten() {
        ensure(*r <= total * (1.0 + 1e-12), || format!("turn reward {r} above maximum {total}"))?;
    }
    Ok(())
}

fn rewards_bundle(turns: Vec<Vec<f64>>, decayed: Vec<f64>) -> RewardBundle {
    RewardBundle {
        trajectory_outcomes: decayed.iter().map(|&d| d > 0.0).collect(),
        turn_rewards: turns,
        decayed_trajectory_rewards: decayed,
        applied_weights: Vec::new(),
        stats: None,
    }
}

fn pop_std(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Smallest non-zero standard deviation among the two centering pools.
fn min_spread(bundle: &RewardBundle) -> f64 {
    let pooled: Vec<f64> = bundle.turn_rewards.iter().flatten().copied().collect();
    [pop_std(&pooled), pop_std(&bundle.decayed_trajectory_rewards)]
        .into_iter()
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min)
}

/// Rounding bound on the sum of centered values: the centering error is
/// about `n * eps * max|x|`, then divided by the normalizer, which in std
/// mode can be as small as the floor.
fn centering_tolerance(xs: &[f64], ap: &AdvantageParams) -> f64 {
    let divisor = match ap.norm_mode {
        NormMode::ConstOne => 1.0,
        NormMode::Std => pop_std(xs).max(ap.std_floor),
    };
    let mag = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    (4.0 * f64::EPSILON * xs.len() as f64 * mag / divisor).max(1e-12)
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Mean-zero at both levels, invariance under a common shift, and the
/// documented behavior under positive scaling.
pub fn advantage_invariants(passes: &Passes, rp: &RewardParams, ap: &AdvantageParams, shift: f64, scale: f64) -> Check {
    let group = to_group(passes, 4);
    let bundle = compute_rewards(&group, rp).map_err(|e| e.to_string())?;
    let adv = combined_advantages(&bundle, ap).map_err(|e| e.to_string())?;

    let pooled: Vec<f64> = bundle.turn_rewards.iter().flatten().copied().collect();
    let turn_sum: f64 = adv.turn_advantages.iter().flatten().sum();
    let traj_sum: f64 = adv.trajectory_advantages.iter().sum();
    let turn_tol = centering_tolerance(&pooled, ap);
    let traj_tol = centering_tolerance(&bundle.decayed_trajectory_rewards, ap);
    ensure(turn_sum.abs() <= turn_tol, || format!("turn advantages sum to {turn_sum:e} (tolerance {turn_tol:e})"))?;
    ensure(traj_sum.abs() <= traj_tol, || format!("trajectory advantages sum to {traj_sum:e} (tolerance {traj_tol:e})"))?;

    if ap.norm_mode == NormMode::Std && ap.use_turn && pop_std(&pooled) > 1e-6 {
        let a: Vec<f64> = adv.turn_advantages.iter().flatten().copied().collect();
        let s = (a.iter().map(|x| x * x).sum::<f64>() / a.len() as f64).sqrt();
        ensure((s - 1.0).abs() <= 1e-9, || format!("std-mode turn advantages have std {s}"))?;
    }

    let shifted = rewards_bundle(
        bundle.turn_rewards.iter().map(|t| t.iter().map(|r| r + shift).collect()).collect(),
        bundle.decayed_trajectory_rewards.iter().map(|r| r + shift).collect(),
    );
    let adv_shift = combined_advantages(&shifted, ap).map_err(|e| e.to_string())?;
    // Rounding of the shifted values is amplified by the std divisor.
    let spread = match ap.norm_mode {
        NormMode::ConstOne => 1.0,
        NormMode::Std => min_spread(&bundle),
    };
    if spread > 1e-6 {
        let tol = 1e-13 * (1.0 + shift.abs()) * (1.0 + ap.beta) / spread.min(1.0);
        let d = max_abs_diff(&adv.combined, &adv_shift.combined);
        ensure(d <= tol, || format!("shift by {shift} moved advantages by {d:e}"))?;
    }

    let scaled = rewards_bundle(
        bundle.turn_rewards.iter().map(|t| t.iter().map(|r| r * scale).collect()).collect(),
        bundle.decayed_trajectory_rewards.iter().map(|r| r * scale).collect(),
    );
    let adv_scale = combined_advantages(&scaled, ap).map_err(|e| e.to_string())?;
    let expected: Vec<Vec<f64>> = match ap.norm_mode {
        NormMode::ConstOne => adv.combined.iter().map(|t| t.iter().map(|a| a * scale).collect()).collect(),
        NormMode::Std => adv.combined.clone(),
    };
    let mag = expected.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
    let d = max_abs_diff(&adv_scale.combined, &expected);
    let tol = if ap.norm_mode == NormMode::Std { 1e-6 } else { 1e-12 } * mag;
    ensure(d <= tol, || format!("scaling by {scale} gave deviation {d:e}"))?;
    Ok(())
}

/// Range bounds on pass rates, weights and densities.
pub fn statistic_bounds(passes: &Passes, rp: &RewardParams) -> Check {
    let rp = RewardParams {
        reward_mode: RewardMode::Verpo,
        ..*rp
    };
    let bundle = compute_rewards(&to_group(passes, 4), &rp).map_err(|e| e.to_string())?;
    let stats = bundle.stats.ok_or("verpo mode produced no statistics")?;
    let m = stats.pass_rates.len() as f64;
    let w_max = 1.0 / (1.0 + rp.kde_epsilon);
    for j in 0..stats.pass_rates.len() {
        let (r, w, d, wn) = (
            stats.pass_rates[j],
            stats.raw_weights[j],
            stats.densities[j],
            stats.normalized_weights[j],
        );
        ensure((0.0..=1.0).contains(&r), || format!("pass rate {r} out of [0, 1]"))?;
        ensure(w > 0.0 && w <= 1.0, || format!("weight {w} out of (0, 1]"))?;
        ensure(d >= 1.0 - 1e-12 && d <= m * (1.0 + 1e-12), || format!("density {d} out of [1, {m}]"))?;
        ensure(wn > 0.0 && wn <= w_max, || format!("normalized weight {wn} out of (0, {w_max}]"))?;
    }
    for a in 0..stats.pass_rates.len() {
        for b in 0..stats.pass_rates.len() {
            if stats.pass_rates[a] < stats.pass_rates[b] {
                ensure(stats.raw_weights[a] > stats.raw_weights[b], || "weights not strictly decreasing in pass rate".into())?;
            }
        }
    }
    Ok(())
}

/// With no decay the decayed reward is the bare outcome.
pub fn undecayed_equals_outcome(passes: &Passes, rp: &RewardParams) -> Check {
    let rp = RewardParams { gamma: 1.0, ..*rp };
    let bundle = compute_rewards(&to_group(passes, 4), &rp).map_err(|e| e.to_string())?;
    for (o, r) in bundle.trajectory_outcomes.iter().zip(&bundle.decayed_trajectory_rewards) {
        let expect: f64 = if *o { 1.0 } else { 0.0 };
        ensure(r.to_bits() == expect.to_bits(), || format!("gamma = 1 gave {r} for outcome {o}"))?;
    }
    Ok(())
}

/// Analytic surrogate gradient against central differences on a random
/// small instance, with the current policy perturbed away from the sampling
/// policy but inside the clip range. Returns the normwise relative error.
pub fn gradient_vs_finite_difference(rng: &mut impl Rng) -> f64 {
    let m = rng.gen_range(1..=4);
    let k = rng.gen_range(2..=5);
    let turn_limit = rng.gen_range(1..=3);
    let candidates: Vec<Vec<bool>> = (0..k).map(|_| (0..m).map(|_| rng.gen_bool(0.5)).collect()).collect();
    let problem = SyntheticProblem::new("fd", candidates, 0.0).unwrap();
    let mut old = ToyPolicy::new(turn_limit, m, k);
    for l in old.logits_mut() {
        *l = rng.gen_range(-1.0..1.0);
    }
    let sim = rollout_group(&old, &problem, "g", rng.gen_range(2..=6), turn_limit, rng);
    let advantages: Vec<Vec<f64>> = sim
        .steps
        .iter()
        .map(|s| s.iter().map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut policy = old.clone();
    for l in policy.logits_mut() {
        *l += rng.gen_range(-0.03..0.03);
    }
    let clip = ClipRange::default();
    let (_, grad, _) = surrogate(&policy, &sim, &advantages, &clip).unwrap();
    let h = 1e-6;
    let mut fd = vec![0.0; grad.len()];
    for (idx, slot) in fd.iter_mut().enumerate() {
        let mut plus = policy.clone();
        plus.logits_mut()[idx] += h;
        let mut minus = policy.clone();
        minus.logits_mut()[idx] -= h;
        let jp = surrogate(&plus, &sim, &advantages, &clip).unwrap().0;
        let jm = surrogate(&minus, &sim, &advantages, &clip).unwrap().0;
        *slot = (jp - jm) / (2.0 * h);
    }
    let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = fd.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-8);
    diff / scale
}

/// Random small group and parameters for property loops.
pub fn small_case(rng: &mut impl Rng) -> (Passes, RewardParams, AdvantageParams) {
    let n = rng.gen_range(2..=16);
    let m = rng.gen_range(1..=40);
    let t = rng.gen_range(1..=4);
    let passes = super::random_passes(rng, n, m, t);
    let (rp, ap) = super::random_params(rng);
    (passes, rp, ap)
}
