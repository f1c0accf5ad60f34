use passweight::advantage::{combined_advantages, AdvantageBundle};
use passweight::interchange::{assemble_groups, trajectory_lines};
use passweight::problem::{validate_group_shape, Severity};
use passweight::reward::{compute_rewards, RewardMode, RewardParams};
use passweight::sim::{
    ablation_configs, clipped_update, reference_config, reference_env, rollout_group, surrogate, train, ClipRange,
    GeneratedEnv, SyntheticProblem, ToyPolicy, TrainConfig, Trainer, UpdateConfig,
};
use passweight::metrics::StageTimer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn short(label: &str, steps: usize) -> TrainConfig {
    ablation_configs()
        .into_iter()
        .find(|c| c.label == label)
        .map(|c| TrainConfig { steps, ..c })
        .unwrap()
}

#[test]
fn worker_count_does_not_change_metrics() {
    let one = train(&short("verpo", 12)).unwrap();
    let four = train(&TrainConfig {
        workers: 4,
        ..short("verpo", 12)
    })
    .unwrap();
    assert_eq!(one.steps, four.steps);
    assert_eq!(one.initial, four.initial);
}

#[test]
fn rollouts_respect_turn_limit_and_termination() {
    let cfg = reference_config();
    let trainer = Trainer::new(cfg.clone()).unwrap();
    let (_, out) = trainer.evaluate_batch(3, &mut StageTimer::new()).unwrap();
    for sim in &out.groups {
        let m = sim.group.test_count().unwrap();
        let hard: Vec<_> = validate_group_shape(&sim.group, &sim.group.problem_id, m)
            .into_iter()
            .filter(|v| v.severity() == Severity::Error)
            .collect();
        assert!(hard.is_empty(), "{hard:?}");
        for traj in &sim.group.trajectories {
            assert!(traj.len() <= cfg.turn_limit);
            let full: Vec<usize> = traj.turns.iter().enumerate().filter(|(_, t)| t.is_full_pass()).map(|(i, _)| i).collect();
            assert!(full.is_empty() || full == vec![traj.len() - 1]);
        }
    }
}

#[test]
fn first_step_gradient_is_plain_policy_gradient() {
    let problem = SyntheticProblem::new("p", vec![vec![true, false], vec![false, false], vec![true, true]], 0.0).unwrap();
    let mut policy = ToyPolicy::new(3, 2, 3);
    policy.logits_mut().iter_mut().enumerate().for_each(|(i, l)| *l = (i as f64 * 0.37).sin());
    let sim = rollout_group(&policy, &problem, "g", 6, 3, &mut ChaCha8Rng::seed_from_u64(2));
    let bundle = compute_rewards(&sim.group, &RewardParams::default()).unwrap();
    let adv = combined_advantages(&bundle, &Default::default()).unwrap();
    let (_, grad, clipped) = surrogate(&policy, &sim, &adv.combined, &ClipRange::default()).unwrap();
    assert_eq!(clipped, 0);

    let k = policy.actions();
    let mut plain = vec![0.0; grad.len()];
    let total = sim.total_turns() as f64;
    for (steps, advs) in sim.steps.iter().zip(&adv.combined) {
        for (s, a) in steps.iter().zip(advs) {
            let p = policy.probs(s.row);
            for b in 0..k {
                let onehot = if b == s.action { 1.0 } else { 0.0 };
                plain[s.row * k + b] += a * (onehot - p[b]) / total;
            }
        }
    }
    for (g, p) in grad.iter().zip(&plain) {
        assert!((g - p).abs() <= 1e-14, "{g} vs {p}");
    }
}

#[test]
fn degenerate_groups_leave_policy_untouched() {
    let problem = SyntheticProblem::new("p", vec![vec![false; 3], vec![false; 3]], 0.0).unwrap();
    for mode in [RewardMode::Verpo, RewardMode::PassRate, RewardMode::DifficultyOnly, RewardMode::Binary] {
        let mut policy = ToyPolicy::new(2, 3, 2);
        let before = policy.clone();
        let sim = rollout_group(&policy, &problem, "g", 5, 2, &mut ChaCha8Rng::seed_from_u64(1));
        let rp = RewardParams {
            reward_mode: mode,
            ..Default::default()
        };
        let bundle = compute_rewards(&sim.group, &rp).unwrap();
        let adv: AdvantageBundle = combined_advantages(&bundle, &Default::default()).unwrap();
        assert!(adv.degenerate, "{mode:?}");
        let (_, grad, _) = surrogate(&policy, &sim, &adv.combined, &ClipRange::default()).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
        let update = UpdateConfig {
            learning_rate: 1.0,
            clip: ClipRange::default(),
            epochs: 3,
        };
        clipped_update(&mut policy, &sim, &adv, &update).unwrap();
        assert_eq!(policy, before);
    }
}

#[test]
fn probabilities_stay_normalized_through_training() {
    let mut trainer = Trainer::new(TrainConfig {
        learning_rate: 25.0,
        update_epochs: 2,
        ..short("verpo", 0)
    })
    .unwrap();
    let mut timer = StageTimer::new();
    for step in 1..=8 {
        trainer.step(step, &mut timer).unwrap();
    }
    for policy in trainer.policies() {
        assert!(policy.all_finite());
        for row in 0..policy.row_count() {
            let s: f64 = policy.probs(row).iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn reference_environment_shape() {
    let env = reference_env().build().unwrap();
    assert_eq!(env.problems.len(), 128);
    for p in &env.problems {
        assert_eq!(p.test_count(), 52);
        assert_eq!(p.action_count(), 100);
        assert!(p.has_partial_success());
    }
    let g = GeneratedEnv {
        problems: 2,
        ..reference_env()
    };
    assert_eq!(g.build().unwrap().problems[0], env.problems[0]);
}

#[test]
fn dense_rewards_are_less_degenerate_early_on() {
    let verpo = train(&short("verpo", 30)).unwrap();
    let binary = train(&short("binary", 30)).unwrap();
    assert!(binary.mean_degenerate_ratio() > 0.4, "{}", binary.mean_degenerate_ratio());
    assert!(verpo.mean_degenerate_ratio() < 0.1, "{}", verpo.mean_degenerate_ratio());
}

#[test]
fn trajectory_lines_round_trip() {
    let trainer = Trainer::new(short("verpo", 0)).unwrap();
    let (_, out) = trainer.evaluate_batch(1, &mut StageTimer::new()).unwrap();
    let groups: Vec<_> = out.groups.iter().map(|s| s.group.clone()).collect();
    let lines: Vec<_> = groups.iter().flat_map(trajectory_lines).collect();
    let back = assemble_groups(lines, Some(4)).unwrap();
    assert_eq!(back, groups);
}
