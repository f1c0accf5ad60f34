use rand::Rng;

use crate::problem::{RolloutGroup, TrajectoryRecord, TurnRecord};
use crate::sim::env::SyntheticProblem;
use crate::sim::policy::{State, ToyPolicy};

/// One sampled turn, kept for the importance ratio of later updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnStep {
    pub row: usize,
    pub action: usize,
    /// Log-probability of `action` under the sampling policy.
    pub old_log_prob: f64,
}

/// A rollout group together with the sampling record of every turn.
#[derive(Debug, Clone, PartialEq)]
pub struct SimGroup {
    pub group: RolloutGroup,
    /// Aligned with `group.trajectories[i].turns[t]`.
    pub steps: Vec<Vec<TurnStep>>,
}

impl SimGroup {
    pub fn total_turns(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }
}

/// Samples `n` trajectories of at most `turn_limit` turns. A trajectory
/// ends on its first full pass.
pub fn rollout_group(
    policy: &ToyPolicy,
    problem: &SyntheticProblem,
    group_id: &str,
    n: usize,
    turn_limit: usize,
    rng: &mut impl Rng,
) -> SimGroup {
    let turn_limit = turn_limit.min(policy.turn_limit());
    let mut trajectories = Vec::with_capacity(n);
    let mut steps = Vec::with_capacity(n);
    for i in 0..n {
        let mut state = State::initial();
        let mut turns = Vec::new();
        let mut traj_steps = Vec::new();
        loop {
            let (action, old_log_prob) = policy.sample(state, rng);
            let passes = problem.execute(action, rng);
            let solved = passes.iter().all(|&p| p);
            traj_steps.push(TurnStep {
                row: policy.row(state),
                action,
                old_log_prob,
            });
            let next = state.after(&passes);
            turns.push(TurnRecord::new(state.turn, passes));
            if solved || state.turn == turn_limit {
                break;
            }
            state = next;
        }
        trajectories.push(TrajectoryRecord {
            problem_id: problem.problem_id.clone(),
            trajectory_id: format!("{group_id}-{i}"),
            turns,
            turn_limit,
        });
        steps.push(traj_steps);
    }
    SimGroup {
        group: RolloutGroup {
            problem_id: problem.problem_id.clone(),
            group_id: group_id.to_string(),
            trajectories,
        },
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn problem() -> SyntheticProblem {
        SyntheticProblem::new(
            "p",
            vec![vec![true, true], vec![false, false], vec![true, false]],
            0.0,
        )
        .unwrap()
    }

    fn forced(action: usize) -> ToyPolicy {
        let mut p = ToyPolicy::new(3, 2, 3);
        for row in 0..p.row_count() {
            p.row_logits_mut(row)[action] = 60.0;
        }
        p
    }

    #[test]
    fn full_pass_policy_stops_after_one_turn() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = rollout_group(&forced(0), &problem(), "g", 5, 3, &mut rng);
        assert!(g.group.trajectories.iter().all(|t| t.len() == 1 && t.solved()));
    }

    #[test]
    fn failing_policy_runs_to_the_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = rollout_group(&forced(1), &problem(), "g", 5, 3, &mut rng);
        assert!(g.group.trajectories.iter().all(|t| t.len() == 3 && !t.solved()));
        assert_eq!(g.total_turns(), 15);
    }

    #[test]
    fn fixed_seed_reproduces_group() {
        let policy = ToyPolicy::new(3, 2, 3);
        let a = rollout_group(&policy, &problem(), "g", 8, 3, &mut ChaCha8Rng::seed_from_u64(9));
        let b = rollout_group(&policy, &problem(), "g", 8, 3, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn records_states_and_log_probs() {
        let policy = ToyPolicy::new(3, 2, 3);
        let g = rollout_group(&policy, &problem(), "g", 6, 3, &mut ChaCha8Rng::seed_from_u64(4));
        for (traj, steps) in g.group.trajectories.iter().zip(&g.steps) {
            assert_eq!(traj.len(), steps.len());
            assert_eq!(steps[0].row, policy.row(State::initial()));
            for s in steps {
                assert!((s.old_log_prob - (1.0f64 / 3.0).ln()).abs() < 1e-12);
            }
        }
    }
}
