//! Tabular softmax policy over candidate programs.
//!
//! The state is the turn number plus a coarse view of the previous turn's
//! feedback: the index of the first failing test (nothing at turn 1).

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct State {
    /// 1-based turn number.
    pub turn: usize,
    /// First failing test of the previous turn; `None` at turn 1.
    pub first_failure: Option<usize>,
}

impl State {
    pub fn initial() -> Self {
        State {
            turn: 1,
            first_failure: None,
        }
    }

    /// State reached after a failed turn with pass vector `passes`.
    pub fn after(self, passes: &[bool]) -> Self {
        State {
            turn: self.turn + 1,
            first_failure: passes.iter().position(|&p| !p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy {
    turn_limit: usize,
    test_count: usize,
    actions: usize,
    /// Row-major `[turn][bucket][action]`; bucket 0 is "no feedback yet",
    /// bucket `j + 1` is "first failure at test j".
    logits: Vec<f64>,
}

impl ToyPolicy {
    /// Uniform policy.
    pub fn new(turn_limit: usize, test_count: usize, actions: usize) -> Self {
        let rows = turn_limit * (test_count + 1);
        ToyPolicy {
            turn_limit,
            test_count,
            actions,
            logits: vec![0.0; rows * actions],
        }
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn turn_limit(&self) -> usize {
        self.turn_limit
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn row_count(&self) -> usize {
        self.logits.len() / self.actions
    }

    /// Row index of a state in the logit table.
    pub fn row(&self, state: State) -> usize {
        debug_assert!(state.turn >= 1 && state.turn <= self.turn_limit);
        let bucket = state.first_failure.map_or(0, |j| j + 1);
        debug_assert!(bucket <= self.test_count);
        (state.turn - 1) * (self.test_count + 1) + bucket
    }

    pub fn row_logits(&self, row: usize) -> &[f64] {
        &self.logits[row * self.actions..(row + 1) * self.actions]
    }

    pub fn row_logits_mut(&mut self, row: usize) -> &mut [f64] {
        let a = self.actions;
        &mut self.logits[row * a..(row + 1) * a]
    }

    /// Action probabilities in `row`.
    pub fn probs(&self, row: usize) -> Vec<f64> {
        softmax(self.row_logits(row))
    }

    pub fn log_prob(&self, row: usize, action: usize) -> f64 {
        log_softmax_at(self.row_logits(row), action)
    }

    /// Samples an action in `state`; returns it with its log-probability.
    pub fn sample(&self, state: State, rng: &mut impl Rng) -> (usize, f64) {
        let row = self.row(state);
        let probs = self.probs(row);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut action = probs.len() - 1;
        for (k, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                action = k;
                break;
            }
        }
        (action, self.log_prob(row, action))
    }

    pub fn all_finite(&self) -> bool {
        self.logits.iter().all(|l| l.is_finite())
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn log_softmax_at(logits: &[f64], k: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits[k] - lse
}
