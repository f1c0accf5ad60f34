//! Problems, test suites, trajectories and rollout groups.
//!
//! Index `j` in every pass vector refers to the position of the test in
//! [`Problem::tests`]; that order is fixed at load time and never changes.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Suites with at most this many tests count as sparse in [`DatasetStats`].
pub const SPARSE_TEST_THRESHOLD: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitTest {
    pub test_id: String,
    /// Fed to the candidate's standard input.
    pub input: String,
    /// Compared against the candidate's standard output.
    #[serde(rename = "output")]
    pub expected_output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub problem_id: String,
    #[serde(default)]
    pub prompt: String,
    pub tests: Vec<UnitTest>,
}

impl Problem {
    /// Builds a problem, rejecting empty suites and duplicate test ids.
    pub fn new(problem_id: impl Into<String>, prompt: impl Into<String>, tests: Vec<UnitTest>) -> Result<Self> {
        let problem = Problem {
            problem_id: problem_id.into(),
            prompt: prompt.into(),
            tests,
        };
        problem.check()?;
        Ok(problem)
    }

    pub fn test_count(&self) -> usize {
        self.tests.len()
    }

    fn check(&self) -> Result<()> {
        if self.tests.is_empty() {
            return Err(Error::Validation {
                problem_id: self.problem_id.clone(),
                message: "test suite is empty".into(),
            });
        }
        let mut seen = HashSet::with_capacity(self.tests.len());
        for t in &self.tests {
            if !seen.insert(t.test_id.as_str()) {
                return Err(Error::Validation {
                    problem_id: self.problem_id.clone(),
                    message: format!("duplicate test_id `{}`", t.test_id),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    /// 1-based.
    pub turn_index: usize,
    pub passes: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

impl TurnRecord {
    pub fn new(turn_index: usize, passes: Vec<bool>) -> Self {
        TurnRecord {
            turn_index,
            passes,
            wall_time_ms: None,
        }
    }

    pub fn is_full_pass(&self) -> bool {
        !self.passes.is_empty() && self.passes.iter().all(|&p| p)
    }

    pub fn passed_count(&self) -> usize {
        self.passes.iter().filter(|&&p| p).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub problem_id: String,
    pub trajectory_id: String,
    pub turns: Vec<TurnRecord>,
    pub turn_limit: usize,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// True when the final turn passes the whole suite.
    pub fn solved(&self) -> bool {
        self.turns.last().is_some_and(TurnRecord::is_full_pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub problem_id: String,
    pub group_id: String,
    pub trajectories: Vec<TrajectoryRecord>,
}

impl RolloutGroup {
    /// Total number of executed turns, `sum_i |tau_i|`.
    pub fn total_turns(&self) -> usize {
        self.trajectories.iter().map(TrajectoryRecord::len).sum()
    }

    /// Test count shared by every turn of the group.
    ///
    /// Fails when the group has no turns or when pass vectors disagree in
    /// length.
    pub fn test_count(&self) -> Result<usize> {
        let mut turns = self.trajectories.iter().flat_map(|t| t.turns.iter());
        let first = turns
            .next()
            .ok_or(Error::Empty("group has no executed turns"))?
            .passes
            .len();
        if first == 0 {
            return Err(Error::shape(format!(
                "group `{}` has zero-length pass vectors",
                self.group_id
            )));
        }
        for turn in turns {
            if turn.passes.len() != first {
                return Err(Error::shape(format!(
                    "group `{}`: pass vector of length {} where {} expected",
                    self.group_id,
                    turn.passes.len(),
                    first
                )));
            }
        }
        Ok(first)
    }

    /// Turns in group order: trajectory by trajectory, turn by turn.
    pub fn turns(&self) -> impl Iterator<Item = (usize, &TurnRecord)> + '_ {
        self.trajectories
            .iter()
            .enumerate()
            .flat_map(|(i, traj)| traj.turns.iter().map(move |turn| (i, turn)))
    }
}

/// Summary of test-suite sizes over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub example_count: usize,
    pub test_count_mean: f64,
    /// Population standard deviation (divides by `example_count`).
    pub test_count_std: f64,
    pub test_count_min: usize,
    pub test_count_max: usize,
    /// Problems with at most [`SPARSE_TEST_THRESHOLD`] tests.
    pub sparse_count: usize,
    pub sparse_fraction: f64,
}

/// Reads `problems.jsonl`. Blank lines are skipped.
pub fn load_problems(path: impl AsRef<Path>) -> Result<Vec<Problem>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_problems(&text, path)
}

pub(crate) fn parse_problems(text: &str, path: &Path) -> Result<Vec<Problem>> {
    let mut problems = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let problem: Problem = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        problem.check()?;
        problems.push(problem);
    }
    Ok(problems)
}

pub fn dataset_stats(problems: &[Problem]) -> Result<DatasetStats> {
    if problems.is_empty() {
        return Err(Error::Empty("dataset has no problems"));
    }
    let counts: Vec<usize> = problems.iter().map(Problem::test_count).collect();
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let var = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    let sparse_count = counts.iter().filter(|&&c| c <= SPARSE_TEST_THRESHOLD).count();
    Ok(DatasetStats {
        example_count: counts.len(),
        test_count_mean: mean,
        test_count_std: var.sqrt(),
        test_count_min: counts.iter().copied().min().unwrap_or(0),
        test_count_max: counts.iter().copied().max().unwrap_or(0),
        sparse_count,
        sparse_fraction: sparse_count as f64 / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    /// Scoring can still proceed.
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyGroup,
    ProblemMismatch {
        trajectory: String,
        found: String,
    },
    EmptyTrajectory {
        trajectory: String,
    },
    OverTurnLimit {
        trajectory: String,
        turns: usize,
        limit: usize,
    },
    TurnIndex {
        trajectory: String,
        position: usize,
        found: usize,
    },
    PassLength {
        trajectory: String,
        turn: usize,
        expected: usize,
        found: usize,
    },
    NonTerminalFullPass {
        trajectory: String,
        turn: usize,
    },
}

impl Violation {
    pub fn severity(&self) -> Severity {
        match self {
            Violation::NonTerminalFullPass { .. } => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyGroup => write!(f, "group has no trajectories"),
            Violation::ProblemMismatch { trajectory, found } => {
                write!(f, "trajectory `{trajectory}` references problem `{found}`")
            }
            Violation::EmptyTrajectory { trajectory } => {
                write!(f, "trajectory `{trajectory}` has no turns")
            }
            Violation::OverTurnLimit {
                trajectory,
                turns,
                limit,
            } => write!(
                f,
                "trajectory `{trajectory}` has {turns} turns, over the limit of {limit}"
            ),
            Violation::TurnIndex {
                trajectory,
                position,
                found,
            } => write!(
                f,
                "trajectory `{trajectory}`: turn at position {position} is numbered {found}"
            ),
            Violation::PassLength {
                trajectory,
                turn,
                expected,
                found,
            } => write!(
                f,
                "trajectory `{trajectory}` turn {turn}: pass vector length {found}, expected {expected}"
            ),
            Violation::NonTerminalFullPass { trajectory, turn } => write!(
                f,
                "trajectory `{trajectory}` turn {turn}: non-terminal full pass"
            ),
        }
    }
}

/// Checks a group against its problem and returns every violation found.
pub fn validate_group(group: &RolloutGroup, problem: &Problem) -> Vec<Violation> {
    validate_group_shape(group, &problem.problem_id, problem.test_count())
}

/// Same checks as [`validate_group`] when only the suite size is known.
pub fn validate_group_shape(group: &RolloutGroup, problem_id: &str, test_count: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    if group.trajectories.is_empty() {
        out.push(Violation::EmptyGroup);
    }
    if group.problem_id != problem_id {
        out.push(Violation::ProblemMismatch {
            trajectory: "<group>".into(),
            found: group.problem_id.clone(),
        });
    }
    for traj in &group.trajectories {
        let id = &traj.trajectory_id;
        if traj.problem_id != problem_id {
            out.push(Violation::ProblemMismatch {
                trajectory: id.clone(),
                found: traj.problem_id.clone(),
            });
        }
        if traj.turns.is_empty() {
            out.push(Violation::EmptyTrajectory { trajectory: id.clone() });
        }
        if traj.turns.len() > traj.turn_limit {
            out.push(Violation::OverTurnLimit {
                trajectory: id.clone(),
                turns: traj.turns.len(),
                limit: traj.turn_limit,
            });
        }
        let last = traj.turns.len().saturating_sub(1);
        for (pos, turn) in traj.turns.iter().enumerate() {
            if turn.turn_index != pos + 1 {
                out.push(Violation::TurnIndex {
                    trajectory: id.clone(),
                    position: pos + 1,
                    found: turn.turn_index,
                });
            }
            if turn.passes.len() != test_count {
                out.push(Violation::PassLength {
                    trajectory: id.clone(),
                    turn: turn.turn_index,
                    expected: test_count,
                    found: turn.passes.len(),
                });
            } else if pos != last && turn.is_full_pass() {
                out.push(Violation::NonTerminalFullPass {
                    trajectory: id.clone(),
                    turn: turn.turn_index,
                });
            }
        }
    }
    out
}
