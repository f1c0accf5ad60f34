//! Line-delimited JSON records shared by the executor, scorer and analyzer.
//!
//! * `trajectories.jsonl`: one [`TrajectoryLine`] per executed turn.
//! * `rewards.jsonl`: one [`RewardLine`] per turn.
//! * `advantages.jsonl`: one [`AdvantageLine`] per turn.
//! * evaluation input for pass@k: one [`EvalLine`] per problem.
//! * executor input: one [`SolutionLine`] per candidate program.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::advantage::AdvantageBundle;
use crate::error::{Error, Result};
use crate::problem::{RolloutGroup, TrajectoryRecord, TurnRecord};
use crate::reward::RewardBundle;
use crate::sandbox::Candidate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLine {
    pub problem_id: String,
    pub group_id: String,
    pub trajectory_id: String,
    /// 1-based.
    pub turn: usize,
    pub passes: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardLine {
    pub problem_id: String,
    pub group_id: String,
    pub trajectory_id: String,
    pub turn: usize,
    pub turn_reward: f64,
    pub trajectory_outcome: u8,
    pub decayed_trajectory_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageLine {
    pub problem_id: String,
    pub group_id: String,
    pub trajectory_id: String,
    pub turn: usize,
    pub turn_advantage: f64,
    pub trajectory_advantage: f64,
    pub advantage: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalLine {
    pub problem_id: String,
    pub n: u64,
    pub c: u64,
}

/// A candidate program for one problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionLine {
    pub problem_id: String,
    pub candidate_id: String,
    /// Command template containing `{src}` once, e.g. `["python3", "{src}"]`.
    pub command: Vec<String>,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_name: Option<String>,
}

impl SolutionLine {
    pub fn candidate(&self) -> Result<Candidate> {
        let c = Candidate::new(self.command.clone(), self.source.as_bytes())?;
        Ok(match &self.file_name {
            Some(name) => c.with_file_name(name),
            None => c,
        })
    }
}

/// Parses every non-blank line of a JSONL file.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(mut out: impl Write, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Assembles turn lines into groups keyed by `(problem_id, group_id)`.
///
/// Groups and trajectories keep first-appearance order; turns are sorted by
/// turn number. Every trajectory gets `turn_limit`, or the longest
/// trajectory length in the log when `None`. Contiguity of turn numbers is
/// left to [`crate::problem::validate_group`].
pub fn assemble_groups(lines: Vec<TrajectoryLine>, turn_limit: Option<usize>) -> Result<Vec<RolloutGroup>> {
    let mut groups: Vec<RolloutGroup> = Vec::new();
    let mut group_index: HashMap<(String, String), usize> = HashMap::new();
    let mut traj_index: HashMap<(usize, String), usize> = HashMap::new();

    for line in lines {
        let key = (line.problem_id.clone(), line.group_id.clone());
        let gi = *group_index.entry(key).or_insert_with(|| {
            groups.push(RolloutGroup {
                problem_id: line.problem_id.clone(),
                group_id: line.group_id.clone(),
                trajectories: Vec::new(),
            });
            groups.len() - 1
        });
        let group = &mut groups[gi];
        let ti = *traj_index.entry((gi, line.trajectory_id.clone())).or_insert_with(|| {
            group.trajectories.push(TrajectoryRecord {
                problem_id: line.problem_id.clone(),
                trajectory_id: line.trajectory_id.clone(),
                turns: Vec::new(),
                turn_limit: 0,
            });
            group.trajectories.len() - 1
        });
        let traj = &mut group.trajectories[ti];
        if traj.turns.iter().any(|t| t.turn_index == line.turn) {
            return Err(Error::Validation {
                problem_id: line.problem_id,
                message: format!(
                    "group `{}` trajectory `{}` repeats turn {}",
                    line.group_id, line.trajectory_id, line.turn
                ),
            });
        }
        traj.turns.push(TurnRecord {
            turn_index: line.turn,
            passes: line.passes,
            wall_time_ms: line.wall_time_ms,
        });
    }

    let longest = groups
        .iter()
        .flat_map(|g| g.trajectories.iter().map(TrajectoryRecord::len))
        .max()
        .unwrap_or(1);
    let limit = turn_limit.unwrap_or(longest);
    for traj in groups.iter_mut().flat_map(|g| g.trajectories.iter_mut()) {
        traj.turns.sort_by_key(|t| t.turn_index);
        traj.turn_limit = limit;
    }
    Ok(groups)
}

pub fn read_trajectory_log(path: impl AsRef<Path>, turn_limit: Option<usize>) -> Result<Vec<RolloutGroup>> {
    assemble_groups(read_jsonl(path)?, turn_limit)
}

pub fn trajectory_lines(group: &RolloutGroup) -> Vec<TrajectoryLine> {
    group
        .trajectories
        .iter()
        .flat_map(|traj| {
            traj.turns.iter().map(move |turn| TrajectoryLine {
                problem_id: traj.problem_id.clone(),
                group_id: group.group_id.clone(),
                trajectory_id: traj.trajectory_id.clone(),
                turn: turn.turn_index,
                passes: turn.passes.clone(),
                wall_time_ms: turn.wall_time_ms,
            })
        })
        .collect()
}

pub fn reward_lines(group: &RolloutGroup, rewards: &RewardBundle) -> Vec<RewardLine> {
    let mut out = Vec::new();
    for (i, traj) in group.trajectories.iter().enumerate() {
        for (t, turn) in traj.turns.iter().enumerate() {
            out.push(RewardLine {
                problem_id: group.problem_id.clone(),
                group_id: group.group_id.clone(),
                trajectory_id: traj.trajectory_id.clone(),
                turn: turn.turn_index,
                turn_reward: rewards.turn_rewards[i][t],
                trajectory_outcome: u8::from(rewards.trajectory_outcomes[i]),
                decayed_trajectory_reward: rewards.decayed_trajectory_rewards[i],
            });
        }
    }
    out
}

pub fn advantage_lines(group: &RolloutGroup, adv: &AdvantageBundle) -> Vec<AdvantageLine> {
    let mut out = Vec::new();
    for (i, traj) in group.trajectories.iter().enumerate() {
        for (t, turn) in traj.turns.iter().enumerate() {
            out.push(AdvantageLine {
                problem_id: group.problem_id.clone(),
                group_id: group.group_id.clone(),
                trajectory_id: traj.trajectory_id.clone(),
                turn: turn.turn_index,
                turn_advantage: adv.turn_advantages[i][t],
                trajectory_advantage: adv.trajectory_advantages[i],
                advantage: adv.combined[i][t],
                degenerate: adv.degenerate,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(g: &str, t: &str, turn: usize, passes: Vec<bool>) -> TrajectoryLine {
        TrajectoryLine {
            problem_id: "p".into(),
            group_id: g.into(),
            trajectory_id: t.into(),
            turn,
            passes,
            wall_time_ms: None,
        }
    }

    #[test]
    fn assembles_out_of_order_turns() {
        let lines = vec![
            line("g1", "a", 2, vec![true]),
            line("g1", "b", 1, vec![true]),
            line("g2", "a", 1, vec![false]),
            line("g1", "a", 1, vec![false]),
        ];
        let groups = assemble_groups(lines, None).unwrap();
        assert_eq!(groups.len(), 2);
        let g1 = &groups[0];
        assert_eq!(g1.trajectories.len(), 2);
        assert_eq!(g1.trajectories[0].trajectory_id, "a");
        assert_eq!(g1.trajectories[0].turns[0].turn_index, 1);
        assert!(!g1.trajectories[0].turns[0].passes[0]);
        assert_eq!(g1.trajectories[0].turn_limit, 2);
        assert_eq!(groups[1].group_id, "g2");
    }

    #[test]
    fn repeated_turn_is_rejected() {
        let lines = vec![line("g", "a", 1, vec![true]), line("g", "a", 1, vec![false])];
        assert!(assemble_groups(lines, Some(3)).is_err());
    }

    #[test]
    fn lines_round_trip_through_groups() {
        let lines = vec![
            line("g", "a", 1, vec![false, true]),
            line("g", "a", 2, vec![true, true]),
            line("g", "b", 1, vec![true, true]),
        ];
        let groups = assemble_groups(lines.clone(), Some(4)).unwrap();
        assert_eq!(trajectory_lines(&groups[0]), lines);
    }
}
