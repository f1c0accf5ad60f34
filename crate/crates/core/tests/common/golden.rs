//! The golden executor corpus under `fixtures/golden` at the workspace root.

use std::path::PathBuf;

use passweight::interchange::{read_jsonl, SolutionLine};
use passweight::problem::{load_problems, Problem};
use passweight::sandbox::ExecLimits;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
pub struct Expected {
    pub candidate_id: String,
    pub passes: Vec<bool>,
    pub statuses: Vec<String>,
}

pub fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/golden")
}

pub fn problem() -> Problem {
    load_problems(dir().join("problems.jsonl")).unwrap().remove(0)
}

pub fn solutions() -> Vec<SolutionLine> {
    read_jsonl(dir().join("solutions.jsonl")).unwrap()
}

pub fn expected() -> Vec<Expected> {
    read_jsonl(dir().join("expected.jsonl")).unwrap()
}

pub const WALL_MS: u64 = 1_000;
pub const GRACE_MS: f64 = 200.0;

pub fn limits(concurrency: usize) -> ExecLimits {
    ExecLimits {
        wall_time_ms: WALL_MS,
        max_output_bytes: 64 * 1024,
        max_concurrent_tests: concurrency,
    }
}
