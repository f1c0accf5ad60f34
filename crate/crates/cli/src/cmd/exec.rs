use std::collections::HashMap;
use std::time::Instant;

use passweight::interchange::{read_jsonl, SolutionLine, TrajectoryLine};
use passweight::problem::{load_problems, Problem};
use passweight::sandbox::{run_suite, TestOutcome, TestStatus};
use passweight::Error;
use serde::Serialize;

use super::{write_lines, write_text};
use crate::failure::{lib_ctx, CmdResult, Failure};
use crate::{ExecArgs, Globals};

#[derive(Debug, Serialize)]
struct TestDetail {
    test_id: String,
    status: TestStatus,
    duration_ms: f64,
    exit_code: Option<i32>,
}

#[derive(Debug, Serialize)]
struct DetailLine {
    problem_id: String,
    candidate_id: String,
    passed: usize,
    tests: Vec<TestDetail>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn details(outcomes: &[TestOutcome]) -> Vec<TestDetail> {
    outcomes
        .iter()
        .map(|o| TestDetail {
            test_id: o.test_id.clone(),
            status: o.status,
            duration_ms: o.duration_ms,
            exit_code: o.exit_code,
        })
        .collect()
}

pub fn run(g: &Globals, args: ExecArgs) -> CmdResult {
    let problems = lib_ctx(load_problems(&args.problems), || "loading problems".into())?;
    let by_id: HashMap<&str, &Problem> = problems.iter().map(|p| (p.problem_id.as_str(), p)).collect();
    let solutions: Vec<SolutionLine> = lib_ctx(read_jsonl(&args.solutions), || "reading solutions".into())?;

    let unknown: Vec<String> = solutions
        .iter()
        .filter(|s| !by_id.contains_key(s.problem_id.as_str()))
        .map(|s| format!("`{}` (candidate `{}`)", s.problem_id, s.candidate_id))
        .collect();
    if !unknown.is_empty() {
        return Err(Failure::input(anyhow::anyhow!("unknown problem ids: {}", unknown.join(", "))));
    }

    let mut limits = g.config.limits;
    if let Some(ms) = args.wall_time_ms {
        limits.wall_time_ms = ms;
    }
    if let Some(bytes) = args.max_output_bytes {
        limits.max_output_bytes = bytes;
    }
    if let Some(w) = g.config.workers {
        limits.max_concurrent_tests = w;
    }
    lib_ctx(limits.validate(), || "execution limits".into())?;

    let mut lines = Vec::with_capacity(solutions.len());
    let mut report = Vec::with_capacity(solutions.len());
    let mut full = 0usize;
    for sol in &solutions {
        let problem = by_id[sol.problem_id.as_str()];
        let started = Instant::now();
        let result = sol.candidate().and_then(|c| run_suite(&c, problem, &limits));
        let (passes, tests, error) = match result {
            Ok((passes, outcomes)) => (passes, details(&outcomes), None),
            Err(e @ Error::Infrastructure(_)) => {
                return Err(Failure::infra(anyhow::Error::new(e).context(format!(
                    "running candidate `{}` on problem `{}`",
                    sol.candidate_id, sol.problem_id
                ))));
            }
            // A malformed candidate fails every test; the rest of the batch
            // still runs.
            Err(e) => {
                eprintln!("warning: candidate `{}`: {e}", sol.candidate_id);
                (vec![false; problem.test_count()], Vec::new(), Some(e.to_string()))
            }
        };
        let passed = passes.iter().filter(|&&p| p).count();
        if passed == passes.len() {
            full += 1;
        }
        lines.push(TrajectoryLine {
            problem_id: sol.problem_id.clone(),
            group_id: args.group_id.clone().unwrap_or_else(|| sol.problem_id.clone()),
            trajectory_id: sol.candidate_id.clone(),
            turn: 1,
            passes,
            wall_time_ms: Some(started.elapsed().as_secs_f64() * 1e3),
        });
        report.push(DetailLine {
            problem_id: sol.problem_id.clone(),
            candidate_id: sol.candidate_id.clone(),
            passed,
            tests,
            error,
        });
    }

    write_lines(&args.out, &lines)?;
    if let Some(path) = &args.details {
        let mut text = String::new();
        for d in &report {
            text.push_str(&serde_json::to_string(d).expect("detail serializes"));
            text.push('\n');
        }
        write_text(path, &text)?;
    }
    g.note(format!(
        "exec: {} candidates, {} full passes -> {}",
        lines.len(),
        full,
        args.out.display()
    ));
    Ok(())
}
