use passweight::interchange::{read_jsonl, EvalLine};
use passweight::metrics::pass_at_k;
use serde::Serialize;

use super::emit_json;
use crate::failure::{lib_ctx, CmdResult, Failure};
use crate::{Globals, PasskArgs};

#[derive(Debug, Serialize)]
struct Report {
    k: u64,
    problems: usize,
    pass_at_k: f64,
}

pub fn run(_g: &Globals, args: PasskArgs) -> CmdResult {
    let lines: Vec<EvalLine> = lib_ctx(read_jsonl(&args.eval), || "reading evaluation file".into())?;
    if lines.is_empty() {
        return Err(Failure::input(anyhow::anyhow!("{}: no records", args.eval.display())));
    }
    let mut sum = 0.0;
    for (idx, line) in lines.iter().enumerate() {
        sum += lib_ctx(pass_at_k(line.n, line.c, args.k), || {
            format!("record {} (problem `{}`)", idx + 1, line.problem_id)
        })?;
    }
    let report = Report {
        k: args.k,
        problems: lines.len(),
        pass_at_k: sum / lines.len() as f64,
    };
    emit_json(&report, args.out.as_deref())
}
