use std::collections::HashMap;

use passweight::interchange::{read_jsonl, AdvantageLine};
use passweight::metrics::TimingReport;
use serde::Serialize;

use super::emit_json;
use crate::failure::{lib_ctx, CmdResult, Context, Failure};
use crate::{AnalyzeArgs, Globals};

const BINS: usize = 10;

#[derive(Debug, Serialize)]
struct Bin {
    lo: f64,
    hi: f64,
    groups: usize,
}

#[derive(Debug, Serialize)]
struct Report {
    groups: usize,
    turns: usize,
    degenerate_groups: usize,
    degenerate_ratio: f64,
    /// Groups binned by their share of turns with a zero advantage.
    zero_advantage_share: Vec<Bin>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<TimingReport>,
}

struct GroupAcc {
    turns: usize,
    zeros: usize,
    degenerate: bool,
}

pub fn run(_g: &Globals, args: AnalyzeArgs) -> CmdResult {
    let lines: Vec<AdvantageLine> = lib_ctx(read_jsonl(&args.advantages), || "reading advantages".into())?;
    if lines.is_empty() {
        return Err(Failure::input(anyhow::anyhow!("{}: no records", args.advantages.display())));
    }
    let mut groups: Vec<GroupAcc> = Vec::new();
    let mut index: HashMap<(&str, &str), usize> = HashMap::new();
    for line in &lines {
        let idx = *index.entry((&line.problem_id, &line.group_id)).or_insert_with(|| {
            groups.push(GroupAcc {
                turns: 0,
                zeros: 0,
                degenerate: true,
            });
            groups.len() - 1
        });
        let acc = &mut groups[idx];
        acc.turns += 1;
        if line.advantage == 0.0 {
            acc.zeros += 1;
        }
        acc.degenerate &= line.degenerate;
    }

    let mut bins: Vec<Bin> = (0..BINS)
        .map(|b| Bin {
            lo: b as f64 / BINS as f64,
            hi: (b + 1) as f64 / BINS as f64,
            groups: 0,
        })
        .collect();
    for acc in &groups {
        let share = acc.zeros as f64 / acc.turns as f64;
        let b = ((share * BINS as f64) as usize).min(BINS - 1);
        bins[b].groups += 1;
    }
    let degenerate_groups = groups.iter().filter(|a| a.degenerate).count();

    let timing = match &args.timing {
        Some(path) => {
            let text = std::fs::read_to_string(path).input_ctx(|| format!("reading {}", path.display()))?;
            Some(serde_json::from_str(&text).input_ctx(|| format!("parsing {}", path.display()))?)
        }
        None => None,
    };
    let report = Report {
        groups: groups.len(),
        turns: lines.len(),
        degenerate_groups,
        degenerate_ratio: degenerate_groups as f64 / groups.len() as f64,
        zero_advantage_share: bins,
        timing,
    };
    emit_json(&report, args.out.as_deref())
}
