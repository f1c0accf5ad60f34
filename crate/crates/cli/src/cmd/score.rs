use std::collections::HashMap;
use std::path::PathBuf;

use passweight::advantage::{combined_advantages, AdvantageParams};
use passweight::interchange::{advantage_lines, read_trajectory_log, reward_lines};
use passweight::metrics::degenerate_ratio_of;
use passweight::problem::{load_problems, validate_group, validate_group_shape, Severity};
use passweight::reward::{compute_rewards, RewardParams};

use super::write_lines;
use crate::failure::{lib_ctx, CmdResult, Failure};
use crate::{Globals, ScoreArgs};

fn params(g: &Globals, args: &ScoreArgs) -> CmdResult<(RewardParams, AdvantageParams)> {
    let mut rp = g.config.reward;
    let mut ap = g.config.advantage;
    if let Some(a) = args.alpha {
        rp.alpha = a;
    }
    if let Some(gamma) = args.gamma {
        rp.gamma = gamma;
    }
    if let Some(m) = args.reward_mode {
        rp.reward_mode = m.into();
    }
    if let Some(b) = args.beta {
        ap.beta = b;
    }
    if let Some(n) = args.norm {
        ap.norm_mode = n.into();
    }
    if args.no_turn {
        ap.use_turn = false;
    }
    if args.no_traj {
        ap.use_traj = false;
    }
    lib_ctx(rp.validate(), || "reward parameters".into())?;
    lib_ctx(ap.validate(), || "advantage parameters".into())?;
    Ok((rp, ap))
}

pub fn run(g: &Globals, args: ScoreArgs) -> CmdResult {
    let (rp, ap) = params(g, &args)?;
    let groups = lib_ctx(read_trajectory_log(&args.log, args.turn_limit), || "reading trajectory log".into())?;
    if groups.is_empty() {
        return Err(Failure::input(anyhow::anyhow!("{}: no trajectories", args.log.display())));
    }
    let problems = match &args.problems {
        Some(path) => lib_ctx(load_problems(path), || "loading problems".into())?,
        None => Vec::new(),
    };
    let by_id: HashMap<&str, _> = problems.iter().map(|p| (p.problem_id.as_str(), p)).collect();

    let mut errors = Vec::new();
    for group in &groups {
        let violations = if args.problems.is_some() {
            match by_id.get(group.problem_id.as_str()) {
                Some(p) => validate_group(group, p),
                None => {
                    errors.push(format!("group `{}`: unknown problem `{}`", group.group_id, group.problem_id));
                    continue;
                }
            }
        } else {
            // Without a problem file the first turn fixes the suite size.
            let m = group
                .trajectories
                .iter()
                .flat_map(|t| t.turns.first())
                .map(|t| t.passes.len())
                .next()
                .unwrap_or(0);
            validate_group_shape(group, &group.problem_id, m)
        };
        for v in violations {
            match v.severity() {
                Severity::Error => errors.push(format!("group `{}`: {v}", group.group_id)),
                Severity::Warning => g.note(format!("warning: group `{}`: {v}", group.group_id)),
            }
        }
    }
    if !errors.is_empty() {
        return Err(Failure::input(anyhow::anyhow!(
            "{} invalid record(s):\n  {}",
            errors.len(),
            errors.join("\n  ")
        )));
    }

    let mut rewards = Vec::new();
    let mut advantages = Vec::new();
    let mut flags = Vec::with_capacity(groups.len());
    for group in &groups {
        let ctx = || format!("group `{}`", group.group_id);
        let bundle = lib_ctx(compute_rewards(group, &rp), ctx)?;
        let adv = lib_ctx(combined_advantages(&bundle, &ap), ctx)?;
        flags.push(adv.degenerate);
        rewards.extend(reward_lines(group, &bundle));
        advantages.extend(advantage_lines(group, &adv));
    }

    let dir = args
        .out_dir
        .clone()
        .or_else(|| g.config.paths.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    write_lines(&dir.join("rewards.jsonl"), &rewards)?;
    write_lines(&dir.join("advantages.jsonl"), &advantages)?;
    let ratio = lib_ctx(degenerate_ratio_of(&flags), || "degenerate ratio".into())?;
    g.note(format!(
        "score: {} groups, {} turns, degenerate ratio {:.4} -> {}",
        groups.len(),
        rewards.len(),
        ratio,
        dir.display()
    ));
    Ok(())
}
