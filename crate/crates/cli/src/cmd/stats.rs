use passweight::problem::{dataset_stats, load_problems};

use super::emit_json;
use crate::failure::{lib_ctx, CmdResult};
use crate::{Globals, StatsArgs};

pub fn run(_g: &Globals, args: StatsArgs) -> CmdResult {
    let problems = lib_ctx(load_problems(&args.problems), || "loading problems".into())?;
    let stats = lib_ctx(dataset_stats(&problems), || args.problems.display().to_string())?;
    emit_json(&stats, None)
}
