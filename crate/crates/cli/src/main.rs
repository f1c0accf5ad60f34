//! `passweight`: execute test suites, score trajectory logs, run the
//! training simulator, and report pass@k and degeneracy.
//!
//! Exit codes: 0 on success, 1 on bad input or usage, 2 when the host
//! itself fails (spawning, scratch space, numeric blow-up).

mod cmd;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use passweight::advantage::NormMode;
use passweight::reward::RewardMode;

use crate::config::GlobalConfig;
use crate::failure::CmdResult;

#[derive(Debug, Parser)]
#[command(name = "passweight", version, about = "Dense unit-test rewards for code-generation RL")]
pub struct Cli {
    /// TOML file with default parameters.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every randomized path.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (concurrent tests for `exec`, rollout workers for `simulate`).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Suppress summaries on standard error.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run candidate programs against problem suites and log one turn each.
    Exec(ExecArgs),
    /// Compute turn rewards and advantages for a trajectory log.
    Score(ScoreArgs),
    /// Train the toy policy, or compare several configurations.
    Simulate(SimulateArgs),
    /// Unbiased pass@k over an evaluation file.
    Passk(PasskArgs),
    /// Degeneracy report for an advantages file.
    Analyze(AnalyzeArgs),
    /// Test-count statistics for a problem file.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct ExecArgs {
    /// Problem file (JSONL).
    #[arg(long)]
    pub problems: PathBuf,
    /// Candidate programs (JSONL of problem_id, candidate_id, command, source).
    #[arg(long)]
    pub solutions: PathBuf,
    /// Trajectory log to write.
    #[arg(long, default_value = "trajectories.jsonl")]
    pub out: PathBuf,
    /// Optional per-test outcome report (JSONL).
    #[arg(long)]
    pub details: Option<PathBuf>,
    #[arg(long)]
    pub wall_time_ms: Option<u64>,
    #[arg(long)]
    pub max_output_bytes: Option<usize>,
    /// Group id for every record; defaults to the problem id.
    #[arg(long)]
    pub group_id: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormArg {
    Const,
    Std,
}

impl From<NormArg> for NormMode {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Const => NormMode::ConstOne,
            NormArg::Std => NormMode::Std,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Verpo,
    Ps,
    Diff,
    Binary,
}

impl From<ModeArg> for RewardMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Verpo => RewardMode::Verpo,
            ModeArg::Ps => RewardMode::PassRate,
            ModeArg::Diff => RewardMode::DifficultyOnly,
            ModeArg::Binary => RewardMode::Binary,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Trajectory log (JSONL, one line per turn).
    #[arg(long)]
    pub log: PathBuf,
    /// Directory for rewards.jsonl and advantages.jsonl.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Problem file to validate pass-vector lengths against.
    #[arg(long)]
    pub problems: Option<PathBuf>,
    /// Turn limit of the logged rollouts; defaults to the longest trajectory.
    #[arg(long)]
    pub turn_limit: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, value_enum)]
    pub norm: Option<NormArg>,
    #[arg(long, value_enum)]
    pub reward_mode: Option<ModeArg>,
    /// Drop the turn-level advantage.
    #[arg(long)]
    pub no_turn: bool,
    /// Drop the trajectory-level advantage.
    #[arg(long)]
    pub no_traj: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Training configs (TOML). None runs the reference configuration.
    pub configs: Vec<PathBuf>,
    /// Compare configurations over several seeds. Without config files the
    /// reference ablation set is compared.
    #[arg(long)]
    pub compare: bool,
    /// Number of seeds for a comparison, starting at --seed.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "sim-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PasskArgs {
    /// Evaluation file (JSONL of problem_id, n, c).
    #[arg(long)]
    pub eval: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k: u64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Advantages file written by `score`.
    #[arg(long)]
    pub advantages: PathBuf,
    /// Timing report (JSON) written by `simulate`, merged into the output.
    #[arg(long)]
    pub timing: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub problems: PathBuf,
}

/// Global settings after merging the config file with global flags.
pub struct Globals {
    pub config: GlobalConfig,
    pub quiet: bool,
}

impl Globals {
    pub fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn globals(cli: &Cli) -> CmdResult<Globals> {
    let mut config = match &cli.config {
        Some(path) => GlobalConfig::load(path)?,
        None => GlobalConfig::default(),
    };
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(failure::Failure::input(anyhow::anyhow!("--workers must be at least 1")));
        }
        config.workers = Some(w);
    }
    if let Some(dir) = &config.paths.scratch_dir {
        if std::env::var_os(passweight::sandbox::SCRATCH_ENV).is_none() {
            std::env::set_var(passweight::sandbox::SCRATCH_ENV, dir);
        }
    }
    Ok(Globals {
        config,
        quiet: cli.quiet,
    })
}

fn run(cli: Cli) -> CmdResult {
    let g = globals(&cli)?;
    match cli.command {
        Command::Exec(a) => cmd::exec::run(&g, a),
        Command::Score(a) => cmd::score::run(&g, a),
        Command::Simulate(a) => cmd::simulate::run(&g, a),
        Command::Passk(a) => cmd::passk::run(&g, a),
        Command::Analyze(a) => cmd::analyze::run(&g, a),
        Command::Stats(a) => cmd::stats::run(&g, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
