use std::collections::HashSet;

use passweight::metrics::TimingReport;
use passweight::sim::compare::{curve_csv, run_curve};
use passweight::sim::{ablation_configs, compare, reference_config, train, StepMetrics, TrainConfig, TrainRun};
use serde::Serialize;

use super::{pretty, write_text};
use crate::failure::{lib_ctx, CmdResult, Context, Failure};
use crate::{Globals, SimulateArgs};

/// Deterministic per-run summary; wall-clock numbers live in the timing
/// files only.
#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    label: &'a str,
    seed: u64,
    steps: usize,
    threshold: f64,
    steps_to_threshold: Option<usize>,
    final_solve_rate: f64,
    mean_degenerate_ratio: f64,
    initial: &'a StepMetrics,
}

#[derive(Debug, Serialize)]
struct RunTiming<'a> {
    label: &'a str,
    #[serde(flatten)]
    timing: &'a TimingReport,
}

fn load(path: &std::path::Path) -> CmdResult<TrainConfig> {
    let text = std::fs::read_to_string(path).input_ctx(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).input_ctx(|| format!("parsing {}", path.display()))
}

fn configs(g: &Globals, args: &SimulateArgs) -> CmdResult<Vec<TrainConfig>> {
    let mut configs = if !args.configs.is_empty() {
        args.configs.iter().map(|p| load(p)).collect::<CmdResult<Vec<_>>>()?
    } else if args.compare {
        ablation_configs()
    } else {
        vec![reference_config()]
    };
    for c in &mut configs {
        if let Some(steps) = args.steps {
            c.steps = steps;
        }
        if let Some(seed) = g.config.seed {
            c.seed = seed;
        }
        if let Some(w) = g.config.workers {
            c.workers = w;
        }
        lib_ctx(c.validate(), || format!("config `{}`", c.label))?;
    }
    let mut seen = HashSet::new();
    if let Some(dup) = configs.iter().find(|c| !seen.insert(c.label.as_str())) {
        return Err(Failure::input(anyhow::anyhow!("duplicate config label `{}`", dup.label)));
    }
    Ok(configs)
}

pub fn run(g: &Globals, args: SimulateArgs) -> CmdResult {
    let configs = configs(g, &args)?;
    if args.compare {
        run_compare(g, &args, &configs)
    } else {
        run_each(g, &args, &configs)
    }
}

fn run_each(g: &Globals, args: &SimulateArgs, configs: &[TrainConfig]) -> CmdResult {
    let runs: Vec<TrainRun> = configs
        .iter()
        .map(|c| lib_ctx(train(c), || format!("training `{}`", c.label)))
        .collect::<CmdResult<_>>()?;

    let curves: Vec<_> = runs.iter().map(|r| (r.label.as_str(), run_curve(r))).collect();
    let csv = curve_csv(curves.iter().map(|(l, c)| (*l, c.as_slice())));
    let summaries: Vec<RunSummary> = runs
        .iter()
        .zip(configs)
        .map(|(r, c)| RunSummary {
            label: &r.label,
            seed: r.seed,
            steps: r.steps.len(),
            threshold: c.solve_threshold,
            steps_to_threshold: r.steps_to(c.solve_threshold),
            final_solve_rate: r.final_solve_rate(),
            mean_degenerate_ratio: r.mean_degenerate_ratio(),
            initial: &r.initial,
        })
        .collect();
    let timings: Vec<RunTiming> = runs
        .iter()
        .map(|r| RunTiming {
            label: &r.label,
            timing: &r.timing,
        })
        .collect();
    let mut timing_csv = format!("label,{}\n", TimingReport::CSV_HEADER);
    for t in &timings {
        timing_csv.push_str(&format!("{},{}\n", t.label, t.timing.csv_row()));
    }

    write_text(&args.out.join("metrics.csv"), &csv)?;
    write_text(&args.out.join("summary.json"), &pretty(&summaries))?;
    write_text(&args.out.join("timing.json"), &pretty(&timings))?;
    write_text(&args.out.join("timing.csv"), &timing_csv)?;
    for s in &summaries {
        g.note(format!(
            "simulate: {} seed {}: final solve rate {:.3}, mean degenerate ratio {:.3}, steps to {:.0}% {}",
            s.label,
            s.seed,
            s.final_solve_rate,
            s.mean_degenerate_ratio,
            s.threshold * 100.0,
            s.steps_to_threshold.map_or("never".into(), |v| v.to_string())
        ));
    }
    Ok(())
}

fn run_compare(g: &Globals, args: &SimulateArgs, configs: &[TrainConfig]) -> CmdResult {
    if args.seeds == 0 {
        return Err(Failure::input(anyhow::anyhow!("--seeds must be at least 1")));
    }
    let base = g.config.seed.unwrap_or(0);
    let seeds: Vec<u64> = (0..args.seeds).map(|i| base.wrapping_add(i)).collect();
    let report = lib_ctx(compare(configs, &seeds), || "comparison".into())?;
    write_text(&args.out.join("metrics.csv"), &report.to_csv())?;
    write_text(&args.out.join("summary.json"), &pretty(&report.summary))?;
    for s in &report.summary {
        g.note(format!(
            "compare: {}: median steps to {:.0}% {}, median final solve rate {:.3}, median degenerate ratio {:.3}",
            s.label,
            report.threshold * 100.0,
            s.median_steps_to_threshold.map_or("never".into(), |v| v.to_string()),
            s.median_final_solve_rate,
            s.median_mean_degenerate_ratio
        ));
    }
    Ok(())
}
