//! Multi-config, multi-seed comparisons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::train::{train, StepMetrics, TrainConfig, TrainRun};

/// Median-over-seeds values at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub solve_rate: f64,
    pub degenerate_group_ratio: f64,
    pub mean_turns_to_solve: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub label: String,
    /// Per seed: first step reaching the solve threshold.
    pub steps_to_threshold: Vec<Option<usize>>,
    /// Median over seeds; `None` when the median run never got there.
    pub median_steps_to_threshold: Option<f64>,
    pub median_final_solve_rate: f64,
    pub median_mean_degenerate_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seeds: Vec<u64>,
    pub threshold: f64,
    pub curves: Vec<(String, Vec<CurvePoint>)>,
    pub summary: Vec<ConfigSummary>,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Median where `None` ranks above every value (never reached).
pub fn median_steps(steps: &[Option<usize>]) -> Option<f64> {
    let mut v: Vec<f64> = steps.iter().map(|s| s.map_or(f64::INFINITY, |x| x as f64)).collect();
    let m = median(&mut v);
    m.is_finite().then_some(m)
}

fn median_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| median(&mut v))
}

/// Summarizes finished runs of one configuration.
pub fn summarize(label: &str, runs: &[TrainRun], threshold: f64) -> (Vec<CurvePoint>, ConfigSummary) {
    let steps = runs.iter().map(|r| r.steps.len()).min().unwrap_or(0);
    let curve = (0..steps)
        .map(|s| {
            let at = |f: &dyn Fn(&StepMetrics) -> f64| {
                let mut v: Vec<f64> = runs.iter().map(|r| f(&r.steps[s])).collect();
                median(&mut v)
            };
            CurvePoint {
                step: s + 1,
                solve_rate: at(&|m| m.solve_rate),
                degenerate_group_ratio: at(&|m| m.degenerate_group_ratio),
                mean_turns_to_solve: median_opt(runs.iter().map(|r| r.steps[s].mean_turns_to_solve)),
            }
        })
        .collect();
    let per_seed: Vec<Option<usize>> = runs.iter().map(|r| r.steps_to(threshold)).collect();
    let summary = ConfigSummary {
        label: label.to_string(),
        median_steps_to_threshold: median_steps(&per_seed),
        steps_to_threshold: per_seed,
        median_final_solve_rate: median(&mut runs.iter().map(TrainRun::final_solve_rate).collect::<Vec<_>>()),
        median_mean_degenerate_ratio: median(&mut runs.iter().map(TrainRun::mean_degenerate_ratio).collect::<Vec<_>>()),
    };
    (curve, summary)
}

/// Trains every configuration under every seed (the config's own seed is
/// replaced) and summarizes each configuration.
pub fn compare(configs: &[TrainConfig], seeds: &[u64]) -> Result<ComparisonReport> {
    if configs.len() < 2 {
        return Err(Error::param("comparison needs at least two configurations"));
    }
    if seeds.is_empty() {
        return Err(Error::Empty("no seeds"));
    }
    let threshold = configs[0].solve_threshold;
    let mut curves = Vec::with_capacity(configs.len());
    let mut summary = Vec::with_capacity(configs.len());
    for cfg in configs {
        let runs = seeds
            .iter()
            .map(|&seed| train(&TrainConfig { seed, ..cfg.clone() }))
            .collect::<Result<Vec<_>>>()?;
        let (curve, s) = summarize(&cfg.label, &runs, threshold);
        curves.push((cfg.label.clone(), curve));
        summary.push(s);
    }
    Ok(ComparisonReport {
        seeds: seeds.to_vec(),
        threshold,
        curves,
        summary,
    })
}

pub const CURVE_CSV_HEADER: &str = "label,step,solve_rate,degenerate_group_ratio,mean_turns_to_solve";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// One CSV row per (label, step).
pub fn curve_csv<'a>(curves: impl IntoIterator<Item = (&'a str, &'a [CurvePoint])>) -> String {
    let mut out = String::from(CURVE_CSV_HEADER);
    out.push('\n');
    for (label, points) in curves {
        for p in points {
            out.push_str(&format!(
                "{label},{},{},{},{}\n",
                p.step,
                p.solve_rate,
                p.degenerate_group_ratio,
                fmt_opt(p.mean_turns_to_solve)
            ));
        }
    }
    out
}

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        curve_csv(self.curves.iter().map(|(l, c)| (l.as_str(), c.as_slice())))
    }

    pub fn summary_for(&self, label: &str) -> Option<&ConfigSummary> {
        self.summary.iter().find(|s| s.label == label)
    }
}

/// Per-step curve of a single run, in the comparison CSV layout.
pub fn run_curve(run: &TrainRun) -> Vec<CurvePoint> {
    run.steps
        .iter()
        .map(|m| CurvePoint {
            step: m.step,
            solve_rate: m.solve_rate,
            degenerate_group_ratio: m.degenerate_group_ratio,
            mean_turns_to_solve: m.mean_turns_to_solve,
        })
        .collect()
}
