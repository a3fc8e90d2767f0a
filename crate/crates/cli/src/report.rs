//! Collates the outputs of `simulate`, `sweep` and `scenario` found in one
//! directory into flat data series.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde_json::{json, Map, Value};

use announce_core::sweep::{on_frontier, SweepReport};
use announce_core::ScenarioTrace;

use crate::commands::{SimulationSummary, SUMMARY_JSON, SWEEP_JSON};
use crate::{Format, ReportArgs};

struct Series {
    name: &'static str,
    columns: &'static [&'static str],
    rows: Vec<Vec<Value>>,
}

impl Series {
    fn new(name: &'static str, columns: &'static [&'static str]) -> Self {
        Self {
            name,
            columns,
            rows: Vec::new(),
        }
    }
}

fn policy_series(summary: &SimulationSummary) -> Series {
    let mut s = Series::new(
        "policies",
        &[
            "policy",
            "n_episodes",
            "mean_reward",
            "reward_std_error",
            "mean_undiscounted_reward",
            "mean_changes",
            "mean_completion_increase",
            "mean_cumulative_error",
            "mean_error_per_step",
        ],
    );
    for o in &summary.policies {
        let m = &o.summary;
        s.rows.push(vec![
            json!(o.policy),
            json!(m.n_episodes),
            json!(m.mean_reward),
            json!(m.reward_std_error()),
            json!(m.mean_undiscounted_reward),
            json!(m.mean_changes),
            json!(m.mean_completion_increase),
            json!(m.mean_cumulative_error),
            json!(m.mean_error_per_step),
        ]);
    }
    s
}

fn sweep_series(report: &SweepReport) -> [Series; 2] {
    let mut points = Series::new(
        "sweep",
        &[
            "lambda_e",
            "lambda_c",
            "mean_error",
            "mean_cumulative_error",
            "mean_changes",
            "on_frontier",
            "converged",
        ],
    );
    for p in &report.points {
        points.rows.push(vec![
            json!(p.lambda_e),
            json!(p.lambda_c),
            json!(p.mean_error),
            json!(p.mean_cumulative_error),
            json!(p.mean_changes),
            json!(on_frontier(p, &report.frontier)),
            json!(p.converged),
        ]);
    }
    let mut baselines = Series::new("baselines", &["policy", "mean_error", "mean_cumulative_error", "mean_changes"]);
    for b in &report.baselines {
        baselines.rows.push(vec![
            json!(b.policy),
            json!(b.mean_error),
            json!(b.mean_cumulative_error),
            json!(b.mean_changes),
        ]);
    }
    [points, baselines]
}

fn scenario_series(traces: &[(String, ScenarioTrace)]) -> [Series; 2] {
    let mut steps = Series::new(
        "scenario",
        &["source", "policy", "t", "true_completion", "observation", "announcement", "belief_mode", "reward"],
    );
    let mut beliefs = Series::new("scenario_beliefs", &["source", "t", "completion", "probability"]);
    for (source, trace) in traces {
        for (step, snap) in trace.record.steps.iter().zip(&trace.beliefs) {
            steps.rows.push(vec![
                json!(source),
                json!(trace.policy),
                json!(step.t),
                json!(step.true_completion),
                json!(step.observation),
                json!(step.action),
                json!(snap.mode),
                json!(step.reward),
            ]);
            for e in &snap.belief {
                beliefs
                    .rows
                    .push(vec![json!(source), json!(snap.t), json!(e.completion), json!(e.probability)]);
            }
        }
    }
    [steps, beliefs]
}

fn collect(dir: &Path) -> Result<Vec<Series>> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    let mut series = Vec::new();
    let mut traces = Vec::new();
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.sort();
    for path in paths {
        if path.extension().is_none_or(|e| e != "json") {
            continue;
        }
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        if name == SUMMARY_JSON {
            let s: SimulationSummary = serde_json::from_str(&text).with_context(|| format!("parsing {name}"))?;
            series.push(policy_series(&s));
        } else if name == SWEEP_JSON {
            let r: SweepReport = serde_json::from_str(&text).with_context(|| format!("parsing {name}"))?;
            series.extend(sweep_series(&r));
        } else if let Ok(trace) = serde_json::from_str::<ScenarioTrace>(&text) {
            traces.push((name, trace));
        }
    }
    if !traces.is_empty() {
        series.extend(scenario_series(&traces));
    }
    if series.is_empty() {
        bail!("no simulate, sweep or scenario outputs in {}", dir.display());
    }
    Ok(series)
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn write_csv(out: &mut impl Write, series: &[Series]) -> Result<()> {
    for (i, s) in series.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        writeln!(out, "# {}", s.name)?;
        let mut w = csv::Writer::from_writer(&mut *out);
        w.write_record(s.columns)?;
        for row in &s.rows {
            w.write_record(row.iter().map(cell))?;
        }
        w.flush()?;
    }
    Ok(())
}

fn to_json(series: &[Series]) -> Value {
    let mut doc = Map::new();
    for s in series {
        let rows: Vec<Value> = s
            .rows
            .iter()
            .map(|r| Value::Object(s.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect()))
            .collect();
        doc.insert(s.name.to_string(), Value::Array(rows));
    }
    Value::Object(doc)
}

pub fn run(args: ReportArgs) -> Result<ExitCode> {
    let series = collect(&args.input)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match args.format {
        Format::Csv => write_csv(&mut out, &series)?,
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&to_json(&series))?)?,
    }
    Ok(ExitCode::SUCCESS)
}
