use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use announce_core::sweep::{baseline_points, write_sweep_csv, SweepReport};
use announce_core::{
    load_policy, pareto_frontier, pareto_sweep, run_batch, save_policy, scenario_trace, sim::write_episodes_csv,
    solve_point_based, solve_qmdp, PointBasedOptions, Policy64, PolicyKind, PolicyOutcome, ProblemConfig,
};

use crate::{ConfigSource, ScenarioArgs, ServeArgs, SimulateArgs, SolveArgs, Solver, SweepArgs};

pub const EPISODES_CSV: &str = "episodes.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const FRONTIER_CSV: &str = "frontier.csv";
pub const SWEEP_JSON: &str = "sweep.json";

/// Companion document to the episode CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub config: ProblemConfig,
    pub config_fingerprint: String,
    pub seed: u64,
    pub episodes: u64,
    pub policies: Vec<PolicyOutcome>,
}

impl ConfigSource {
    fn load(&self, default_preset: Option<&str>) -> Result<ProblemConfig> {
        let cfg = match (&self.config, &self.preset, default_preset) {
            (Some(path), _, _) => ProblemConfig::load(path)?,
            (None, Some(name), _) => ProblemConfig::preset(name)?,
            (None, None, Some(name)) => ProblemConfig::preset(name)?,
            (None, None, None) => bail!("one of --config or --preset is required"),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Builds a policy from a kind name, solving inline where needed, or loads a
/// policy file.
fn resolve_policy(spec: &str, cfg: &ProblemConfig, sarsop_trials: usize) -> Result<Policy64> {
    match PolicyKind::from_str(spec) {
        Ok(kind) if kind.is_baseline() => Ok(Policy64::baseline(kind, cfg)),
        Ok(PolicyKind::Qmdp) => {
            let (p, report) = solve_qmdp::<f64>(cfg, 1e-6, 10_000)?;
            report.check(0.0)?;
            Ok(p)
        }
        Ok(_) => {
            let options = PointBasedOptions {
                max_trials: Some(sarsop_trials),
                time_budget: Duration::from_secs(24 * 3600),
                ..Default::default()
            };
            let (p, report) = solve_point_based::<f64>(cfg, &options)?;
            tracing::info!(bounds = ?report.bounds, trials = report.iterations, "solved sarsop inline");
            Ok(p)
        }
        Err(unknown) => {
            let path = Path::new(spec);
            if !path.exists() {
                bail!("{unknown}, and no policy file at {spec}");
            }
            load_policy::<f64>(path, cfg).with_context(|| format!("loading policy file {spec}"))
        }
    }
}

pub fn solve(args: SolveArgs) -> Result<ExitCode> {
    let cfg = args.source.load(None)?;
    let (policy, report) = match args.solver {
        Solver::Qmdp => solve_qmdp::<f64>(&cfg, args.tol, args.max_iter)?,
        Solver::Sarsop => {
            let options = PointBasedOptions {
                precision: args.precision,
                time_budget: Duration::from_secs_f64(args.time_budget),
                max_trials: args.max_trials,
                qmdp_tol: args.tol,
                qmdp_max_iter: args.max_iter,
            };
            solve_point_based::<f64>(&cfg, &options)?
        }
    };
    save_policy(&policy, &args.out)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Err(e) = report.check(args.time_budget) {
        if args.allow_nonconverged {
            tracing::warn!("{e}");
        } else {
            eprintln!("error: {e} (policy written; pass --allow-nonconverged to accept it)");
            return Ok(ExitCode::FAILURE);
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let cfg = args.source.load(None)?;
    let policies = args
        .policies
        .iter()
        .map(|spec| {
            let p = resolve_policy(spec, &cfg, args.sarsop_trials)?;
            Ok((spec.clone(), p))
        })
        .collect::<Result<Vec<_>>>()?;
    let named: Vec<(String, &Policy64)> = policies.iter().map(|(n, p)| (n.clone(), p)).collect();
    let outcomes = run_batch(&cfg, &named, args.episodes as usize, args.seed, args.workers)?;
    create_dir(&args.out_dir)?;
    let csv_path = args.out_dir.join(EPISODES_CSV);
    let file = fs::File::create(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    write_episodes_csv(BufWriter::new(file), &outcomes)?;
    let summary = SimulationSummary {
        config_fingerprint: cfg.fingerprint(),
        config: cfg,
        seed: args.seed,
        episodes: args.episodes,
        policies: outcomes,
    };
    write_json(&args.out_dir.join(SUMMARY_JSON), &summary)?;
    Ok(ExitCode::SUCCESS)
}

pub fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let cfg = args.source.load(Some("medium"))?;
    if args.grid.is_empty() {
        bail!("--grid must list at least one weight");
    }
    let n = args.episodes as usize;
    let points = pareto_sweep::<f64>(&cfg, &args.grid, n, args.seed, args.workers)?;
    let baselines = baseline_points::<f64>(&cfg, n, args.seed, args.workers)?;
    let frontier = pareto_frontier(&points);
    create_dir(&args.out_dir)?;
    let open = |name: &str| -> Result<BufWriter<fs::File>> {
        let path = args.out_dir.join(name);
        Ok(BufWriter::new(fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?))
    };
    write_sweep_csv(open(SWEEP_CSV)?, &points)?;
    write_sweep_csv(open(FRONTIER_CSV)?, &frontier)?;
    let report = SweepReport {
        base: cfg,
        episodes: n,
        seed: args.seed,
        points,
        frontier,
        baselines,
    };
    write_json(&args.out_dir.join(SWEEP_JSON), &report)?;
    Ok(ExitCode::SUCCESS)
}

pub fn scenario(args: ScenarioArgs) -> Result<ExitCode> {
    let cfg = args.source.load(Some("extra-large"))?;
    let policy = resolve_policy(&args.policy, &cfg, args.sarsop_trials)?;
    let trace = scenario_trace(&cfg, &policy, args.initial_completion, args.seed)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_json(&args.out, &trace)?;
    Ok(ExitCode::SUCCESS)
}

pub fn serve(args: ServeArgs) -> Result<ExitCode> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
            .await
            .with_context(|| format!("binding {}:{}", args.host, args.port))?;
        eprintln!("serving on http://{}", listener.local_addr()?);
        let options = announce_service::ServeOptions {
            policies_dir: args.policies_dir,
            snapshot: args.snapshot,
        };
        announce_service::serve(listener, options, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(ExitCode::SUCCESS)
}
