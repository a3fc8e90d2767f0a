//! Reward-weight sweeps over `(lambda_e, lambda_c)` and Pareto frontiers of
//! (prediction error, announcement changes).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{Model, ProblemConfig};
use crate::scalar::Real;
use crate::sim::{batch_in_pool, with_workers, PolicyOutcome, SimError};
use crate::solvers::{qmdp, Policy, PolicyKind};

/// Weights used for the error and change penalties in the reference sweep.
pub const PAPER_GRID: [f64; 8] = [0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda_e: f64,
    pub lambda_c: f64,
    /// Mean over episodes of cumulative error per pre-completion step.
    pub mean_error: f64,
    pub mean_cumulative_error: f64,
    pub mean_changes: f64,
    pub converged: bool,
}

impl SweepPoint {
    fn dominates(&self, other: &SweepPoint) -> bool {
        self.mean_error <= other.mean_error
            && self.mean_changes <= other.mean_changes
            && (self.mean_error < other.mean_error || self.mean_changes < other.mean_changes)
    }

    fn key(&self) -> (f64, f64) {
        (self.lambda_e, self.lambda_c)
    }
}

/// Baseline policies evaluated on the sweep's replay streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselinePoint {
    pub policy: String,
    pub mean_error: f64,
    pub mean_cumulative_error: f64,
    pub mean_changes: f64,
}

impl From<&PolicyOutcome> for BaselinePoint {
    fn from(o: &PolicyOutcome) -> Self {
        Self {
            policy: o.policy.clone(),
            mean_error: o.summary.mean_error_per_step,
            mean_cumulative_error: o.summary.mean_cumulative_error,
            mean_changes: o.summary.mean_changes,
        }
    }
}

/// Solves a QMDP policy for every `(lambda_e, lambda_c)` in `grid x grid`
/// (row-major, `lambda_e` outer) and evaluates each on the same replay
/// streams. `lambda_f` and all other parameters keep their base values.
pub fn pareto_sweep<T: Real>(
    base: &ProblemConfig,
    grid: &[f64],
    n_runs: usize,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<Vec<SweepPoint>, SimError> {
    assert!(!grid.is_empty(), "sweep grid must be nonempty");
    if n_runs == 0 {
        return Err(SimError::NoEpisodes);
    }
    base.validate()?;
    let cells: Vec<(f64, f64)> = grid
        .iter()
        .flat_map(|&e| grid.iter().map(move |&c| (e, c)))
        .collect();
    with_workers(workers, || {
        cells
            .par_iter()
            .map(|&(lambda_e, lambda_c)| sweep_cell::<T>(base, lambda_e, lambda_c, n_runs, master_seed))
            .collect()
    })?
}

fn sweep_cell<T: Real>(
    base: &ProblemConfig,
    lambda_e: f64,
    lambda_c: f64,
    n_runs: usize,
    master_seed: u64,
) -> Result<SweepPoint, SimError> {
    let mut cfg = base.clone();
    cfg.lambda_e = lambda_e;
    cfg.lambda_c = lambda_c;
    let model = Model::<T>::new(cfg)?;
    let (policy, _, report) =
        qmdp::solve_qmdp_with_model(&model, 1e-6, 10_000).expect("model validated above");
    if !report.converged() {
        tracing::warn!(lambda_e, lambda_c, residual = report.residual, "sweep cell did not converge");
    }
    let outcome = batch_in_pool(&model, &[(PolicyKind::Qmdp.to_string(), &policy)], n_runs, master_seed)?;
    let s = &outcome[0].summary;
    Ok(SweepPoint {
        lambda_e,
        lambda_c,
        mean_error: s.mean_error_per_step,
        mean_cumulative_error: s.mean_cumulative_error,
        mean_changes: s.mean_changes,
        converged: report.converged(),
    })
}

/// Evaluates both baselines on the sweep's replay streams.
pub fn baseline_points<T: Real>(
    base: &ProblemConfig,
    n_runs: usize,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<Vec<BaselinePoint>, SimError> {
    let observed = Policy::<T>::last_observed(base);
    let likely = Policy::<T>::most_likely(base);
    let outcomes = crate::sim::run_batch(
        base,
        &[
            (PolicyKind::LastObserved.to_string(), &observed),
            (PolicyKind::MostLikely.to_string(), &likely),
        ],
        n_runs,
        master_seed,
        workers,
    )?;
    Ok(outcomes.iter().map(BaselinePoint::from).collect())
}

/// Points not dominated in (error, changes), sorted by error. Points equal
/// in both coordinates collapse to the one with the smallest weights.
pub fn pareto_frontier(points: &[SweepPoint]) -> Vec<SweepPoint> {
    let mut sorted: Vec<&SweepPoint> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.mean_error
            .total_cmp(&b.mean_error)
            .then(a.mean_changes.total_cmp(&b.mean_changes))
            .then(a.lambda_e.total_cmp(&b.lambda_e))
            .then(a.lambda_c.total_cmp(&b.lambda_c))
    });
    let mut frontier: Vec<SweepPoint> = Vec::new();
    let mut best_changes = f64::INFINITY;
    for p in sorted {
        if p.mean_changes < best_changes {
            best_changes = p.mean_changes;
            frontier.push(p.clone());
        }
    }
    frontier
}

pub fn on_frontier(point: &SweepPoint, frontier: &[SweepPoint]) -> bool {
    frontier.iter().any(|f| f.key() == point.key())
}

/// True if some sweep point dominates the baseline's (error, changes).
pub fn dominated_by_any(baseline: &BaselinePoint, points: &[SweepPoint]) -> bool {
    let as_point = SweepPoint {
        lambda_e: f64::NAN,
        lambda_c: f64::NAN,
        mean_error: baseline.mean_error,
        mean_cumulative_error: baseline.mean_cumulative_error,
        mean_changes: baseline.mean_changes,
        converged: true,
    };
    points.iter().any(|p| p.dominates(&as_point))
}

pub fn write_sweep_csv(out: impl Write, points: &[SweepPoint]) -> Result<(), SimError> {
    let frontier = pareto_frontier(points);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda_e", "lambda_c", "mean_error", "mean_changes", "on_frontier"])?;
    for p in points {
        w.write_record([
            p.lambda_e.to_string(),
            p.lambda_c.to_string(),
            p.mean_error.to_string(),
            p.mean_changes.to_string(),
            u8::from(on_frontier(p, &frontier)).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Companion document to the sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub base: ProblemConfig,
    pub episodes: usize,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
    pub frontier: Vec<SweepPoint>,
    pub baselines: Vec<BaselinePoint>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(e: f64, c: f64, le: f64, lc: f64) -> SweepPoint {
        SweepPoint {
            lambda_e: le,
            lambda_c: lc,
            mean_error: e,
            mean_cumulative_error: e,
            mean_changes: c,
            converged: true,
        }
    }

    fn coords(ps: &[SweepPoint]) -> Vec<(f64, f64)> {
        ps.iter().map(|p| (p.mean_error, p.mean_changes)).collect()
    }

    #[test]
    fn mutually_nondominated_points_all_survive() {
        let ps = [pt(3.0, 1.0, 1.0, 1.0), pt(1.0, 5.0, 2.0, 1.0), pt(2.0, 3.0, 3.0, 1.0)];
        assert_eq!(coords(&pareto_frontier(&ps)), [(1.0, 5.0), (2.0, 3.0), (3.0, 1.0)]);
    }

    #[test]
    fn dominated_point_is_dropped() {
        let ps = [pt(1.0, 5.0, 1.0, 1.0), pt(1.0, 6.0, 2.0, 1.0)];
        assert_eq!(coords(&pareto_frontier(&ps)), [(1.0, 5.0)]);
    }

    #[test]
    fn exact_ties_keep_smallest_weights() {
        let ps = [pt(1.0, 5.0, 2.0, 1.0), pt(1.0, 5.0, 1.0, 8.0), pt(1.0, 5.0, 1.0, 3.0)];
        let f = pareto_frontier(&ps);
        assert_eq!(f.len(), 1);
        assert_eq!((f[0].lambda_e, f[0].lambda_c), (1.0, 3.0));
    }

    #[test]
    fn baseline_domination() {
        let ps = [pt(1.0, 2.0, 1.0, 1.0)];
        let b = |e, c| BaselinePoint {
            policy: "b".into(),
            mean_error: e,
            mean_cumulative_error: e,
            mean_changes: c,
        };
        assert!(dominated_by_any(&b(2.0, 3.0), &ps));
        assert!(dominated_by_any(&b(1.0, 3.0), &ps));
        assert!(!dominated_by_any(&b(1.0, 2.0), &ps));
        assert!(!dominated_by_any(&b(0.5, 9.0), &ps));
    }

    #[test]
    fn csv_marks_frontier() {
        let ps = [pt(1.0, 5.0, 1.0, 1.0), pt(1.0, 6.0, 2.0, 1.0)];
        let mut out = Vec::new();
        write_sweep_csv(&mut out, &ps).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "lambda_e,lambda_c,mean_error,mean_changes,on_frontier\n1,1,1,5,1\n2,1,1,6,0\n"
        );
    }
}
