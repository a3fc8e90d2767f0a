//! Offline policy synthesis and the alpha-vector policy representation.

mod persist;
pub mod point_based;
pub mod qmdp;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::Belief;
use crate::model::{ObservableState, ProblemConfig, StateSpace, Weeks};
use crate::scalar::Real;

pub use persist::{load_policy, save_policy, PolicyFile, POLICY_FORMAT_VERSION};
pub use point_based::{solve_point_based, PointBasedOptions};
pub use qmdp::{solve_qmdp, QmdpSolution};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("value iteration did not converge: residual {residual:e} after {iterations} sweeps")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("time budget of {budget_s} s exhausted with bound gap {gap:e}")]
    TimeBudgetExceeded { budget_s: f64, gap: f64 },
    #[error("policy file format error: {0}")]
    Format(String),
    #[error("policy was solved for config {found}, expected {expected}")]
    ConfigMismatch { expected: String, found: String },
    #[error("{0} policies carry no alpha vectors")]
    NoAlphas(PolicyKind),
    #[error("no alpha vector stored for observable state {0}")]
    MissingObservable(ObservableState),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Qmdp,
    PointBased,
    LastObserved,
    MostLikely,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Qmdp,
        PolicyKind::PointBased,
        PolicyKind::MostLikely,
        PolicyKind::LastObserved,
    ];

    /// Short display name used on the command line and in reports.
    pub fn cli_name(self) -> &'static str {
        match self {
            PolicyKind::Qmdp => "qmdp",
            PolicyKind::PointBased => "sarsop",
            PolicyKind::LastObserved => "observedtime",
            PolicyKind::MostLikely => "mostlikely",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, PolicyKind::LastObserved | PolicyKind::MostLikely)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown policy kind {0:?} (expected qmdp, sarsop, mostlikely or observedtime)")]
pub struct UnknownPolicyKind(pub String);

impl FromStr for PolicyKind {
    type Err = UnknownPolicyKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qmdp" => Ok(PolicyKind::Qmdp),
            "sarsop" | "point_based" => Ok(PolicyKind::PointBased),
            "observedtime" | "last_observed" => Ok(PolicyKind::LastObserved),
            "mostlikely" | "most_likely" => Ok(PolicyKind::MostLikely),
            other => Err(UnknownPolicyKind(other.to_string())),
        }
    }
}

/// A linear value function over completion weeks (factored form) or over the
/// whole flat state space (QMDP form), tagged with the announcement it
/// recommends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector<T> {
    pub action: Weeks,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableState>,
    pub values: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    NonConvergence,
    TimeBudgetExceeded,
    TrialLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: PolicyKind,
    pub status: SolveStatus,
    pub iterations: usize,
    pub residual: f64,
    pub wall_time: f64,
    /// `(lower, upper)` value at the initial belief.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<(f64, f64)>,
    /// Bounds after each trial, for solvers that track them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bound_trace: Vec<(f64, f64)>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Turns a non-converged report into the matching error.
    pub fn check(&self, time_budget_s: f64) -> Result<(), SolverError> {
        match self.status {
            SolveStatus::Converged => Ok(()),
            SolveStatus::NonConvergence => Err(SolverError::NonConvergence {
                iterations: self.iterations,
                residual: self.residual,
            }),
            SolveStatus::TimeBudgetExceeded | SolveStatus::TrialLimit => Err(SolverError::TimeBudgetExceeded {
                budget_s: time_budget_s,
                gap: self.residual,
            }),
        }
    }
}

/// Deterministic choice among `(action, value)` candidates: highest value,
/// then keeping `prev`, then the earliest week.
pub fn select_action<T: Real>(candidates: impl IntoIterator<Item = (Weeks, T)>, prev: Weeks) -> Option<(Weeks, T)> {
    let mut best: Option<(Weeks, T)> = None;
    for (a, v) in candidates {
        best = match best {
            None => Some((a, v)),
            Some((ba, bv)) => {
                let scale = T::one().max(bv.abs()).max(v.abs());
                let tol = scale * T::of(1e-12);
                if v > bv + tol {
                    Some((a, v))
                } else if (v - bv).abs() <= tol && prefers(a, ba, prev) {
                    Some((a, v))
                } else {
                    Some((ba, bv))
                }
            }
        };
    }
    best
}

fn prefers(a: Weeks, incumbent: Weeks, prev: Weeks) -> bool {
    if incumbent == prev {
        return false;
    }
    a == prev || a < incumbent
}

/// An announcement policy: alpha vectors for the planners, a rule tag for
/// the baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<T> {
    kind: PolicyKind,
    config_fingerprint: String,
    space: StateSpace,
    alphas: Vec<AlphaVector<T>>,
    /// Alpha indices per observable state (factored form only).
    by_observable: Vec<Vec<usize>>,
}

impl<T: Real> Policy<T> {
    pub fn baseline(kind: PolicyKind, config: &ProblemConfig) -> Self {
        assert!(kind.is_baseline(), "{kind} is not a baseline");
        Self {
            kind,
            config_fingerprint: config.fingerprint(),
            space: StateSpace::new(config),
            alphas: Vec::new(),
            by_observable: Vec::new(),
        }
    }

    pub fn last_observed(config: &ProblemConfig) -> Self {
        Self::baseline(PolicyKind::LastObserved, config)
    }

    pub fn most_likely(config: &ProblemConfig) -> Self {
        Self::baseline(PolicyKind::MostLikely, config)
    }

    pub(crate) fn from_alphas(
        kind: PolicyKind,
        config: &ProblemConfig,
        alphas: Vec<AlphaVector<T>>,
    ) -> Result<Self, SolverError> {
        let space = StateSpace::new(config);
        let mut by_observable = Vec::new();
        match kind {
            PolicyKind::Qmdp => {
                if alphas.len() != config.n_weeks() {
                    return Err(SolverError::Format(format!(
                        "qmdp policy needs {} alpha vectors, found {}",
                        config.n_weeks(),
                        alphas.len()
                    )));
                }
                for (i, alpha) in alphas.iter().enumerate() {
                    if alpha.action != config.week_at(i) || alpha.values.len() != space.len() {
                        return Err(SolverError::Format(format!(
                            "qmdp alpha {i} must announce week {} over {} states",
                            config.week_at(i),
                            space.len()
                        )));
                    }
                }
            }
            PolicyKind::PointBased => {
                by_observable = vec![Vec::new(); space.n_observable()];
                for (i, alpha) in alphas.iter().enumerate() {
                    let x = alpha
                        .observable
                        .ok_or_else(|| SolverError::Format(format!("alpha {i} has no observable state")))?;
                    if x.t > config.t_max || !config.contains(x.prev_announce) {
                        return Err(SolverError::Format(format!("alpha {i} has invalid observable state {x}")));
                    }
                    if alpha.values.len() != config.n_weeks() {
                        return Err(SolverError::Format(format!("alpha {i} has wrong length")));
                    }
                    by_observable[space.observable_index(x)].push(i);
                }
            }
            other => {
                if !alphas.is_empty() {
                    return Err(SolverError::Format(format!("{other} policy must not carry alpha vectors")));
                }
            }
        }
        if !config.contains_all(alphas.iter().map(|a| a.action)) {
            return Err(SolverError::Format("alpha action outside the completion range".into()));
        }
        if alphas.iter().any(|a| a.values.iter().any(|v| !v.is_finite())) {
            return Err(SolverError::Format("alpha vector has non-finite entries".into()));
        }
        Ok(Self {
            kind,
            config_fingerprint: config.fingerprint(),
            space,
            alphas,
            by_observable,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn config_fingerprint(&self) -> &str {
        &self.config_fingerprint
    }

    pub fn alphas(&self) -> &[AlphaVector<T>] {
        &self.alphas
    }

    pub fn matches(&self, config: &ProblemConfig) -> bool {
        self.config_fingerprint == config.fingerprint()
    }

    /// Expected value of each candidate announcement under the belief.
    ///
    /// QMDP policies score every action; point-based policies score each
    /// action that has an alpha vector at the belief's observable state, using
    /// the best such vector.
    pub fn action_values(&self, belief: &Belief<T>) -> Result<Vec<(Weeks, T)>, SolverError> {
        self.action_values_at(belief.observable(), belief)
    }

    /// As [`Policy::action_values`], with the observable state given explicitly.
    pub fn action_values_at(&self, x: ObservableState, belief: &Belief<T>) -> Result<Vec<(Weeks, T)>, SolverError> {
        match self.kind {
            PolicyKind::Qmdp => {
                let n = self.space.n_hidden();
                let base = self.space.observable_index(x) * n;
                Ok(self
                    .alphas
                    .iter()
                    .map(|alpha| (alpha.action, belief.dot(&alpha.values[base..base + n])))
                    .collect())
            }
            PolicyKind::PointBased => {
                let ids = &self.by_observable[self.space.observable_index(x)];
                if ids.is_empty() {
                    return Err(SolverError::MissingObservable(x));
                }
                let mut best: Vec<(Weeks, T)> = Vec::new();
                for &i in ids {
                    let alpha = &self.alphas[i];
                    let v = belief.dot(&alpha.values);
                    match best.iter_mut().find(|e| e.0 == alpha.action) {
                        Some(e) if v > e.1 => e.1 = v,
                        Some(_) => {}
                        None => best.push((alpha.action, v)),
                    }
                }
                best.sort_by_key(|e| e.0);
                Ok(best)
            }
            kind => Err(SolverError::NoAlphas(kind)),
        }
    }

    /// Greedy announcement over the alpha vectors.
    pub fn best_action(&self, belief: &Belief<T>) -> Result<(Weeks, T), SolverError> {
        self.best_action_at(belief.observable(), belief)
    }

    pub fn best_action_at(&self, x: ObservableState, belief: &Belief<T>) -> Result<(Weeks, T), SolverError> {
        let values = self.action_values_at(x, belief)?;
        Ok(select_action(values, x.prev_announce).expect("at least one candidate action"))
    }
}

impl ProblemConfig {
    fn contains_all(&self, mut weeks: impl Iterator<Item = Weeks>) -> bool {
        weeks.all(|w| self.contains(w))
    }
}
