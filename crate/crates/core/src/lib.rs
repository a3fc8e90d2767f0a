//! Planning of project completion-date announcements under uncertainty.
//!
//! The problem is a mixed-observability MDP: the week and the announcement
//! in force are observed, the true completion week is not, and changing the
//! announcement can push the completion week out. The crate provides the
//! model kernels, a Bayes filter over the completion week, QMDP and
//! point-based solvers, two estimation-only baselines, a common-random-number
//! simulator and a reward-weight sweep.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the usual double-precision case.

pub mod belief;
pub mod model;
pub mod policies;
pub mod scalar;
pub mod sim;
pub mod solvers;
pub mod sweep;
pub mod tracker;

pub use belief::{Belief, BeliefEntry, BeliefError};
pub use model::{
    enumerate_states, Action, Categorical, HiddenState, Model, ModelError, ObservableState, Observation,
    ProblemConfig, State, StateSpace, Weeks,
};
pub use policies::{evaluate, last_observed_action, most_likely_action, PolicyError};
pub use scalar::Real;
pub use sim::{
    run_batch, run_episode, scenario_trace, EpisodeRecord, EpisodeStep, MetricsSummary, PolicyOutcome, ReplayStream,
    ScenarioTrace, SimError,
};
pub use solvers::{
    load_policy, save_policy, solve_point_based, solve_qmdp, AlphaVector, PointBasedOptions, Policy, PolicyKind,
    SolveReport, SolveStatus, SolverError,
};
pub use sweep::{pareto_frontier, pareto_sweep, SweepPoint};
pub use tracker::{Phase, Tracker, TrackerError};

pub type Model64 = Model<f64>;
pub type Belief64 = Belief<f64>;
pub type Policy64 = Policy<f64>;
pub type Tracker64 = Tracker<f64>;

pub type Model32 = Model<f32>;
pub type Belief32 = Belief<f32>;
pub type Policy32 = Policy<f32>;
