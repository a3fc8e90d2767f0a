//! Baseline announcement rules and uniform dispatch over every policy kind.

use thiserror::Error;

use crate::belief::Belief;
use crate::model::{Action, ObservableState, Observation};
use crate::scalar::Real;
use crate::solvers::{Policy, PolicyKind, SolverError};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("no observation received yet")]
    NoObservation,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Announces the most recent estimate.
pub fn last_observed_action(history: &[Observation], _x: ObservableState) -> Result<Action, PolicyError> {
    history
        .last()
        .map(|o| Action { announce: o.estimate })
        .ok_or(PolicyError::NoObservation)
}

/// Announces the belief's most likely completion week.
pub fn most_likely_action<T: Real>(belief: &Belief<T>) -> Action {
    Action {
        announce: belief.most_likely_completion().true_completion,
    }
}

pub fn evaluate<T: Real>(
    policy: &Policy<T>,
    x: ObservableState,
    belief: &Belief<T>,
    history: &[Observation],
) -> Result<Action, PolicyError> {
    match policy.kind() {
        PolicyKind::LastObserved => last_observed_action(history, x),
        PolicyKind::MostLikely => Ok(most_likely_action(belief)),
        PolicyKind::Qmdp | PolicyKind::PointBased => {
            let (announce, _) = policy.best_action_at(x, belief)?;
            Ok(Action { announce })
        }
    }
}
