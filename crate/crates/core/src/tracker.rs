//! Week-by-week announcement loop shared by the simulator and the advisor
//! service: absorb the week's estimate, recommend, record the announcement.

use thiserror::Error;

use crate::belief::{Belief, BeliefError};
use crate::model::{Action, Model, ObservableState, Observation, Weeks};
use crate::policies::{evaluate, PolicyError};
use crate::scalar::Real;
use crate::solvers::Policy;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrackerError {
    #[error("an estimate was already submitted for week {0}; announce first")]
    AlreadyObserved(Weeks),
    #[error("no estimate submitted for week {0} yet")]
    AwaitingObservation(Weeks),
    #[error("the project has completed")]
    Completed,
    #[error("estimate {estimate} outside [{t_min}, {t_max}]")]
    OutOfRange { estimate: Weeks, t_min: Weeks, t_max: Weeks },
    #[error("announcement {announce} outside [{t_min}, {t_max}]")]
    AnnouncementOutOfRange { announce: Weeks, t_min: Weeks, t_max: Weeks },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    AwaitingObservation,
    AwaitingAnnouncement,
    Completed,
}

#[derive(Debug, Clone)]
pub struct Tracker<T> {
    /// Belief before this week's estimate.
    predicted: Belief<T>,
    /// Belief after this week's estimate, until the announcement is made.
    current: Option<Belief<T>>,
    completion_reported: bool,
    observations: Vec<Observation>,
    announcements: Vec<Weeks>,
    phase: Phase,
}

impl<T: Real> Tracker<T> {
    pub fn new(model: &Model<T>) -> Self {
        Self {
            predicted: Belief::initial(model.config()),
            current: None,
            completion_reported: false,
            observations: Vec::new(),
            announcements: Vec::new(),
            phase: Phase::AwaitingObservation,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn observable(&self) -> ObservableState {
        self.predicted.observable()
    }

    pub fn clock(&self) -> Weeks {
        self.observable().t
    }

    /// The latest belief: after the estimate if one is pending, otherwise
    /// the prediction for the coming week.
    pub fn belief(&self) -> &Belief<T> {
        self.current.as_ref().unwrap_or(&self.predicted)
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn announcements(&self) -> &[Weeks] {
        &self.announcements
    }

    pub fn observe(&mut self, model: &Model<T>, obs: Observation, completed: bool) -> Result<&Belief<T>, TrackerError> {
        match self.phase {
            Phase::Completed => return Err(TrackerError::Completed),
            Phase::AwaitingAnnouncement => return Err(TrackerError::AlreadyObserved(self.clock())),
            Phase::AwaitingObservation => {}
        }
        let cfg = model.config();
        if !cfg.contains(obs.estimate) {
            return Err(TrackerError::OutOfRange {
                estimate: obs.estimate,
                t_min: cfg.t_min,
                t_max: cfg.t_max,
            });
        }
        let belief = match self.predicted.correct(model, obs, completed) {
            Ok(b) => b,
            Err(BeliefError::ZeroLikelihood { predicted, .. }) => {
                tracing::warn!(
                    estimate = obs.estimate,
                    t = self.clock(),
                    completed,
                    "estimate impossible under the current belief; keeping the prediction"
                );
                predicted
            }
            Err(BeliefError::OutOfRange(_)) => unreachable!("range checked above"),
        };
        self.observations.push(obs);
        self.completion_reported = completed;
        self.current = Some(belief);
        self.phase = Phase::AwaitingAnnouncement;
        Ok(self.current.as_ref().unwrap())
    }

    pub fn recommend(&self, policy: &Policy<T>) -> Result<Action, PolicyError> {
        evaluate(policy, self.observable(), self.belief(), &self.observations)
    }

    /// Records the announcement actually made and moves to the next week.
    pub fn announce(&mut self, model: &Model<T>, action: Action) -> Result<(), TrackerError> {
        match self.phase {
            Phase::Completed => return Err(TrackerError::Completed),
            Phase::AwaitingObservation => return Err(TrackerError::AwaitingObservation(self.clock())),
            Phase::AwaitingAnnouncement => {}
        }
        let cfg = model.config();
        if !cfg.contains(action.announce) {
            return Err(TrackerError::AnnouncementOutOfRange {
                announce: action.announce,
                t_min: cfg.t_min,
                t_max: cfg.t_max,
            });
        }
        let belief = self.current.take().expect("belief after observation");
        self.announcements.push(action.announce);
        if self.completion_reported {
            self.predicted = belief.clone().with_observable(ObservableState::new(belief.observable().t, action.announce));
            self.phase = Phase::Completed;
        } else {
            self.predicted = belief.predict(model, action);
            self.phase = Phase::AwaitingObservation;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProblemConfig;

    fn model() -> Model<f64> {
        Model::new(ProblemConfig::preset("small").unwrap()).unwrap()
    }

    #[test]
    fn phases_are_enforced() {
        let m = model();
        let mut tr = Tracker::new(&m);
        assert_eq!(
            tr.announce(&m, Action { announce: 5 }),
            Err(TrackerError::AwaitingObservation(0))
        );
        assert!(matches!(
            tr.observe(&m, Observation { estimate: 40 }, false),
            Err(TrackerError::OutOfRange { .. })
        ));
        tr.observe(&m, Observation { estimate: 6 }, false).unwrap();
        assert!(matches!(
            tr.observe(&m, Observation { estimate: 6 }, false),
            Err(TrackerError::AlreadyObserved(0))
        ));
        tr.announce(&m, Action { announce: 6 }).unwrap();
        assert_eq!(tr.observable(), ObservableState::new(1, 6));
        tr.observe(&m, Observation { estimate: 1 + 1 }, false).unwrap();
        tr.announce(&m, Action { announce: 6 }).unwrap();
        assert_eq!(tr.clock(), 2);
    }

    #[test]
    fn completion_ends_the_session() {
        let m = model();
        let mut tr = Tracker::new(&m);
        for t in 0..3 {
            tr.observe(&m, Observation { estimate: 3 }, false).unwrap();
            tr.announce(&m, Action { announce: 3 }).unwrap();
            assert_eq!(tr.clock(), t + 1);
        }
        let b = tr.observe(&m, Observation { estimate: 3 }, true).unwrap();
        assert_eq!(b.prob(3), 1.0);
        tr.announce(&m, Action { announce: 3 }).unwrap();
        assert_eq!(tr.phase(), Phase::Completed);
        assert_eq!(
            tr.observe(&m, Observation { estimate: 3 }, false).map(|_| ()),
            Err(TrackerError::Completed)
        );
        assert_eq!(tr.announcements(), &[3, 3, 3, 3]);
    }
}
