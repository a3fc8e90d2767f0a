//! Discrete Bayes filter over the true completion week.
//!
//! The observable part of the state is tracked exactly alongside the mass
//! vector, so a belief is always a distribution over completion weeks at one
//! known `(t, announcement)` pair. One filter step is split into
//! [`Belief::predict`] (announcement and replanning delay) and
//! [`Belief::correct`] (estimate likelihood and survival), which lets the
//! first estimate at `t = 0` be absorbed before any announcement is made.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Action, HiddenState, Model, ObservableState, Observation, ProblemConfig, Weeks};
use crate::scalar::Real;

/// Unnormalized posterior mass below this is treated as impossible evidence.
pub const LIKELIHOOD_FLOOR: f64 = 1e-300;

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BeliefError<T: Real> {
    /// The evidence has zero probability under the predicted belief. The
    /// prediction is returned so the caller can fall back to it.
    #[error("observation {estimate} has zero likelihood under the current belief")]
    ZeroLikelihood { estimate: Weeks, predicted: Belief<T> },
    #[error("observation {0} outside the completion range")]
    OutOfRange(Weeks),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefEntry<T> {
    pub completion: Weeks,
    pub probability: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Belief<T> {
    observable: ObservableState,
    t_min: Weeks,
    mass: Vec<T>,
}

impl<T: Real> Belief<T> {
    /// Uniform over all completion weeks, before any announcement.
    pub fn initial(config: &ProblemConfig) -> Self {
        let n = config.n_weeks();
        Self {
            observable: ObservableState::new(0, config.t_min),
            t_min: config.t_min,
            mass: vec![T::one() / T::of(n as f64); n],
        }
    }

    /// Builds a belief from explicit masses over `t_min..`; the masses are
    /// normalized.
    pub fn from_mass(config: &ProblemConfig, observable: ObservableState, mass: Vec<T>) -> Self {
        assert_eq!(mass.len(), config.n_weeks(), "mass length must match completion range");
        let total: T = mass.iter().copied().sum();
        assert!(total > T::zero(), "belief needs positive mass");
        Self {
            observable,
            t_min: config.t_min,
            mass: mass.into_iter().map(|m| m / total).collect(),
        }
    }

    pub fn point(config: &ProblemConfig, observable: ObservableState, completion: Weeks) -> Self {
        let mut mass = vec![T::zero(); config.n_weeks()];
        mass[config.week_index(completion)] = T::one();
        Self {
            observable,
            t_min: config.t_min,
            mass,
        }
    }

    pub fn observable(&self) -> ObservableState {
        self.observable
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub fn prob(&self, completion: Weeks) -> T {
        completion
            .checked_sub(self.t_min)
            .and_then(|i| self.mass.get(i as usize).copied())
            .unwrap_or_else(T::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Weeks, T)> + '_ {
        self.mass.iter().enumerate().map(|(i, &p)| (self.t_min + i as Weeks, p))
    }

    /// True once all mass sits on completion weeks at or before the current week.
    pub fn is_completed(&self) -> bool {
        self.iter().all(|(y, p)| y <= self.observable.t || p == T::zero())
    }

    /// Pushes the belief through the announcement: the observable part moves
    /// deterministically and completion weeks shift under the delay kernel.
    pub fn predict(&self, model: &Model<T>, action: Action) -> Belief<T> {
        let x = self.observable;
        let x_next = if self.is_completed() {
            ObservableState::new(x.t, action.announce)
        } else {
            ObservableState::new(x.t + 1, action.announce)
        };
        let mut next = vec![T::zero(); self.mass.len()];
        for (y, p) in self.iter() {
            if p == T::zero() {
                continue;
            }
            for (y_next, q) in model.hidden_successors(x, y, action.announce).iter() {
                let i = (y_next - self.t_min) as usize;
                next[i] = next[i] + p * q;
            }
        }
        Belief {
            observable: x_next,
            t_min: self.t_min,
            mass: next,
        }
    }

    /// Conditions on an estimate and on whether the project has finished by
    /// the current week.
    pub fn correct(&self, model: &Model<T>, obs: Observation, completed: bool) -> Result<Belief<T>, BeliefError<T>> {
        if !model.config().contains(obs.estimate) {
            return Err(BeliefError::OutOfRange(obs.estimate));
        }
        let t = self.observable.t;
        let mut post: Vec<T> = self
            .iter()
            .map(|(y, p)| {
                if completed != (y <= t) || p == T::zero() {
                    T::zero()
                } else {
                    p * model.observation_prob(t, y, obs.estimate)
                }
            })
            .collect();
        let total: T = post.iter().copied().sum();
        if total.as_f64() <= LIKELIHOOD_FLOOR {
            return Err(BeliefError::ZeroLikelihood {
                estimate: obs.estimate,
                predicted: self.clone(),
            });
        }
        for p in &mut post {
            *p = *p / total;
        }
        Ok(Belief {
            observable: self.observable,
            t_min: self.t_min,
            mass: post,
        })
    }

    pub fn update(
        &self,
        model: &Model<T>,
        action: Action,
        obs: Observation,
        completed: bool,
    ) -> Result<Belief<T>, BeliefError<T>> {
        self.predict(model, action).correct(model, obs, completed)
    }

    /// Like [`Belief::correct`], but keeps the prediction when the evidence
    /// is impossible under it.
    pub fn correct_or_keep(&self, model: &Model<T>, obs: Observation, completed: bool) -> Belief<T> {
        match self.correct(model, obs, completed) {
            Ok(b) => b,
            Err(BeliefError::ZeroLikelihood { predicted, .. }) => {
                tracing::warn!(
                    estimate = obs.estimate,
                    t = self.observable.t,
                    "zero-likelihood observation, keeping predicted belief"
                );
                predicted
            }
            Err(e) => panic!("{e}"),
        }
    }

    /// Argmax of the mass; near-ties go to the earliest week.
    pub fn most_likely_completion(&self) -> HiddenState {
        let mut best = 0;
        for i in 1..self.mass.len() {
            if (self.mass[i] - self.mass[best]).as_f64() > TIE_TOL {
                best = i;
            }
        }
        HiddenState {
            true_completion: self.t_min + best as Weeks,
        }
    }

    pub fn total(&self) -> T {
        self.mass.iter().copied().sum()
    }

    pub fn dot(&self, values: &[T]) -> T {
        self.mass.iter().zip(values).map(|(&p, &v)| p * v).sum()
    }

    pub fn histogram(&self) -> Vec<BeliefEntry<T>> {
        self.iter()
            .map(|(completion, probability)| BeliefEntry { completion, probability })
            .collect()
    }

    pub(crate) fn with_observable(mut self, observable: ObservableState) -> Self {
        self.observable = observable;
        self
    }
}
