use std::sync::Arc;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use announce_core::{
    Action, BeliefEntry, Model64, Observation, ObservableState, Phase, Policy64, PolicyKind, ProblemConfig, Tracker64,
    TrackerError, Weeks,
};

use crate::error::ServiceError;

/// How many announcements around the belief mode get expected values.
const CANDIDATES_NEAR_MODE: usize = 5;

/// One week of the session: the estimate, what the policy advised and what
/// was actually announced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: Weeks,
    pub estimate: Weeks,
    pub completed: bool,
    pub recommended: Weeks,
    pub announce: Option<Weeks>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub announce: Weeks,
    /// `None` for baselines, which carry no value function.
    pub expected_value: Option<f64>,
    pub keep_previous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub t: Weeks,
    pub recommended: Weeks,
    pub belief: Vec<BeliefEntry<f64>>,
    pub belief_mode: Weeks,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Completed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPhase {
    AwaitingObservation,
    AwaitingAnnouncement,
    Completed,
}

impl From<Phase> for SessionPhase {
    fn from(p: Phase) -> Self {
        match p {
            Phase::AwaitingObservation => SessionPhase::AwaitingObservation,
            Phase::AwaitingAnnouncement => SessionPhase::AwaitingAnnouncement,
            Phase::Completed => SessionPhase::Completed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: Uuid,
    pub config: ProblemConfig,
    pub config_name: Option<String>,
    pub config_fingerprint: String,
    pub policy: String,
    pub status: SessionStatus,
    pub phase: SessionPhase,
    pub clock: Weeks,
    pub observable: ObservableState,
    pub belief: Vec<BeliefEntry<f64>>,
    pub history: Vec<StepRecord>,
    pub last_recommendation: Option<Recommendation>,
}

/// What a snapshot keeps: enough to replay the session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub id: Uuid,
    pub config: ProblemConfig,
    pub config_name: Option<String>,
    pub policy: PolicyKind,
    pub history: Vec<StepRecord>,
}

pub struct Session {
    id: Uuid,
    config_name: Option<String>,
    model: Arc<Model64>,
    policy: Arc<Policy64>,
    tracker: Tracker64,
    history: Vec<StepRecord>,
    last_recommendation: Option<Recommendation>,
}

impl Session {
    pub fn new(id: Uuid, config_name: Option<String>, model: Arc<Model64>, policy: Arc<Policy64>) -> Self {
        let tracker = Tracker64::new(&model);
        Self {
            id,
            config_name,
            model,
            policy,
            tracker,
            history: Vec::new(),
            last_recommendation: None,
        }
    }

    pub fn id(&self) -> Uuid {
        self.id
    }

    fn tracker_error(id: Uuid, e: TrackerError) -> ServiceError {
        match e {
            TrackerError::Completed => ServiceError::SessionCompleted(id),
            TrackerError::OutOfRange { estimate, t_min, t_max } => ServiceError::OutOfRange { estimate, t_min, t_max },
            TrackerError::AnnouncementOutOfRange {
                announce,
                t_min,
                t_max,
            } => ServiceError::OutOfRange {
                estimate: announce,
                t_min,
                t_max,
            },
            e @ (TrackerError::AlreadyObserved(_) | TrackerError::AwaitingObservation(_)) => {
                ServiceError::WrongPhase(e.to_string())
            }
        }
    }

    pub fn observe(&mut self, estimate: Weeks, completed: bool) -> Result<Recommendation, ServiceError> {
        let t = self.tracker.clock();
        let id = self.id;
        self.tracker
            .observe(&self.model, Observation { estimate }, completed)
            .map_err(|e| Self::tracker_error(id, e))?;
        let recommended = self
            .tracker
            .recommend(&self.policy)
            .map_err(|e| ServiceError::Internal(e.to_string()))?
            .announce;
        let belief = self.tracker.belief();
        let mode = belief.most_likely_completion().true_completion;
        let values = self.policy.action_values(belief).ok();
        let prev = self.tracker.observable().prev_announce;
        let cfg = self.model.config();
        let mut weeks: Vec<Weeks> = cfg.weeks().collect();
        weeks.sort_by_key(|&w| (w.abs_diff(mode), w));
        weeks.truncate(CANDIDATES_NEAR_MODE);
        weeks.sort_unstable();
        let keep_prev_listed = weeks.contains(&prev);
        if !keep_prev_listed {
            weeks.push(prev);
        }
        let candidates = weeks
            .into_iter()
            .map(|w| Candidate {
                announce: w,
                expected_value: values
                    .as_ref()
                    .and_then(|vs| vs.iter().find(|(a, _)| *a == w).map(|(_, v)| *v)),
                keep_previous: w == prev,
            })
            .collect();
        let rec = Recommendation {
            t,
            recommended,
            belief: belief.histogram(),
            belief_mode: mode,
            candidates,
        };
        self.history.push(StepRecord {
            t,
            estimate,
            completed,
            recommended,
            announce: None,
        });
        self.last_recommendation = Some(rec.clone());
        Ok(rec)
    }

    pub fn announce(&mut self, announce: Weeks) -> Result<(), ServiceError> {
        self.tracker
            .announce(&self.model, Action { announce })
            .map_err(|e| Self::tracker_error(self.id, e))?;
        if let Some(step) = self.history.last_mut() {
            step.announce = Some(announce);
        }
        Ok(())
    }

    pub fn view(&self) -> SessionView {
        let cfg = self.model.config();
        let phase = SessionPhase::from(self.tracker.phase());
        SessionView {
            id: self.id,
            config: cfg.clone(),
            config_name: self.config_name.clone(),
            config_fingerprint: cfg.fingerprint(),
            policy: self.policy.kind().to_string(),
            status: if phase == SessionPhase::Completed {
                SessionStatus::Completed
            } else {
                SessionStatus::Active
            },
            phase,
            clock: self.tracker.clock(),
            observable: self.tracker.observable(),
            belief: self.tracker.belief().histogram(),
            history: self.history.clone(),
            last_recommendation: self.last_recommendation.clone(),
        }
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            id: self.id,
            config: self.model.config().clone(),
            config_name: self.config_name.clone(),
            policy: self.policy.kind(),
            history: self.history.clone(),
        }
    }

    /// Rebuilds a session by replaying its recorded steps.
    pub fn replay(
        snapshot: &SessionSnapshot,
        model: Arc<Model64>,
        policy: Arc<Policy64>,
    ) -> Result<Self, ServiceError> {
        let mut s = Self::new(snapshot.id, snapshot.config_name.clone(), model, policy);
        for step in &snapshot.history {
            s.observe(step.estimate, step.completed)?;
            if let Some(a) = step.announce {
                s.announce(a)?;
            }
        }
        Ok(s)
    }
}
