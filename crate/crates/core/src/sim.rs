//! Episode simulation under common random numbers, and batch metrics.
//!
//! Randomness is shared across policies at the quantile level: episode `i`
//! draws one uniform quantile per week for the estimate and one for the
//! replanning delay, and every policy pushes those same quantiles through
//! the inverse CDFs of its own kernels. Policies that announce identically
//! therefore see identical trajectories, and policies that diverge still
//! share their randomness.

use std::io::Write;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::BeliefEntry;
use crate::model::{inverse_cdf, Model, ModelError, Observation, ProblemConfig, Weeks};
use crate::policies::PolicyError;
use crate::scalar::Real;
use crate::solvers::Policy;
use crate::tracker::Tracker;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("policy {policy} was solved for config {found}, expected {expected}")]
    ConfigMismatch {
        policy: String,
        expected: String,
        found: String,
    },
    #[error("initial completion {0} outside the completion range")]
    InitialOutOfRange(Weeks),
    #[error("episode count must be at least 1")]
    NoEpisodes,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("building worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-episode randomness, fully determined by `(master_seed, episode)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayStream {
    pub seed: u64,
    pub initial: f64,
    /// Estimate quantile for each week.
    pub observation: Vec<f64>,
    /// Delay quantile for each week.
    pub delay: Vec<f64>,
}

impl ReplayStream {
    pub fn new(master_seed: u64, episode: u64, config: &ProblemConfig) -> Self {
        let seed = splitmix64(master_seed ^ splitmix64(episode));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weeks = config.t_max as usize + 1;
        let initial = rng.sample(Open01);
        let mut observation = Vec::with_capacity(weeks);
        let mut delay = Vec::with_capacity(weeks);
        for _ in 0..weeks {
            observation.push(rng.sample(Open01));
            delay.push(rng.sample(Open01));
        }
        Self {
            seed,
            initial,
            observation,
            delay,
        }
    }

    /// Uniform draw of the initial completion week.
    pub fn initial_completion(&self, config: &ProblemConfig) -> Weeks {
        let n = config.n_weeks();
        let k = ((self.initial * n as f64) as usize).min(n - 1);
        config.week_at(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub t: Weeks,
    pub true_completion: Weeks,
    pub observation: Weeks,
    pub action: Weeks,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub steps: Vec<EpisodeStep>,
    pub initial_completion: Weeks,
    pub final_completion: Weeks,
    /// Discounted sum of rewards.
    pub total_reward: f64,
    pub undiscounted_reward: f64,
    pub num_changes: u32,
    pub completion_increase: Weeks,
    pub cumulative_error: Weeks,
    pub pre_completion_steps: u32,
}

impl EpisodeRecord {
    /// Cumulative error over the steps before completion, per step.
    pub fn error_per_step(&self) -> f64 {
        if self.pre_completion_steps == 0 {
            0.0
        } else {
            self.cumulative_error as f64 / self.pre_completion_steps as f64
        }
    }
}

/// One scenario step's belief, kept for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    pub t: Weeks,
    pub mode: Weeks,
    pub belief: Vec<BeliefEntry<f64>>,
}

fn check_policy<T: Real>(config: &ProblemConfig, policy: &Policy<T>) -> Result<(), SimError> {
    if !policy.matches(config) {
        return Err(SimError::ConfigMismatch {
            policy: policy.kind().to_string(),
            expected: config.fingerprint(),
            found: policy.config_fingerprint().to_string(),
        });
    }
    Ok(())
}

fn simulate<T: Real>(
    model: &Model<T>,
    policy: &Policy<T>,
    replay: &ReplayStream,
    initial: Weeks,
    mut snapshots: Option<&mut Vec<BeliefSnapshot>>,
) -> Result<EpisodeRecord, SimError> {
    let cfg = model.config();
    let mut tracker = Tracker::new(model);
    let mut y = initial;
    let mut steps = Vec::new();
    let mut total_reward = 0.0;
    let mut undiscounted = 0.0;
    let mut weight = 1.0;
    let mut num_changes = 0;
    let mut cumulative_error = 0;
    let mut pre_completion_steps = 0;
    loop {
        let x = tracker.observable();
        let t = x.t;
        let completed = t >= y;
        let row = model.observation_row(t, y);
        let u = replay.observation[t as usize];
        let estimate = inverse_cdf(cfg.weeks().zip(row.iter().map(|p| p.as_f64())), u);
        let belief = tracker
            .observe(model, Observation { estimate }, completed)
            .expect("tracker accepts in-range estimates");
        if let Some(snaps) = snapshots.as_deref_mut() {
            snaps.push(BeliefSnapshot {
                t,
                mode: belief.most_likely_completion().true_completion,
                belief: belief
                    .iter()
                    .map(|(completion, p)| BeliefEntry {
                        completion,
                        probability: p.as_f64(),
                    })
                    .collect(),
            });
        }
        let action = tracker.recommend(policy)?;
        let reward = model.reward(x, crate::model::HiddenState { true_completion: y }, action).as_f64();
        debug_assert!(reward <= 0.0);
        total_reward += weight * reward;
        undiscounted += reward;
        weight *= cfg.discount;
        if steps.last().is_some_and(|s: &EpisodeStep| s.action != action.announce) {
            num_changes += 1;
        }
        if !completed {
            cumulative_error += action.announce.abs_diff(y);
            pre_completion_steps += 1;
        }
        steps.push(EpisodeStep {
            t,
            true_completion: y,
            observation: estimate,
            action: action.announce,
            reward,
        });
        if completed {
            break;
        }
        let y_next = model
            .hidden_successors(x, y, action.announce)
            .inverse_cdf(replay.delay[t as usize]);
        tracker.announce(model, action).expect("announcement follows an estimate");
        y = y_next;
    }
    Ok(EpisodeRecord {
        seed: replay.seed,
        initial_completion: initial,
        final_completion: y,
        completion_increase: y - initial,
        total_reward,
        undiscounted_reward: undiscounted,
        num_changes,
        cumulative_error,
        pre_completion_steps,
        steps,
    })
}

/// Simulates one episode; the initial completion week comes from the replay.
pub fn run_episode<T: Real>(
    model: &Model<T>,
    policy: &Policy<T>,
    replay: &ReplayStream,
) -> Result<EpisodeRecord, SimError> {
    check_policy(model.config(), policy)?;
    simulate(model, policy, replay, replay.initial_completion(model.config()), None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_undiscounted_reward: f64,
    pub mean_changes: f64,
    pub mean_completion_increase: f64,
    pub mean_cumulative_error: f64,
    pub mean_error_per_step: f64,
    pub n_episodes: usize,
}

impl MetricsSummary {
    pub fn from_episodes(episodes: &[EpisodeRecord]) -> Self {
        let n = episodes.len();
        let mean = |f: &dyn Fn(&EpisodeRecord) -> f64| episodes.iter().map(f).sum::<f64>() / n as f64;
        let mean_reward = mean(&|e| e.total_reward);
        let std_reward = if n > 1 {
            let ss: f64 = episodes.iter().map(|e| (e.total_reward - mean_reward).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean_reward,
            std_reward,
            mean_undiscounted_reward: mean(&|e| e.undiscounted_reward),
            mean_changes: mean(&|e| e.num_changes as f64),
            mean_completion_increase: mean(&|e| e.completion_increase as f64),
            mean_cumulative_error: mean(&|e| e.cumulative_error as f64),
            mean_error_per_step: mean(&|e| e.error_per_step()),
            n_episodes: n,
        }
    }

    /// Standard error of the mean reward.
    pub fn reward_std_error(&self) -> f64 {
        self.std_reward / (self.n_episodes as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub policy: String,
    pub summary: MetricsSummary,
    #[serde(skip)]
    pub episodes: Vec<EpisodeRecord>,
}

/// Runs `n` CRN episodes per policy inside the current rayon pool.
pub(crate) fn batch_in_pool<T: Real>(
    model: &Model<T>,
    policies: &[(String, &Policy<T>)],
    n: usize,
    master_seed: u64,
) -> Result<Vec<PolicyOutcome>, SimError> {
    let cfg = model.config();
    let streams: Vec<ReplayStream> = (0..n as u64)
        .into_par_iter()
        .map(|i| ReplayStream::new(master_seed, i, cfg))
        .collect();
    policies
        .iter()
        .map(|(name, policy)| {
            let episodes = streams
                .par_iter()
                .map(|replay| run_episode(model, policy, replay))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(PolicyOutcome {
                policy: name.clone(),
                summary: MetricsSummary::from_episodes(&episodes),
                episodes,
            })
        })
        .collect()
}

pub(crate) fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, SimError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    Ok(builder.build()?.install(f))
}

/// Evaluates every policy on the same `n` replay streams. Results are
/// returned in input order and do not depend on the worker count.
pub fn run_batch<T: Real>(
    config: &ProblemConfig,
    policies: &[(String, &Policy<T>)],
    n: usize,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<Vec<PolicyOutcome>, SimError> {
    if n == 0 {
        return Err(SimError::NoEpisodes);
    }
    for (_, p) in policies {
        check_policy(config, p)?;
    }
    let model = Model::<T>::new(config.clone())?;
    with_workers(workers, || batch_in_pool(&model, policies, n, master_seed))?
}

/// Writes one row per `(policy, episode)`.
pub fn write_episodes_csv(out: impl Write, outcomes: &[PolicyOutcome]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "seed",
        "policy",
        "initial_completion",
        "final_completion",
        "total_reward",
        "num_changes",
        "completion_increase",
        "cumulative_error",
    ])?;
    for outcome in outcomes {
        for e in &outcome.episodes {
            w.write_record([
                e.seed.to_string(),
                outcome.policy.clone(),
                e.initial_completion.to_string(),
                e.final_completion.to_string(),
                e.total_reward.to_string(),
                e.num_changes.to_string(),
                e.completion_increase.to_string(),
                e.cumulative_error.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A single pinned-start episode with the belief captured every week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTrace {
    pub policy: String,
    pub config: ProblemConfig,
    pub seed: u64,
    pub record: EpisodeRecord,
    pub beliefs: Vec<BeliefSnapshot>,
}

pub fn scenario_trace<T: Real>(
    config: &ProblemConfig,
    policy: &Policy<T>,
    fixed_initial_completion: Weeks,
    seed: u64,
) -> Result<ScenarioTrace, SimError> {
    if !config.contains(fixed_initial_completion) {
        return Err(SimError::InitialOutOfRange(fixed_initial_completion));
    }
    check_policy(config, policy)?;
    let model = Model::<T>::new(config.clone())?;
    let replay = ReplayStream::new(seed, 0, config);
    let mut beliefs = Vec::new();
    let record = simulate(&model, policy, &replay, fixed_initial_completion, Some(&mut beliefs))?;
    Ok(ScenarioTrace {
        policy: policy.kind().to_string(),
        config: config.clone(),
        seed,
        record,
        beliefs,
    })
}
