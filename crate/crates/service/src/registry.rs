//! Policies available to sessions: baselines are built on request, solved
//! policies come from a directory of policy files or, for small problems, an
//! on-demand QMDP solve.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use announce_core::solvers::PolicyFile;
use announce_core::{solve_qmdp, Model64, Policy64, PolicyKind, ProblemConfig};

use crate::error::ServiceError;

/// Largest flat state space solved on demand.
pub const ON_DEMAND_STATE_LIMIT: usize = 20_000;

const QMDP_TOL: f64 = 1e-6;
const QMDP_MAX_ITER: usize = 10_000;

/// Entry in the `GET /policies` listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyInfo {
    pub policy: String,
    pub config_name: Option<String>,
    pub config_fingerprint: String,
    pub t_min: u32,
    pub t_max: u32,
    pub source: String,
}

type Key = (PolicyKind, String);

#[derive(Default)]
pub struct PolicyRegistry {
    policies: Mutex<HashMap<Key, (Arc<Policy64>, PolicyInfo)>>,
    models: Mutex<HashMap<String, Arc<Model64>>>,
}

fn preset_name(config: &ProblemConfig) -> Option<String> {
    let fp = config.fingerprint();
    ProblemConfig::PRESETS
        .iter()
        .find(|name| ProblemConfig::preset(name).is_ok_and(|c| c.fingerprint() == fp))
        .map(|name| name.to_string())
}

impl PolicyRegistry {
    /// Reads every `*.json` file in `dir`. Files that parse as a problem
    /// config are used, along with the presets, to resolve policy files by
    /// fingerprint. Policies whose config cannot be resolved are skipped.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let registry = Self::default();
        let mut configs: Vec<(Option<String>, ProblemConfig)> = ProblemConfig::PRESETS
            .iter()
            .map(|n| (Some(n.to_string()), ProblemConfig::preset(n).expect("preset")))
            .collect();
        let mut files: Vec<(std::path::PathBuf, PolicyFile<f64>)> = Vec::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<Vec<_>, _>>()?;
        entries.sort_by_key(|e| e.path());
        for entry in entries {
            let path = entry.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let text = std::fs::read_to_string(&path)?;
            if let Ok(cfg) = ProblemConfig::from_json(&text) {
                configs.push((preset_name(&cfg), cfg));
            } else if let Ok(file) = serde_json::from_str::<PolicyFile<f64>>(&text) {
                files.push((path, file));
            } else {
                tracing::warn!(path = %path.display(), "not a config or policy file; skipping");
            }
        }
        for (path, file) in files {
            let Some((name, cfg)) = configs
                .iter()
                .find(|(_, c)| c.fingerprint() == file.config_fingerprint)
                .cloned()
            else {
                tracing::warn!(path = %path.display(), "no known config matches this policy; skipping");
                continue;
            };
            match file.into_policy(&cfg) {
                Ok(policy) => {
                    tracing::info!(path = %path.display(), kind = %policy.kind(), "loaded policy");
                    registry.insert(policy, &cfg, name, "precomputed");
                }
                Err(e) => tracing::warn!(path = %path.display(), error = %e, "rejected policy file"),
            }
        }
        Ok(registry)
    }

    fn insert(&self, policy: Policy64, config: &ProblemConfig, config_name: Option<String>, source: &str) -> Arc<Policy64> {
        let info = PolicyInfo {
            policy: policy.kind().to_string(),
            config_name,
            config_fingerprint: config.fingerprint(),
            t_min: config.t_min,
            t_max: config.t_max,
            source: source.to_string(),
        };
        let policy = Arc::new(policy);
        self.policies
            .lock()
            .expect("registry lock")
            .insert((policy.kind(), info.config_fingerprint.clone()), (policy.clone(), info));
        policy
    }

    pub fn list(&self) -> Vec<PolicyInfo> {
        let mut out: Vec<PolicyInfo> = self
            .policies
            .lock()
            .expect("registry lock")
            .values()
            .map(|(_, info)| info.clone())
            .collect();
        out.sort_by(|a, b| (a.t_max, &a.policy, &a.config_fingerprint).cmp(&(b.t_max, &b.policy, &b.config_fingerprint)));
        out
    }

    pub fn model(&self, config: &ProblemConfig) -> Result<Arc<Model64>, ServiceError> {
        let fp = config.fingerprint();
        if let Some(m) = self.models.lock().expect("registry lock").get(&fp) {
            return Ok(m.clone());
        }
        let model = Arc::new(Model64::new(config.clone()).map_err(|e| ServiceError::InvalidRequest(e.to_string()))?);
        self.models.lock().expect("registry lock").insert(fp, model.clone());
        Ok(model)
    }

    /// Finds or builds a policy of `kind` for `config`. Blocking: an
    /// on-demand solve can take a while.
    pub fn resolve(&self, kind: PolicyKind, config: &ProblemConfig) -> Result<Arc<Policy64>, ServiceError> {
        if kind.is_baseline() {
            return Ok(Arc::new(Policy64::baseline(kind, config)));
        }
        let key = (kind, config.fingerprint());
        if let Some((p, _)) = self.policies.lock().expect("registry lock").get(&key) {
            return Ok(p.clone());
        }
        let n_states = config.n_states();
        if kind != PolicyKind::Qmdp || n_states > ON_DEMAND_STATE_LIMIT {
            return Err(ServiceError::SolveUnavailable(format!(
                "no precomputed {kind} policy for this config ({n_states} states); on-demand solving covers qmdp up to \
                 {ON_DEMAND_STATE_LIMIT} states. Solve it offline with `announce-planner solve --solver {kind} --out \
                 <dir>/policy.json` and restart the service with `--policies-dir <dir>`"
            )));
        }
        tracing::info!(n_states, "solving qmdp on demand");
        let (policy, report) =
            solve_qmdp::<f64>(config, QMDP_TOL, QMDP_MAX_ITER).map_err(|e| ServiceError::Internal(e.to_string()))?;
        if !report.converged() {
            tracing::warn!(residual = report.residual, "on-demand qmdp solve did not converge");
        }
        Ok(self.insert(policy, config, preset_name(config), "on_demand"))
    }
}
