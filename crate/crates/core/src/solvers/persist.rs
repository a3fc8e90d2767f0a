use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AlphaVector, Policy, PolicyKind, SolverError};
use crate::model::ProblemConfig;
use crate::scalar::Real;

pub const POLICY_FORMAT_VERSION: u32 = 1;

/// On-disk policy envelope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyFile<T> {
    pub version: u32,
    pub kind: PolicyKind,
    pub config_fingerprint: String,
    pub alphas: Vec<AlphaVector<T>>,
}

impl<T: Real> From<&Policy<T>> for PolicyFile<T> {
    fn from(p: &Policy<T>) -> Self {
        Self {
            version: POLICY_FORMAT_VERSION,
            kind: p.kind,
            config_fingerprint: p.config_fingerprint.clone(),
            alphas: p.alphas.clone(),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> SolverError {
    SolverError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn save_policy<T: Real>(policy: &Policy<T>, path: impl AsRef<Path>) -> Result<(), SolverError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer(&mut out, &PolicyFile::from(policy)).map_err(|e| SolverError::Format(e.to_string()))?;
    out.flush().map_err(|e| io_err(path, e))
}

/// Loads a policy and checks it was solved for `config`.
pub fn load_policy<T: Real>(path: impl AsRef<Path>, config: &ProblemConfig) -> Result<Policy<T>, SolverError> {
    let path = path.as_ref();
    let text = fs::read(path).map_err(|e| io_err(path, e))?;
    let file: PolicyFile<T> = serde_json::from_slice(&text).map_err(|e| SolverError::Format(e.to_string()))?;
    PolicyFile::into_policy(file, config)
}

impl<T: Real> PolicyFile<T> {
    pub fn into_policy(self, config: &ProblemConfig) -> Result<Policy<T>, SolverError> {
        if self.version != POLICY_FORMAT_VERSION {
            return Err(SolverError::Format(format!(
                "unsupported policy format version {} (expected {POLICY_FORMAT_VERSION})",
                self.version
            )));
        }
        let expected = config.fingerprint();
        if self.config_fingerprint != expected {
            return Err(SolverError::ConfigMismatch {
                expected,
                found: self.config_fingerprint,
            });
        }
        Policy::from_alphas(self.kind, config, self.alphas)
    }
}
