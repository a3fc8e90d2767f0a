//! QMDP: value iteration on the fully observable MDP, acting greedily on the
//! belief-weighted Q-values.

use std::time::Instant;

use rayon::prelude::*;

use super::{AlphaVector, Policy, PolicyKind, SolveReport, SolveStatus, SolverError};
use crate::model::{Model, ProblemConfig, StateSpace};
use crate::scalar::Real;

/// Converged state values and Q-table of the underlying MDP.
#[derive(Debug, Clone)]
pub struct QmdpSolution<T> {
    space: StateSpace,
    n_actions: usize,
    /// `q[s * n_actions + a]`
    q: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> QmdpSolution<T> {
    pub fn q(&self, state: usize, action: usize) -> T {
        self.q[state * self.n_actions + action]
    }

    pub fn q_row(&self, state: usize) -> &[T] {
        &self.q[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn value(&self, state: usize) -> T {
        self.values[state]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

/// One Bellman sweep for a single state: writes `Q(s, .)` into `q_out` and
/// returns `max_a Q(s, a)`.
fn backup_state<T: Real>(model: &Model<T>, space: &StateSpace, values: &[T], s: usize, q_out: &mut [T]) -> T {
    let cfg = model.config();
    let n = cfg.n_weeks();
    let state = space.state_of(s);
    let x = state.observable;
    let y = state.hidden.true_completion;
    let gamma = model.discount();
    let mut best = T::neg_infinity();
    for (ai, q) in q_out.iter_mut().enumerate() {
        let a = cfg.week_at(ai);
        let next_t = if x.t >= y { x.t } else { x.t + 1 };
        let base = (next_t as usize * n + ai) * n;
        let mut future = T::zero();
        for (y_next, p) in model.hidden_successors(x, y, a).iter() {
            future = future + p * values[base + cfg.week_index(y_next)];
        }
        *q = model.reward_raw(x.t, x.prev_announce, y, a) + gamma * future;
        if *q > best {
            best = *q;
        }
    }
    best
}

pub(crate) fn value_iteration<T: Real>(model: &Model<T>, tol: f64, max_iter: usize) -> (QmdpSolution<T>, usize, f64) {
    let space = model.state_space();
    let n_actions = model.n_weeks();
    let mut values = vec![T::zero(); space.len()];
    let mut q = vec![T::zero(); space.len() * n_actions];
    let mut next = vec![T::zero(); space.len()];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < max_iter {
        next.par_iter_mut()
            .zip(q.par_chunks_mut(n_actions))
            .enumerate()
            .for_each(|(s, (v, q_row))| *v = backup_state(model, &space, &values, s, q_row));
        residual = values
            .par_iter()
            .zip(next.par_iter())
            .map(|(a, b)| (*a - *b).abs().as_f64())
            .reduce(|| 0.0, f64::max);
        std::mem::swap(&mut values, &mut next);
        iterations += 1;
        if residual < tol {
            break;
        }
    }
    (
        QmdpSolution {
            space,
            n_actions,
            q,
            values,
        },
        iterations,
        residual,
    )
}

/// Solves the MDP and packages one alpha vector per announcement with
/// `alpha_a(s) = Q(s, a)`.
pub fn solve_qmdp<T: Real>(
    config: &ProblemConfig,
    tol: f64,
    max_iter: usize,
) -> Result<(Policy<T>, SolveReport), SolverError> {
    let model = Model::<T>::new(config.clone())?;
    let (policy, _, report) = solve_qmdp_with_model(&model, tol, max_iter)?;
    Ok((policy, report))
}

pub(crate) fn solve_qmdp_with_model<T: Real>(
    model: &Model<T>,
    tol: f64,
    max_iter: usize,
) -> Result<(Policy<T>, QmdpSolution<T>, SolveReport), SolverError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let started = Instant::now();
    let (solution, iterations, residual) = value_iteration(model, tol, max_iter);
    let cfg = model.config();
    let alphas = (0..solution.n_actions)
        .map(|a| AlphaVector {
            action: cfg.week_at(a),
            observable: None,
            values: (0..solution.space.len()).map(|s| solution.q(s, a)).collect(),
        })
        .collect();
    let policy = Policy::from_alphas(PolicyKind::Qmdp, cfg, alphas)?;
    let status = if residual < tol {
        SolveStatus::Converged
    } else {
        SolveStatus::NonConvergence
    };
    let report = SolveReport {
        solver: PolicyKind::Qmdp,
        status,
        iterations,
        residual,
        wall_time: started.elapsed().as_secs_f64(),
        bounds: None,
        bound_trace: Vec::new(),
    };
    Ok((policy, solution, report))
}
