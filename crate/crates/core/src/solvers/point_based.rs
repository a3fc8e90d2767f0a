//! Point-based solver on the factored (observable, belief over completion)
//! representation.
//!
//! Belief points are collected by forward trials from the initial belief in
//! the style of SARSOP/HSVI: each trial follows the action with the best
//! upper bound and the observation with the largest weighted bound gap, then
//! backs both bounds up along the visited path. The lower bound is a set of
//! alpha vectors per observable state, seeded with the values of the
//! "announce one week and never change it" policies. The upper bound is the
//! minimum of the QMDP value and a sawtooth interpolation over stored belief
//! points whose corners are the MDP state values.

use std::time::{Duration, Instant};

use super::qmdp::{solve_qmdp_with_model, QmdpSolution};
use super::{select_action, AlphaVector, Policy, PolicyKind, SolveReport, SolveStatus, SolverError};
use crate::model::{Model, ObservableState, ProblemConfig, StateSpace, Weeks};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct PointBasedOptions {
    /// Stop once the bound gap at the initial belief falls below this.
    pub precision: f64,
    pub time_budget: Duration,
    /// Optional cap on forward trials; makes runs reproducible independent
    /// of machine speed.
    pub max_trials: Option<usize>,
    pub qmdp_tol: f64,
    pub qmdp_max_iter: usize,
}

impl Default for PointBasedOptions {
    fn default() -> Self {
        Self {
            precision: 1e-3,
            time_budget: Duration::from_secs(600),
            max_trials: None,
            qmdp_tol: 1e-6,
            qmdp_max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
struct Alpha<T> {
    action: Weeks,
    values: Vec<T>,
}

#[derive(Debug, Clone)]
struct UpperPoint<T> {
    belief: Vec<T>,
    value: T,
    corner: T,
}

/// Successor beliefs of one `(belief, action)` pair.
struct Expansion<T> {
    x_next: ObservableState,
    /// Probability that the project completes on the next week.
    p_terminal: T,
    /// `(estimate, probability, normalized belief)` for non-completed outcomes.
    outcomes: Vec<(Weeks, T, Vec<T>)>,
}

struct Solver<'m, T> {
    model: &'m Model<T>,
    cfg: ProblemConfig,
    space: StateSpace,
    n: usize,
    qmdp: QmdpSolution<T>,
    lower: Vec<Vec<Alpha<T>>>,
    upper: Vec<Vec<UpperPoint<T>>>,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&u, &v)| u * v).sum()
}

impl<'m, T: Real> Solver<'m, T> {
    fn new(model: &'m Model<T>, qmdp: QmdpSolution<T>) -> Self {
        let cfg = model.config().clone();
        let space = model.state_space();
        let n = cfg.n_weeks();
        let mut solver = Self {
            model,
            space,
            n,
            qmdp,
            lower: vec![Vec::new(); space.n_observable()],
            upper: vec![Vec::new(); space.n_observable()],
            cfg,
        };
        solver.seed_lower_bound();
        solver
    }

    /// Alpha vectors of the fixed-announcement policies.
    fn seed_lower_bound(&mut self) {
        let cfg = self.cfg.clone();
        let gamma = self.model.discount();
        let n = self.n;
        for c in cfg.weeks() {
            // values at (t + 1, c, .)
            let mut next_layer = vec![T::zero(); n];
            for t in (0..=cfg.t_max).rev() {
                let mut keep_layer = vec![T::zero(); n];
                for p in cfg.weeks() {
                    let x = ObservableState::new(t, p);
                    let values: Vec<T> = cfg
                        .weeks()
                        .map(|y| {
                            let r = self.model.reward_raw(t, p, y, c);
                            if t >= y {
                                return r;
                            }
                            let future: T = self
                                .model
                                .hidden_successors(x, y, c)
                                .iter()
                                .map(|(y2, q)| q * next_layer[cfg.week_index(y2)])
                                .sum();
                            r + gamma * future
                        })
                        .collect();
                    if p == c {
                        keep_layer.clone_from(&values);
                    }
                    let xi = self.space.observable_index(x);
                    self.lower[xi].push(Alpha { action: c, values });
                }
                next_layer = keep_layer;
            }
        }
        for set in &mut self.lower {
            let seeded = std::mem::take(set);
            for alpha in seeded {
                insert_alpha(set, alpha);
            }
        }
    }

    fn is_terminal(&self, x: ObservableState, b: &[T]) -> bool {
        b.iter()
            .enumerate()
            .all(|(i, &p)| p == T::zero() || self.cfg.week_at(i) <= x.t)
    }

    /// Exact value of a belief whose project has finished.
    fn terminal_value(&self, x: ObservableState, b: &[T]) -> T {
        self.cfg
            .weeks()
            .map(|a| {
                b.iter()
                    .enumerate()
                    .map(|(i, &p)| p * self.model.reward_raw(x.t, x.prev_announce, self.cfg.week_at(i), a))
                    .sum::<T>()
            })
            .fold(T::neg_infinity(), T::max)
    }

    fn lower_value(&self, x: ObservableState, b: &[T]) -> T {
        if self.is_terminal(x, b) {
            return self.terminal_value(x, b);
        }
        let xi = self.space.observable_index(x);
        self.lower[xi]
            .iter()
            .map(|alpha| dot(&alpha.values, b))
            .fold(T::neg_infinity(), T::max)
    }

    fn corner_value(&self, xi: usize, b: &[T]) -> T {
        let base = xi * self.n;
        dot(b, &self.qmdp.values()[base..base + self.n])
    }

    fn qmdp_value(&self, xi: usize, b: &[T]) -> T {
        let base = xi * self.n;
        let mut best = T::neg_infinity();
        for a in 0..self.qmdp.n_actions() {
            let v: T = b
                .iter()
                .enumerate()
                .map(|(i, &p)| if p == T::zero() { T::zero() } else { p * self.qmdp.q(base + i, a) })
                .sum();
            best = best.max(v);
        }
        best
    }

    fn upper_value(&self, x: ObservableState, b: &[T]) -> T {
        if self.is_terminal(x, b) {
            return self.terminal_value(x, b);
        }
        let xi = self.space.observable_index(x);
        let corner = self.corner_value(xi, b);
        let mut best = self.qmdp_value(xi, b).min(corner);
        for pt in &self.upper[xi] {
            let mut ratio = T::infinity();
            for (&q, &p) in b.iter().zip(&pt.belief) {
                if p > T::zero() {
                    ratio = ratio.min(q / p);
                }
            }
            best = best.min(corner + ratio * (pt.value - pt.corner));
        }
        best
    }

    fn expand(&self, x: ObservableState, b: &[T], a: Weeks) -> Expansion<T> {
        let cfg = &self.cfg;
        let x_next = ObservableState::new(x.t + 1, a);
        let mut predicted = vec![T::zero(); self.n];
        for (i, &p) in b.iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            for (y2, q) in self.model.hidden_successors(x, cfg.week_at(i), a).iter() {
                let j = cfg.week_index(y2);
                predicted[j] = predicted[j] + p * q;
            }
        }
        let mut p_terminal = T::zero();
        for (i, &p) in predicted.iter().enumerate() {
            if cfg.week_at(i) <= x_next.t {
                p_terminal = p_terminal + p;
            }
        }
        let mut outcomes = Vec::with_capacity(self.n);
        for (oi, o) in cfg.weeks().enumerate() {
            let mut post = vec![T::zero(); self.n];
            let mut total = T::zero();
            for (i, &p) in predicted.iter().enumerate() {
                let y = cfg.week_at(i);
                if y > x_next.t && p > T::zero() {
                    let l = p * self.model.observation_row(x_next.t, y)[oi];
                    post[i] = l;
                    total = total + l;
                }
            }
            if total > T::zero() {
                for v in &mut post {
                    *v = *v / total;
                }
                outcomes.push((o, total, post));
            }
        }
        Expansion {
            x_next,
            p_terminal,
            outcomes,
        }
    }

    fn expected_reward(&self, x: ObservableState, b: &[T], a: Weeks) -> T {
        b.iter()
            .enumerate()
            .map(|(i, &p)| {
                if p == T::zero() {
                    T::zero()
                } else {
                    p * self.model.reward_raw(x.t, x.prev_announce, self.cfg.week_at(i), a)
                }
            })
            .sum()
    }

    /// Upper-bound Q-values of every action, with their expansions.
    fn upper_q(&self, x: ObservableState, b: &[T]) -> Vec<(Weeks, T, Expansion<T>)> {
        let gamma = self.model.discount();
        self.cfg
            .weeks()
            .map(|a| {
                let exp = self.expand(x, b, a);
                let terminal = if exp.p_terminal > T::zero() {
                    let t2 = exp.x_next.t;
                    let mut tb = vec![T::zero(); self.n];
                    tb[self.cfg.week_index(t2)] = T::one();
                    exp.p_terminal * self.terminal_value(exp.x_next, &tb)
                } else {
                    T::zero()
                };
                let future: T = exp
                    .outcomes
                    .iter()
                    .map(|(_, p, child)| *p * self.upper_value(exp.x_next, child))
                    .sum();
                let q = self.expected_reward(x, b, a) + gamma * (terminal + future);
                (a, q, exp)
            })
            .collect()
    }

    fn backup_upper(&mut self, x: ObservableState, b: &[T]) {
        let q = self.upper_q(x, b);
        let best = q.iter().map(|e| e.1).fold(T::neg_infinity(), T::max);
        let current = self.upper_value(x, b);
        if best < current {
            let xi = self.space.observable_index(x);
            let corner = self.corner_value(xi, b);
            let points = &mut self.upper[xi];
            if let Some(pt) = points.iter_mut().find(|pt| pt.belief == b) {
                pt.value = best;
            } else {
                points.push(UpperPoint {
                    belief: b.to_vec(),
                    value: best,
                    corner,
                });
            }
        }
    }

    fn backup_lower(&mut self, x: ObservableState, b: &[T]) {
        let cfg = &self.cfg;
        let gamma = self.model.discount();
        let n = self.n;
        let mut candidates: Vec<Alpha<T>> = Vec::with_capacity(n);
        for a in cfg.weeks() {
            let x_next = ObservableState::new(x.t + 1, a);
            let next_set = &self.lower[self.space.observable_index(x_next)];
            let exp = self.expand(x, b, a);
            // best successor alpha per estimate, weighted by the child belief
            let mut chosen: Vec<Option<&Alpha<T>>> = vec![None; n];
            for (o, _, child) in &exp.outcomes {
                chosen[cfg.week_index(*o)] = best_alpha(next_set, child);
            }
            for (oi, slot) in chosen.iter_mut().enumerate() {
                if slot.is_none() {
                    let weights: Vec<T> = cfg
                        .weeks()
                        .map(|y| {
                            if y > x_next.t {
                                self.model.observation_row(x_next.t, y)[oi]
                            } else {
                                T::zero()
                            }
                        })
                        .collect();
                    *slot = best_alpha(next_set, &weights);
                }
            }
            // value of continuing from (x_next, y2)
            let continuation: Vec<T> = cfg
                .weeks()
                .map(|y2| {
                    if y2 <= x_next.t {
                        let mut tb = vec![T::zero(); n];
                        tb[cfg.week_index(y2)] = T::one();
                        return self.terminal_value(x_next, &tb);
                    }
                    let row = self.model.observation_row(x_next.t, y2);
                    let j = cfg.week_index(y2);
                    row.iter()
                        .zip(&chosen)
                        .map(|(&z, alpha)| match alpha {
                            Some(alpha) if z > T::zero() => z * alpha.values[j],
                            _ => T::zero(),
                        })
                        .sum()
                })
                .collect();
            let values = cfg
                .weeks()
                .map(|y| {
                    let r = self.model.reward_raw(x.t, x.prev_announce, y, a);
                    if y <= x.t {
                        return r;
                    }
                    let future: T = self
                        .model
                        .hidden_successors(x, y, a)
                        .iter()
                        .map(|(y2, q)| q * continuation[cfg.week_index(y2)])
                        .sum();
                    r + gamma * future
                })
                .collect();
            candidates.push(Alpha { action: a, values });
        }
        let (action, _) = select_action(
            candidates.iter().map(|c| (c.action, dot(&c.values, b))),
            x.prev_announce,
        )
        .expect("at least one action");
        let alpha = candidates.into_iter().find(|c| c.action == action).unwrap();
        let xi = self.space.observable_index(x);
        insert_alpha(&mut self.lower[xi], alpha);
    }

    /// One forward trial from `(x, b)`, followed by backups along the path.
    fn trial(&mut self, x: ObservableState, b: Vec<T>, epsilon: f64) {
        let gamma = self.model.discount().as_f64();
        let mut path: Vec<(ObservableState, Vec<T>)> = Vec::new();
        let (mut x, mut b) = (x, b);
        let mut depth = 0;
        loop {
            if self.is_terminal(x, &b) || x.t >= self.cfg.t_max {
                break;
            }
            let threshold = epsilon * gamma.powi(-depth);
            let gap = (self.upper_value(x, &b) - self.lower_value(x, &b)).as_f64();
            if gap <= threshold {
                break;
            }
            let mut q = self.upper_q(x, &b);
            let (a, _) = select_action(q.iter().map(|e| (e.0, e.1)), x.prev_announce).expect("actions");
            let exp = q.swap_remove(q.iter().position(|e| e.0 == a).unwrap()).2;
            let next_threshold = epsilon * gamma.powi(-(depth + 1));
            let mut best: Option<(f64, usize)> = None;
            for (k, (_, p, child)) in exp.outcomes.iter().enumerate() {
                let child_gap = (self.upper_value(exp.x_next, child) - self.lower_value(exp.x_next, child)).as_f64();
                let score = p.as_f64() * (child_gap - next_threshold);
                if best.is_none_or(|(s, _)| score > s) {
                    best = Some((score, k));
                }
            }
            path.push((x, b));
            match best {
                Some((score, k)) if score > 0.0 => {
                    let mut outcomes = exp.outcomes;
                    b = outcomes.swap_remove(k).2;
                    x = exp.x_next;
                    depth += 1;
                }
                _ => break,
            }
        }
        for (x, b) in path.iter().rev() {
            self.backup_lower(*x, b);
            self.backup_upper(*x, b);
        }
    }

    fn into_alphas(self) -> Vec<AlphaVector<T>> {
        let space = self.space;
        self.lower
            .into_iter()
            .enumerate()
            .flat_map(|(xi, set)| {
                let x = space.observable_at(xi);
                set.into_iter().map(move |alpha| AlphaVector {
                    action: alpha.action,
                    observable: Some(x),
                    values: alpha.values,
                })
            })
            .collect()
    }
}

fn best_alpha<'a, T: Real>(set: &'a [Alpha<T>], weights: &[T]) -> Option<&'a Alpha<T>> {
    let mut best: Option<(&Alpha<T>, T)> = None;
    for alpha in set {
        let v = dot(&alpha.values, weights);
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((alpha, v));
        }
    }
    best.map(|e| e.0)
}

/// Adds `alpha` unless an existing vector dominates it pointwise, dropping
/// existing vectors it dominates.
fn insert_alpha<T: Real>(set: &mut Vec<Alpha<T>>, alpha: Alpha<T>) {
    let dominates = |a: &[T], b: &[T]| a.iter().zip(b).all(|(u, v)| u >= v);
    if set.iter().any(|e| dominates(&e.values, &alpha.values)) {
        return;
    }
    set.retain(|e| !dominates(&alpha.values, &e.values));
    set.push(alpha);
}

/// Runs the point-based solver. The returned policy acts by the best lower
/// bound alpha vector at the current observable state.
pub fn solve_point_based<T: Real>(
    config: &ProblemConfig,
    options: &PointBasedOptions,
) -> Result<(Policy<T>, SolveReport), SolverError> {
    assert!(options.precision > 0.0, "precision must be positive");
    let started = Instant::now();
    let model = Model::<T>::new(config.clone())?;
    let (_, qmdp, qmdp_report) = solve_qmdp_with_model(&model, options.qmdp_tol, options.qmdp_max_iter)?;
    if !qmdp_report.converged() {
        tracing::warn!(residual = qmdp_report.residual, "QMDP upper bound did not converge");
    }
    let mut solver = Solver::new(&model, qmdp);

    let root_x = ObservableState::new(0, config.t_min);
    let n = config.n_weeks();
    let root_b = vec![T::one() / T::of(n as f64); n];
    // beliefs after the first estimate, before the first announcement
    let first_estimates: Vec<(T, Vec<T>)> = config
        .weeks()
        .map(|o| {
            let oi = config.week_index(o);
            let post: Vec<T> = config
                .weeks()
                .zip(&root_b)
                .map(|(y, &p)| p * model.observation_row(0, y)[oi])
                .collect();
            let total: T = post.iter().copied().sum();
            (total, post.into_iter().map(|v| v / total).collect())
        })
        .collect();

    let bounds = |s: &Solver<T>| {
        (
            s.lower_value(root_x, &root_b).as_f64(),
            s.upper_value(root_x, &root_b).as_f64(),
        )
    };
    let mut trace = vec![bounds(&solver)];
    let mut trials = 0;
    let status = loop {
        let (lo, hi) = *trace.last().unwrap();
        if hi - lo < options.precision {
            break SolveStatus::Converged;
        }
        if started.elapsed() >= options.time_budget {
            break SolveStatus::TimeBudgetExceeded;
        }
        if options.max_trials.is_some_and(|m| trials >= m) {
            break SolveStatus::TrialLimit;
        }
        if trials % 2 == 0 {
            solver.trial(root_x, root_b.clone(), options.precision);
        } else {
            let (_, b) = first_estimates
                .iter()
                .max_by(|(pa, ba), (pb, bb)| {
                    let ga = *pa * (solver.upper_value(root_x, ba) - solver.lower_value(root_x, ba));
                    let gb = *pb * (solver.upper_value(root_x, bb) - solver.lower_value(root_x, bb));
                    ga.partial_cmp(&gb).unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("estimates");
            solver.trial(root_x, b.clone(), options.precision);
        }
        trials += 1;
        trace.push(bounds(&solver));
    };
    let (lower, upper) = *trace.last().unwrap();
    let alphas = solver.into_alphas();
    let policy = Policy::from_alphas(PolicyKind::PointBased, config, alphas)?;
    let report = SolveReport {
        solver: PolicyKind::PointBased,
        status,
        iterations: trials,
        residual: (upper - lower).max(0.0),
        wall_time: started.elapsed().as_secs_f64(),
        bounds: Some((lower, upper)),
        bound_trace: trace,
    };
    Ok((policy, report))
}
