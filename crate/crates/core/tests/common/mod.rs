//! Reference computations used as oracles by the integration and acceptance
//! tests. Nothing here calls into the production observation tables or
//! solvers; the model kernels are only used where they *are* the definition
//! under test.
#![allow(dead_code)]

use std::collections::BTreeMap;

use announce_core::{Action, HiddenState, Model, ObservableState, ProblemConfig, Weeks};

/// Standard normal density integrated with composite Simpson on `[a, b]`.
fn simpson_normal(a: f64, b: f64) -> f64 {
    const PANELS: usize = 4000;
    let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let h = (b - a) / PANELS as f64;
    let mut sum = pdf(a) + pdf(b);
    for i in 1..PANELS {
        let z = a + i as f64 * h;
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(z);
    }
    sum * h / 3.0
}

/// Observation pmf over `t_min..=t_max` by direct quadrature of the density.
pub fn observation_pmf(cfg: &ProblemConfig, t: Weeks, y: Weeks) -> Vec<f64> {
    let sigma = (y as f64 - t as f64) / 3.0;
    if sigma <= 1e-6 {
        return cfg.weeks().map(|o| if o == y { 1.0 } else { 0.0 }).collect();
    }
    let raw: Vec<f64> = cfg
        .weeks()
        .map(|k| {
            let a = (k as f64 - 0.5 - y as f64) / sigma;
            let b = (k as f64 + 0.5 - y as f64) / sigma;
            // bins far in the tail contribute nothing at double precision
            if a > 40.0 || b < -40.0 {
                0.0
            } else {
                simpson_normal(a.max(-40.0), b.min(40.0))
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|m| m / total).collect()
}

/// Smallest week whose cumulative mass reaches `u`.
pub fn inverse_cdf(weeks: impl Iterator<Item = Weeks>, pmf: &[f64], u: f64) -> Weeks {
    let mut acc = 0.0;
    let mut last = 0;
    for (w, &p) in weeks.zip(pmf) {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = w;
        if u <= acc {
            return w;
        }
    }
    last
}

/// Reward written out case by case.
pub fn reward(cfg: &ProblemConfig, t: Weeks, prev: Weeks, y: Weeks, a: Weeks) -> f64 {
    if t == cfg.t_max - 1 || t > y {
        return 0.0;
    }
    let err = (a as f64 - y as f64).abs();
    let change = if t > 0 && a != prev && a != y { 1.0 } else { 0.0 };
    let miss = if t == y && a != y { 1.0 } else { 0.0 };
    -cfg.lambda_e * err - cfg.lambda_c * change - cfg.lambda_f * miss
}

/// Delay outcomes as `(week, prob)` with merged capped targets.
pub fn delay_outcomes(cfg: &ProblemConfig, t: Weeks, prev: Weeks, y: Weeks, a: Weeks) -> Vec<(Weeks, f64)> {
    if a == prev || t == 0 || t >= y {
        return vec![(y, 1.0)];
    }
    let mut m: BTreeMap<Weeks, f64> = BTreeMap::new();
    *m.entry(y).or_default() += cfg.p_none;
    *m.entry((y + cfg.delta_small).min(cfg.t_max)).or_default() += cfg.p_small;
    *m.entry((y + cfg.delta_large).min(cfg.t_max)).or_default() += cfg.p_large;
    m.into_iter().filter(|e| e.1 > 0.0).collect()
}

/// Plain Bellman iteration over the flat state space, with successors taken
/// from the model's public kernels. Returns `q[s][a]`.
pub fn dense_q_table(model: &Model<f64>, sweeps: usize) -> Vec<Vec<f64>> {
    let cfg = model.config().clone();
    let space = model.state_space();
    let n_a = cfg.n_weeks();
    let mut succ: Vec<Vec<Vec<(usize, f64)>>> = Vec::with_capacity(space.len());
    let mut rewards: Vec<Vec<f64>> = Vec::with_capacity(space.len());
    for s in space.iter() {
        let mut per_action = Vec::with_capacity(n_a);
        let mut r = Vec::with_capacity(n_a);
        for a in cfg.weeks() {
            let action = Action { announce: a };
            let x_next = model.transition_observable(s.observable, s.hidden, action);
            let hidden = model.transition_hidden(s.observable, s.hidden, action, x_next);
            per_action.push(
                hidden
                    .support()
                    .iter()
                    .map(|&(y2, p)| {
                        let s2 = announce_core::State {
                            observable: x_next,
                            hidden: HiddenState { true_completion: y2 },
                        };
                        (space.index_of(s2), p)
                    })
                    .collect(),
            );
            r.push(model.reward(s.observable, s.hidden, action));
        }
        succ.push(per_action);
        rewards.push(r);
    }
    let gamma = cfg.discount;
    let mut v = vec![0.0; space.len()];
    let mut q = vec![vec![0.0; n_a]; space.len()];
    for _ in 0..sweeps {
        for s in 0..space.len() {
            for a in 0..n_a {
                q[s][a] = rewards[s][a] + gamma * succ[s][a].iter().map(|&(s2, p)| p * v[s2]).sum::<f64>();
            }
        }
        for s in 0..space.len() {
            v[s] = q[s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        }
    }
    q
}

/// One step of an observed history: the announcement made at the previous
/// week (absent for the first estimate), the estimate, and the completion flag.
#[derive(Debug, Clone, Copy)]
pub struct HistoryStep {
    pub action: Option<Weeks>,
    pub estimate: Weeks,
    pub completed: bool,
}

/// Posterior over the current completion week by enumerating every hidden
/// trajectory consistent with the history.
pub fn enumerate_posterior(cfg: &ProblemConfig, history: &[HistoryStep]) -> Vec<f64> {
    let n = cfg.n_weeks();
    // (hidden trajectory tail) -> weight; only the last week matters for the
    // future, but trajectories are kept whole to stay a literal enumeration
    let mut paths: Vec<(Vec<Weeks>, f64)> = cfg.weeks().map(|y| (vec![y], 1.0 / n as f64)).collect();
    let mut t: Weeks = 0;
    let mut prev = cfg.t_min;
    for (k, step) in history.iter().enumerate() {
        if k > 0 {
            let a = step.action.expect("announcement before every later estimate");
            let mut next = Vec::new();
            for (path, w) in &paths {
                let y = *path.last().unwrap();
                for (y2, p) in delay_outcomes(cfg, t, prev, y, a) {
                    let mut p2 = path.clone();
                    p2.push(y2);
                    next.push((p2, w * p));
                }
            }
            paths = next;
            prev = a;
            t += 1;
        }
        for (path, w) in &mut paths {
            let y = *path.last().unwrap();
            let consistent = step.completed == (y <= t);
            let like = observation_pmf(cfg, t, y)[(step.estimate - cfg.t_min) as usize];
            *w *= if consistent { like } else { 0.0 };
        }
    }
    let mut post = vec![0.0; n];
    for (path, w) in &paths {
        post[(*path.last().unwrap() - cfg.t_min) as usize] += w;
    }
    let total: f64 = post.iter().sum();
    post.into_iter().map(|p| p / total).collect()
}

/// Samples a history consistent with the model by simulating a true
/// trajectory with uniformly random announcements.
pub fn sample_history(cfg: &ProblemConfig, rng: &mut impl rand::Rng, max_steps: usize) -> Vec<HistoryStep> {
    let y0 = rng.random_range(cfg.t_min..=cfg.t_max);
    let mut y = y0;
    let mut t: Weeks = 0;
    let mut prev = cfg.t_min;
    let draw = |rng: &mut dyn rand::RngCore, t: Weeks, y: Weeks| {
        let u: f64 = rand::Rng::random::<f64>(rng).max(1e-12);
        inverse_cdf(cfg.weeks(), &observation_pmf(cfg, t, y), u)
    };
    let mut history = vec![HistoryStep {
        action: None,
        estimate: draw(rng, 0, y),
        completed: false,
    }];
    for _ in 0..max_steps {
        if t >= y {
            break;
        }
        let a = if rng.random_bool(0.5) { prev } else { rng.random_range(cfg.t_min..=cfg.t_max) };
        let outcomes = delay_outcomes(cfg, t, prev, y, a);
        let u: f64 = rng.random();
        let probs: Vec<f64> = outcomes.iter().map(|e| e.1).collect();
        y = inverse_cdf(outcomes.iter().map(|e| e.0), &probs, u.max(1e-12));
        prev = a;
        t += 1;
        history.push(HistoryStep {
            action: Some(a),
            estimate: draw(rng, t, y),
            completed: t >= y,
        });
    }
    history
}

pub fn observable(t: Weeks, prev: Weeks) -> ObservableState {
    ObservableState::new(t, prev)
}
