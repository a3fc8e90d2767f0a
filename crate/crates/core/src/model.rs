//! The announcement-control MOMDP.
//!
//! The observable part of the state is the current week and the announcement
//! that is currently in force; the hidden part is the true completion week.
//! Every action is an announced completion week, and every observation is a
//! noisy integer estimate of the true completion week.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scalar::Real;

/// Integer weeks.
pub type Weeks = u32;

/// Standard deviations at or below this value produce a point-mass observation.
pub const SIGMA_FLOOR: f64 = 1e-6;

const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("unknown preset {0:?} (expected small, medium, large or extra-large)")]
    UnknownPreset(String),
    #[error("reading config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] serde_json::Error),
}

/// All parameters of one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub t_min: Weeks,
    pub t_max: Weeks,
    pub discount: f64,
    pub lambda_e: f64,
    pub lambda_c: f64,
    pub lambda_f: f64,
    pub p_none: f64,
    pub p_small: f64,
    pub p_large: f64,
    pub delta_small: Weeks,
    pub delta_large: Weeks,
}

impl ProblemConfig {
    /// Default reward, delay and discount parameters over the given horizon.
    pub fn with_horizon(t_min: Weeks, t_max: Weeks) -> Self {
        Self {
            t_min,
            t_max,
            discount: 0.98,
            lambda_e: 8.0,
            lambda_c: 2.0,
            lambda_f: 1000.0,
            p_none: 0.5,
            p_small: 0.4,
            p_large: 0.1,
            delta_small: 1,
            delta_large: 3,
        }
    }

    pub const PRESETS: [&'static str; 4] = ["small", "medium", "large", "extra-large"];

    /// Quarter, half-year, three-quarter and year-long projects.
    pub fn preset(name: &str) -> Result<Self, ModelError> {
        let t_max = match name {
            "small" => 13,
            "medium" => 26,
            "large" => 39,
            "extra-large" | "xl" => 52,
            other => return Err(ModelError::UnknownPreset(other.to_string())),
        };
        Ok(Self::with_horizon(2, t_max))
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.t_min < 2 || self.t_min >= self.t_max {
            return bad(format!(
                "need 2 <= t_min < t_max, got t_min={} t_max={}",
                self.t_min, self.t_max
            ));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad(format!("discount must be in [0, 1), got {}", self.discount));
        }
        for (name, v) in [
            ("lambda_e", self.lambda_e),
            ("lambda_c", self.lambda_c),
            ("lambda_f", self.lambda_f),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        for (name, v) in [
            ("p_none", self.p_none),
            ("p_small", self.p_small),
            ("p_large", self.p_large),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be a probability, got {v}"));
            }
        }
        let total = self.p_none + self.p_small + self.p_large;
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return bad(format!("delay probabilities sum to {total}, expected 1"));
        }
        if self.delta_small == 0 || self.delta_small >= self.delta_large {
            return bad(format!(
                "need 0 < delta_small < delta_large, got {} and {}",
                self.delta_small, self.delta_large
            ));
        }
        Ok(())
    }

    /// Stable hex digest of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        hex::encode(&digest[..16])
    }

    /// Number of distinct completion weeks, which is also |A| and |O|.
    pub fn n_weeks(&self) -> usize {
        (self.t_max - self.t_min + 1) as usize
    }

    pub fn n_observable(&self) -> usize {
        (self.t_max as usize + 1) * self.n_weeks()
    }

    pub fn n_states(&self) -> usize {
        self.n_observable() * self.n_weeks()
    }

    pub fn weeks(&self) -> impl DoubleEndedIterator<Item = Weeks> + Clone {
        self.t_min..=self.t_max
    }

    pub fn week_index(&self, w: Weeks) -> usize {
        debug_assert!(self.contains(w));
        (w - self.t_min) as usize
    }

    pub fn week_at(&self, i: usize) -> Weeks {
        self.t_min + i as Weeks
    }

    pub fn contains(&self, w: Weeks) -> bool {
        (self.t_min..=self.t_max).contains(&w)
    }
}

/// `(t, announcement in force)`; both fully observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObservableState {
    pub t: Weeks,
    pub prev_announce: Weeks,
}

impl ObservableState {
    pub fn new(t: Weeks, prev_announce: Weeks) -> Self {
        Self { t, prev_announce }
    }
}

impl fmt::Display for ObservableState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(t={}, announced={})", self.t, self.prev_announce)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HiddenState {
    pub true_completion: Weeks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub announce: Weeks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Observation {
    pub estimate: Weeks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    pub observable: ObservableState,
    pub hidden: HiddenState,
}

/// Finite distribution over integer weeks, support sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical<T> {
    support: Vec<(Weeks, T)>,
}

impl<T: Real> Categorical<T> {
    pub fn point(w: Weeks) -> Self {
        Self {
            support: vec![(w, T::one())],
        }
    }

    /// Builds from `(week, mass)` pairs, merging duplicates and dropping zeros.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Weeks, T)>) -> Self {
        let mut support: Vec<(Weeks, T)> = Vec::new();
        for (w, p) in pairs {
            if p <= T::zero() {
                continue;
            }
            match support.binary_search_by_key(&w, |e| e.0) {
                Ok(i) => support[i].1 = support[i].1 + p,
                Err(i) => support.insert(i, (w, p)),
            }
        }
        Self { support }
    }

    pub fn support(&self) -> &[(Weeks, T)] {
        &self.support
    }

    pub fn prob(&self, w: Weeks) -> T {
        self.support
            .binary_search_by_key(&w, |e| e.0)
            .map(|i| self.support[i].1)
            .unwrap_or_else(|_| T::zero())
    }

    pub fn total(&self) -> T {
        self.support.iter().map(|e| e.1).sum()
    }

    /// Largest-mass week, ties to the smallest week.
    pub fn mode(&self) -> Weeks {
        let mut best = self.support[0];
        for &(w, p) in &self.support[1..] {
            if p > best.1 {
                best = (w, p);
            }
        }
        best.0
    }

    /// Smallest week whose cumulative mass reaches `u`.
    pub fn inverse_cdf(&self, u: f64) -> Weeks {
        inverse_cdf(self.support.iter().map(|&(w, p)| (w, p.as_f64())), u)
    }
}

pub(crate) fn inverse_cdf(pairs: impl Iterator<Item = (Weeks, f64)>, u: f64) -> Weeks {
    let mut acc = 0.0;
    let mut last = None;
    for (w, p) in pairs {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(w);
        if u <= acc {
            return w;
        }
    }
    // u beyond the accumulated total only through rounding
    last.expect("distribution has positive mass")
}

/// Mass of a standard normal on `[a, b]`, evaluated on the tail that keeps
/// the most significant digits.
pub(crate) fn std_normal_interval(a: f64, b: f64) -> f64 {
    use std::f64::consts::FRAC_1_SQRT_2;
    debug_assert!(a <= b);
    if a >= 0.0 {
        0.5 * (libm::erfc(a * FRAC_1_SQRT_2) - libm::erfc(b * FRAC_1_SQRT_2))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b * FRAC_1_SQRT_2) - libm::erfc(-a * FRAC_1_SQRT_2))
    } else {
        1.0 - 0.5 * libm::erfc(b * FRAC_1_SQRT_2) - 0.5 * libm::erfc(-a * FRAC_1_SQRT_2)
    }
}

/// Gaussian with the given mean and scale, truncated to `[lo-0.5, hi+0.5]`
/// and integrated over unit bins centred on `lo..=hi`.
pub fn discretized_truncated_gaussian(mean: f64, sigma: f64, lo: Weeks, hi: Weeks) -> Vec<f64> {
    let mut mass: Vec<f64> = (lo..=hi)
        .map(|k| {
            let a = (k as f64 - 0.5 - mean) / sigma;
            let b = (k as f64 + 0.5 - mean) / sigma;
            std_normal_interval(a, b)
        })
        .collect();
    let total: f64 = mass.iter().sum();
    for m in &mut mass {
        *m /= total;
    }
    mass
}

/// Observation scale at week `t` for a project completing at `completion`.
pub fn observation_sigma(t: Weeks, completion: Weeks) -> f64 {
    (completion as f64 - t as f64) / 3.0
}

/// A problem instance with precomputed observation tables.
#[derive(Debug, Clone)]
pub struct Model<T> {
    config: ProblemConfig,
    n: usize,
    discount: T,
    lambda_e: T,
    lambda_c: T,
    lambda_f: T,
    p_none: T,
    p_small: T,
    p_large: T,
    /// Dense pmf over observations, indexed `[t][y][o]` flattened.
    obs: Vec<T>,
}

impl<T: Real> Model<T> {
    pub fn new(config: ProblemConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let n = config.n_weeks();
        let mut obs = Vec::with_capacity((config.t_max as usize + 1) * n * n);
        for t in 0..=config.t_max {
            for y in config.weeks() {
                let sigma = observation_sigma(t, y);
                if sigma <= SIGMA_FLOOR {
                    obs.extend(config.weeks().map(|o| if o == y { T::one() } else { T::zero() }));
                } else {
                    let pmf = discretized_truncated_gaussian(y as f64, sigma, config.t_min, config.t_max);
                    obs.extend(pmf.into_iter().map(T::of));
                }
            }
        }
        Ok(Self {
            n,
            discount: T::of(config.discount),
            lambda_e: T::of(config.lambda_e),
            lambda_c: T::of(config.lambda_c),
            lambda_f: T::of(config.lambda_f),
            p_none: T::of(config.p_none),
            p_small: T::of(config.p_small),
            p_large: T::of(config.p_large),
            obs,
            config,
        })
    }

    pub fn config(&self) -> &ProblemConfig {
        &self.config
    }

    pub fn n_weeks(&self) -> usize {
        self.n
    }

    pub fn discount(&self) -> T {
        self.discount
    }

    pub fn state_space(&self) -> StateSpace {
        StateSpace::new(&self.config)
    }

    pub fn check_observable(&self, x: ObservableState) -> Result<(), ModelError> {
        if x.t > self.config.t_max || !self.config.contains(x.prev_announce) {
            return Err(ModelError::InvalidState(format!("observable state {x} out of range")));
        }
        Ok(())
    }

    pub fn check_week(&self, what: &str, w: Weeks) -> Result<(), ModelError> {
        if !self.config.contains(w) {
            return Err(ModelError::InvalidState(format!(
                "{what} {w} outside [{}, {}]",
                self.config.t_min, self.config.t_max
            )));
        }
        Ok(())
    }

    /// Dense observation pmf for a project completing at `y` seen at week `t`.
    pub fn observation_row(&self, t: Weeks, y: Weeks) -> &[T] {
        let row = (t as usize * self.n + self.config.week_index(y)) * self.n;
        &self.obs[row..row + self.n]
    }

    /// Likelihood of estimate `o` at week `t` when the project completes at `y`.
    pub fn observation_prob(&self, t: Weeks, y: Weeks, o: Weeks) -> T {
        self.observation_row(t, y)[self.config.week_index(o)]
    }

    pub fn observation_distribution(
        &self,
        x_next: ObservableState,
        y_next: HiddenState,
    ) -> Result<Categorical<T>, ModelError> {
        self.check_observable(x_next)?;
        self.check_week("true completion", y_next.true_completion)?;
        let row = self.observation_row(x_next.t, y_next.true_completion);
        Ok(Categorical::from_pairs(
            self.config.weeks().zip(row.iter().copied()),
        ))
    }

    /// Time advances by one week until completion, then freezes.
    pub fn transition_observable(&self, x: ObservableState, y: HiddenState, a: Action) -> ObservableState {
        if x.t >= y.true_completion {
            ObservableState::new(x.t, a.announce)
        } else {
            ObservableState::new(x.t + 1, a.announce)
        }
    }

    /// Whether announcing `a` from `x` can perturb a project completing at `y`.
    pub fn triggers_delay(&self, x: ObservableState, y: Weeks, a: Weeks) -> bool {
        a != x.prev_announce && x.t > 0 && x.t < y
    }

    /// Successor completion weeks with their probabilities (at most three,
    /// merged when capped targets coincide).
    pub fn hidden_successors(&self, x: ObservableState, y: Weeks, a: Weeks) -> HiddenSuccessors<T> {
        if !self.triggers_delay(x, y, a) {
            return HiddenSuccessors::point(y);
        }
        let t_max = self.config.t_max;
        let small = (y + self.config.delta_small).min(t_max);
        let large = (y + self.config.delta_large).min(t_max);
        let mut out = HiddenSuccessors::default();
        out.push(y, self.p_none);
        out.push(small, self.p_small);
        out.push(large, self.p_large);
        out
    }

    pub fn transition_hidden(
        &self,
        x: ObservableState,
        y: HiddenState,
        a: Action,
        _x_next: ObservableState,
    ) -> Categorical<T> {
        Categorical::from_pairs(self.hidden_successors(x, y.true_completion, a.announce).iter())
    }

    /// Immediate reward; always nonpositive.
    pub fn reward(&self, x: ObservableState, y: HiddenState, a: Action) -> T {
        self.reward_raw(x.t, x.prev_announce, y.true_completion, a.announce)
    }

    pub(crate) fn reward_raw(&self, t: Weeks, prev: Weeks, y: Weeks, a: Weeks) -> T {
        if t + 1 == self.config.t_max || t > y {
            return T::zero();
        }
        let error = T::of(a.abs_diff(y) as f64);
        // the t = 0 announcement replaces a placeholder, not a real announcement
        let changed = t > 0 && a != prev && a != y;
        let mut r = T::zero() - self.lambda_e * error;
        if changed {
            r = r - self.lambda_c;
        }
        if t == y && a != y {
            r = r - self.lambda_f;
        }
        r
    }
}

/// Up to three `(week, probability)` outcomes of the hidden transition.
#[derive(Debug, Clone, Copy, Default)]
pub struct HiddenSuccessors<T> {
    items: [(Weeks, T); 3],
    len: usize,
}

impl<T: Real> HiddenSuccessors<T> {
    fn point(y: Weeks) -> Self {
        let mut out = Self {
            items: [(0, T::zero()); 3],
            len: 0,
        };
        out.push(y, T::one());
        out
    }

    fn push(&mut self, w: Weeks, p: T) {
        if p <= T::zero() {
            return;
        }
        for item in &mut self.items[..self.len] {
            if item.0 == w {
                item.1 = item.1 + p;
                return;
            }
        }
        self.items[self.len] = (w, p);
        self.len += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Weeks, T)> + '_ {
        self.items[..self.len].iter().copied()
    }

    pub fn inverse_cdf(&self, u: f64) -> Weeks {
        let mut sorted = self.items;
        sorted[..self.len].sort_by_key(|e| e.0);
        inverse_cdf(sorted[..self.len].iter().map(|&(w, p)| (w, p.as_f64())), u)
    }
}

/// Row-major `(t, prev_announce, true_completion)` enumeration of all states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    t_min: Weeks,
    t_max: Weeks,
    n: usize,
}

impl StateSpace {
    pub fn new(config: &ProblemConfig) -> Self {
        Self {
            t_min: config.t_min,
            t_max: config.t_max,
            n: config.n_weeks(),
        }
    }

    pub fn len(&self) -> usize {
        self.n_observable() * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_observable(&self) -> usize {
        (self.t_max as usize + 1) * self.n
    }

    pub fn n_hidden(&self) -> usize {
        self.n
    }

    pub fn observable_index(&self, x: ObservableState) -> usize {
        x.t as usize * self.n + (x.prev_announce - self.t_min) as usize
    }

    pub fn observable_at(&self, i: usize) -> ObservableState {
        ObservableState::new((i / self.n) as Weeks, self.t_min + (i % self.n) as Weeks)
    }

    pub fn index_of(&self, s: State) -> usize {
        self.observable_index(s.observable) * self.n + (s.hidden.true_completion - self.t_min) as usize
    }

    pub fn state_of(&self, i: usize) -> State {
        let x = self.observable_at(i / self.n);
        State {
            observable: x,
            hidden: HiddenState {
                true_completion: self.t_min + (i % self.n) as Weeks,
            },
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.len()).map(|i| self.state_of(i))
    }
}

pub fn enumerate_states(config: &ProblemConfig) -> StateSpace {
    StateSpace::new(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xl() -> Model<f64> {
        Model::new(ProblemConfig::preset("extra-large").unwrap()).unwrap()
    }

    fn x(t: Weeks, p: Weeks) -> ObservableState {
        ObservableState::new(t, p)
    }

    fn y(w: Weeks) -> HiddenState {
        HiddenState { true_completion: w }
    }

    fn a(w: Weeks) -> Action {
        Action { announce: w }
    }

    #[test]
    fn presets_validate() {
        for name in ProblemConfig::PRESETS {
            ProblemConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(ProblemConfig::preset("huge").is_err());
    }

    #[test]
    fn config_rejects_bad_parameters() {
        let ok = ProblemConfig::with_horizon(2, 13);
        let mut c = ok.clone();
        c.t_min = 1;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.t_min = 13;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.p_none = 0.6;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.delta_small = 3;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.discount = 1.0;
        assert!(c.validate().is_err());
        let mut c = ok;
        c.lambda_c = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_rejects_unknown_fields() {
        let mut v = serde_json::to_value(ProblemConfig::with_horizon(2, 13)).unwrap();
        assert!(ProblemConfig::from_json(&v.to_string()).is_ok());
        v["gamma"] = serde_json::json!(0.9);
        assert!(ProblemConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = ProblemConfig::with_horizon(2, 13);
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.lambda_c = 3.0;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn observation_sigma_one_is_symmetric_around_mean() {
        let m = xl();
        assert_eq!(observation_sigma(19, 22), 1.0);
        let d = m.observation_distribution(x(19, 20), y(22)).unwrap();
        assert_eq!(d.mode(), 22);
        for k in 1..5 {
            let lo = d.prob(22 - k);
            let hi = d.prob(22 + k);
            assert!((lo - hi).abs() < 1e-15, "asymmetric at offset {k}");
            assert!(d.prob(22 - k + 1) > lo);
        }
        assert!((d.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn observation_at_completion_is_point_mass() {
        let m = xl();
        let d = m.observation_distribution(x(22, 22), y(22)).unwrap();
        assert_eq!(d.support(), &[(22, 1.0)]);
        // past completion the scale formula goes negative
        let d = m.observation_distribution(x(30, 22), y(22)).unwrap();
        assert_eq!(d.support(), &[(22, 1.0)]);
    }

    #[test]
    fn observation_rejects_invalid_states() {
        let m = xl();
        assert!(m.observation_distribution(x(53, 22), y(22)).is_err());
        assert!(m.observation_distribution(x(5, 1), y(22)).is_err());
        assert!(m.observation_distribution(x(5, 22), y(60)).is_err());
    }

    #[test]
    fn observable_transition_examples() {
        let m = xl();
        assert_eq!(m.transition_observable(x(5, 20), y(22), a(24)), x(6, 24));
        assert_eq!(m.transition_observable(x(22, 22), y(22), a(22)), x(22, 22));
        assert_eq!(m.transition_observable(x(0, 10), y(10), a(10)), x(1, 10));
    }

    #[test]
    fn hidden_transition_examples() {
        let m = xl();
        let d = m.transition_hidden(x(5, 20), y(22), a(24), x(6, 24));
        assert_eq!(d.support(), &[(22, 0.5), (23, 0.4), (25, 0.1)]);
        let d = m.transition_hidden(x(5, 22), y(22), a(22), x(6, 22));
        assert_eq!(d.support(), &[(22, 1.0)]);
        let d = m.transition_hidden(x(5, 20), y(51), a(24), x(6, 24));
        assert_eq!(d.support().len(), 2);
        assert_eq!(d.prob(51), 0.5);
        assert!((d.prob(52) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hidden_transition_identity_cases() {
        let m = xl();
        // first announcement
        assert_eq!(m.transition_hidden(x(0, 2), y(22), a(30), x(1, 30)).support(), &[(22, 1.0)]);
        // completed
        assert_eq!(m.transition_hidden(x(22, 20), y(22), a(30), x(22, 30)).support(), &[(22, 1.0)]);
        // announcing the truth still risks disruption
        assert_eq!(m.transition_hidden(x(5, 20), y(22), a(22), x(6, 22)).support().len(), 3);
    }

    #[test]
    fn reward_examples() {
        let m = xl();
        assert_eq!(m.reward(x(5, 24), y(22), a(20)), -18.0);
        assert_eq!(m.reward(x(5, 22), y(22), a(22)), 0.0);
        assert_eq!(m.reward(x(22, 20), y(22), a(20)), -1016.0);
        // zero cases
        assert_eq!(m.reward(x(51, 40), y(52), a(30)), 0.0);
        assert_eq!(m.reward(x(23, 40), y(22), a(30)), 0.0);
        // correcting to the truth is not charged as a change
        assert_eq!(m.reward(x(5, 24), y(22), a(22)), 0.0);
        // first announcement carries no change penalty
        assert_eq!(m.reward(x(0, 2), y(22), a(20)), -16.0);
    }

    #[test]
    fn state_enumeration() {
        let cfg = ProblemConfig::with_horizon(2, 4);
        let space = enumerate_states(&cfg);
        assert_eq!(space.len(), 45);
        let first = State {
            observable: x(0, 2),
            hidden: y(2),
        };
        assert_eq!(space.index_of(first), 0);
        for i in 0..space.len() {
            assert_eq!(space.index_of(space.state_of(i)), i);
        }
        let states: Vec<State> = space.iter().collect();
        assert!(states.windows(2).all(|w| (w[0].observable.t, w[0].observable.prev_announce, w[0].hidden)
            < (w[1].observable.t, w[1].observable.prev_announce, w[1].hidden)));
    }

    #[test]
    fn inverse_cdf_picks_first_bin_reaching_quantile() {
        let d = Categorical::from_pairs([(3, 0.25), (4, 0.5), (5, 0.25)]);
        assert_eq!(d.inverse_cdf(1e-9), 3);
        assert_eq!(d.inverse_cdf(0.25), 3);
        assert_eq!(d.inverse_cdf(0.2500001), 4);
        assert_eq!(d.inverse_cdf(0.999), 5);
    }

    #[test]
    fn f32_model_tracks_f64() {
        let cfg = ProblemConfig::preset("small").unwrap();
        let m64 = Model::<f64>::new(cfg.clone()).unwrap();
        let m32 = Model::<f32>::new(cfg).unwrap();
        for (a, b) in m64.obs.iter().zip(&m32.obs) {
            assert!((a - *b as f64).abs() < 1e-6);
        }
    }
}
