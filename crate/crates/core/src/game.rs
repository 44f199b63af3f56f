//! Typed repeated matrix games, histories and the episode runner.
//!
//! Payoff matrices are always stored from the owner's point of view: row = own
//! action, column = partner action. The same matrix therefore serves either seat.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, sample_index, StageDraws};
use crate::stats;

/// Absolute tolerance used for probability and payoff comparisons.
pub const TOL: f64 = 1e-9;

pub type TypeId = usize;
pub type Action = usize;

/// One of the two seats of a stage game.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Seat {
    One,
    Two,
}

impl Seat {
    pub const BOTH: [Seat; 2] = [Seat::One, Seat::Two];

    /// 0 for seat 1, 1 for seat 2.
    pub fn index(self) -> usize {
        match self {
            Seat::One => 0,
            Seat::Two => 1,
        }
    }

    pub fn other(self) -> Seat {
        match self {
            Seat::One => Seat::Two,
            Seat::Two => Seat::One,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl TryFrom<u8> for Seat {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Seat::One),
            2 => Ok(Seat::Two),
            other => Err(format!("seat must be 1 or 2, got {other}")),
        }
    }
}

impl From<Seat> for u8 {
    fn from(s: Seat) -> u8 {
        s.number()
    }
}

impl fmt::Display for Seat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Square payoff matrix with entries in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl PayoffMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("payoff matrix must be non-empty"));
        }
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!(
                    "payoff matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            entries.extend(row);
        }
        if let Some(bad) = entries.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::invalid(format!("payoff entry {bad} outside [0, 1]")));
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Payoff to the owner when playing `own` against `partner`.
    #[inline]
    pub fn get(&self, own: Action, partner: Action) -> f64 {
        self.entries[own * self.n + partner]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Expected payoff of own action `own` against a partner mixed strategy.
    pub fn action_value(&self, own: Action, partner: &MixedStrategy) -> f64 {
        partner
            .probs()
            .iter()
            .enumerate()
            .map(|(b, q)| q * self.get(own, b))
            .sum()
    }
}

/// A family of stage games indexed by private type, played for `horizon` stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameClass {
    n_actions: usize,
    matrices: Vec<PayoffMatrix>,
    horizon: usize,
}

impl GameClass {
    /// `matrices[θ]` is the payoff matrix of type `θ`.
    pub fn new(n_actions: usize, matrices: Vec<PayoffMatrix>, horizon: usize) -> Result<Self> {
        if n_actions == 0 {
            return Err(Error::invalid("n_actions must be positive"));
        }
        if horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        if matrices.is_empty() {
            return Err(Error::invalid("type space must be non-empty"));
        }
        if let Some((theta, m)) = matrices.iter().enumerate().find(|(_, m)| m.n() != n_actions) {
            return Err(Error::invalid(format!(
                "matrix of type {theta} is {}x{0}, expected {n_actions}x{n_actions}",
                m.n()
            )));
        }
        Ok(Self {
            n_actions,
            matrices,
            horizon,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_types(&self) -> usize {
        self.matrices.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::new(self.n_actions, self.matrices.clone(), horizon)
    }

    pub fn matrix(&self, theta: TypeId) -> &PayoffMatrix {
        &self.matrices[theta]
    }

    pub fn check_type(&self, theta: TypeId) -> Result<()> {
        if theta < self.n_types() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "type {theta} outside type space of size {}",
                self.n_types()
            )))
        }
    }

    pub fn joint_types(&self) -> impl Iterator<Item = JointType> + '_ {
        let n = self.n_types();
        (0..n * n).map(move |i| JointType::new(i / n, i % n))
    }

    /// Realized stage payoff of `seat` for joint action `step` under type `theta`.
    #[inline]
    pub fn stage_payoff(&self, theta: TypeId, seat: Seat, step: JointAction) -> f64 {
        self.matrices[theta].get(step.of(seat), step.of(seat.other()))
    }
}

/// Typed coordination game: each type prefers to coordinate on its own action and any
/// coordination beats miscoordination.
///
/// `G(θ)[a][a'] = 1` if `a = a' = θ`, `off_peak` if `a = a' ≠ θ`, and `0` otherwise.
pub fn make_coordpref_game(n_actions: usize, off_peak: f64, horizon: usize) -> Result<GameClass> {
    if n_actions < 2 {
        return Err(Error::invalid("CoordPref needs at least two actions"));
    }
    if !(off_peak > 0.0 && off_peak < 1.0) {
        return Err(Error::invalid(format!(
            "CoordPref off_peak must lie in (0, 1), got {off_peak}"
        )));
    }
    let matrices = (0..n_actions)
        .map(|theta| {
            let rows = (0..n_actions)
                .map(|a| {
                    (0..n_actions)
                        .map(|b| match (a == b, a == theta) {
                            (true, true) => 1.0,
                            (true, false) => off_peak,
                            _ => 0.0,
                        })
                        .collect()
                })
                .collect();
            PayoffMatrix::new(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    GameClass::new(n_actions, matrices, horizon)
}

/// Matching pennies as a two-type class: type 0 wants to match, type 1 to mismatch.
pub fn make_matching_pennies_game(horizon: usize) -> Result<GameClass> {
    let matcher = PayoffMatrix::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]])?;
    let mismatcher = PayoffMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]])?;
    GameClass::new(2, vec![matcher, mismatcher], horizon)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointType {
    pub theta1: TypeId,
    pub theta2: TypeId,
}

impl JointType {
    pub fn new(theta1: TypeId, theta2: TypeId) -> Self {
        Self { theta1, theta2 }
    }

    pub fn of(self, seat: Seat) -> TypeId {
        match seat {
            Seat::One => self.theta1,
            Seat::Two => self.theta2,
        }
    }

    pub fn validate(self, game: &GameClass) -> Result<()> {
        game.check_type(self.theta1)?;
        game.check_type(self.theta2)
    }
}

impl fmt::Display for JointType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.theta1, self.theta2)
    }
}

/// A probability vector over actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("mixed strategy must be non-empty"));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::invalid(format!("negative or NaN probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > TOL {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self(probs))
    }

    pub fn pure(n: usize, action: Action) -> Self {
        let mut p = vec![0.0; n];
        p[action] = 1.0;
        Self(p)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Normalizes non-negative weights; falls back to uniform if they sum to zero.
    pub fn from_weights(weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        if total > 0.0 && total.is_finite() {
            Self(weights.iter().map(|w| w / total).collect())
        } else {
            Self::uniform(weights.len())
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn prob(&self, action: Action) -> f64 {
        self.0.get(action).copied().unwrap_or(0.0)
    }

    /// The single action carrying all mass, if any.
    pub fn as_pure(&self) -> Option<Action> {
        self.0.iter().position(|p| (*p - 1.0).abs() <= TOL)
    }

    /// L-infinity distance; `None` when dimensions differ.
    pub fn linf(&self, other: &MixedStrategy) -> Option<f64> {
        (self.n() == other.n()).then(|| {
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
    }

    pub(crate) fn check(&self, n: usize) -> std::result::Result<(), String> {
        if self.0.len() != n {
            return Err(format!("distribution over {} actions, game has {n}", self.0.len()));
        }
        if self.0.iter().any(|p| !(*p >= 0.0)) {
            return Err("negative or NaN probability".into());
        }
        let total: f64 = self.0.iter().sum();
        if (total - 1.0).abs() > TOL {
            return Err(format!("probabilities sum to {total}"));
        }
        Ok(())
    }
}

/// Expected stage payoff `σᵀ G(θ) σ'` to the owner of type `theta`.
pub fn payoff(
    sigma: &MixedStrategy,
    sigma_prime: &MixedStrategy,
    theta: TypeId,
    game: &GameClass,
) -> Result<f64> {
    let n = game.n_actions();
    if sigma.n() != n || sigma_prime.n() != n {
        return Err(Error::invalid(format!(
            "strategy dimensions ({}, {}) do not match N = {n}",
            sigma.n(),
            sigma_prime.n()
        )));
    }
    game.check_type(theta)?;
    let m = game.matrix(theta);
    Ok(sigma
        .probs()
        .iter()
        .enumerate()
        .map(|(a, p)| p * m.action_value(a, sigma_prime))
        .sum())
}

/// Joint action of one stage: `(seat 1 action, seat 2 action)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointAction(pub Action, pub Action);

impl JointAction {
    #[inline]
    pub fn of(self, seat: Seat) -> Action {
        match seat {
            Seat::One => self.0,
            Seat::Two => self.1,
        }
    }
}

/// Ordered joint actions played so far.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct History(Vec<JointAction>);

impl History {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn from_pairs(pairs: &[(Action, Action)]) -> Self {
        Self(pairs.iter().map(|&(a, b)| JointAction(a, b)).collect())
    }

    pub fn with_capacity(n: usize) -> Self {
        Self(Vec::with_capacity(n))
    }

    pub fn push(&mut self, step: JointAction) {
        self.0.push(step);
    }

    pub fn pop(&mut self) -> Option<JointAction> {
        self.0.pop()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn steps(&self) -> &[JointAction] {
        &self.0
    }

    pub fn truncated(&self, len: usize) -> History {
        History(self.0[..len.min(self.0.len())].to_vec())
    }

    pub fn validate(&self, game: &GameClass) -> Result<()> {
        if self.len() > game.horizon() {
            return Err(Error::invalid(format!(
                "history of length {} exceeds horizon {}",
                self.len(),
                game.horizon()
            )));
        }
        let n = game.n_actions();
        if let Some(s) = self.0.iter().find(|s| s.0 >= n || s.1 >= n) {
            return Err(Error::invalid(format!("action pair {s:?} out of range for N = {n}")));
        }
        Ok(())
    }

    /// Total realized payoff of `seat` under type `theta`.
    pub fn total_payoff(&self, game: &GameClass, theta: TypeId, seat: Seat) -> f64 {
        self.0.iter().map(|s| game.stage_payoff(theta, seat, *s)).sum()
    }
}

/// An agent: maps its own type, its seat and the history so far to an action
/// distribution.
///
/// Instances may keep per-episode state. Within an episode `act` is called once per
/// stage with histories that extend each other; `reset` restores the initial state.
/// Both seats of an episode receive the same `episode_seed`.
pub trait MetaStrategy: Send {
    fn name(&self) -> &str;

    fn reset(&mut self, episode_seed: u64);

    fn act(&mut self, theta: TypeId, seat: Seat, history: &History) -> Result<MixedStrategy>;

    fn box_clone(&self) -> Box<dyn MetaStrategy>;

    /// True when the emitted distribution is a function of `(type, seat, history)`
    /// alone, which exact history enumeration relies on.
    fn history_deterministic(&self) -> bool {
        true
    }
}

impl Clone for Box<dyn MetaStrategy> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Builds fresh strategy instances; shared across threads.
#[derive(Clone)]
pub struct StrategyFactory {
    name: String,
    build: Arc<dyn Fn() -> Box<dyn MetaStrategy> + Send + Sync>,
}

impl StrategyFactory {
    pub fn new(
        name: impl Into<String>,
        build: impl Fn() -> Box<dyn MetaStrategy> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            build: Arc::new(build),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn build(&self) -> Box<dyn MetaStrategy> {
        (self.build)()
    }
}

impl fmt::Debug for StrategyFactory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("StrategyFactory").field(&self.name).finish()
    }
}

/// One recorded episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub joint_type: JointType,
    pub history: History,
    pub seed: u64,
}

/// Plays `stages` stages from an empty history.
pub fn play_prefix(
    strategy1: &mut dyn MetaStrategy,
    strategy2: &mut dyn MetaStrategy,
    joint_type: JointType,
    game: &GameClass,
    stages: usize,
    seed: u64,
) -> Result<History> {
    joint_type.validate(game)?;
    let n = game.n_actions();
    strategy1.reset(seed);
    strategy2.reset(seed);
    let mut draws = StageDraws::new(seed);
    let mut history = History::with_capacity(stages);
    for t in 0..stages {
        let d1 = strategy1.act(joint_type.theta1, Seat::One, &history)?;
        let d2 = strategy2.act(joint_type.theta2, Seat::Two, &history)?;
        for (seat, d) in [(Seat::One, &d1), (Seat::Two, &d2)] {
            d.check(n).map_err(|reason| Error::ProtocolViolation {
                stage: t + 1,
                seat,
                reason,
            })?;
        }
        let [u1, u2] = draws.next_stage();
        history.push(JointAction(
            sample_index(d1.probs(), u1),
            sample_index(d2.probs(), u2),
        ));
    }
    Ok(history)
}

/// Plays one full episode of `game.horizon()` stages.
pub fn play_episode(
    strategy1: &mut dyn MetaStrategy,
    strategy2: &mut dyn MetaStrategy,
    joint_type: JointType,
    game: &GameClass,
    seed: u64,
) -> Result<EpisodeRecord> {
    let history = play_prefix(strategy1, strategy2, joint_type, game, game.horizon(), seed)?;
    Ok(EpisodeRecord {
        joint_type,
        history,
        seed,
    })
}

/// Monte Carlo estimate of the expected total payoff of `seat`, with a 95%
/// normal-approximation half width.
pub fn expected_total_payoff(
    strategy1: &mut dyn MetaStrategy,
    strategy2: &mut dyn MetaStrategy,
    joint_type: JointType,
    game: &GameClass,
    seat: Seat,
    n_rollouts: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_rollouts == 0 {
        return Err(Error::invalid("n_rollouts must be at least 1"));
    }
    let theta = joint_type.of(seat);
    let totals = (0..n_rollouts)
        .map(|r| {
            let rec = play_episode(strategy1, strategy2, joint_type, game, derive_seed(seed, r as u64))?;
            Ok(rec.history.total_payoff(game, theta, seat))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((stats::mean(&totals), stats::normal_half_width(&totals)))
}
