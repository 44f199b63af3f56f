//! The agent zoo: no-regret learners, handshake conventions, grim trigger,
//! recommendation-following CCE trackers, test adversaries, and population sampling.

use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::{best_response_to, is_cce, pone_set, utilitarian_pone, JointDistribution};
use crate::error::{Error, Result};
use crate::game::{
    Action, GameClass, History, JointAction, JointType, MetaStrategy, MixedStrategy, Seat,
    StrategyFactory, TypeId, TOL,
};
use crate::rng::{derive_seed, stream_rng, unit_interval, sample_index, STREAM_PAIRING};

/// Hedge learning rate tuned for horizon `horizon`: `√(8 ln N / T)`.
pub fn default_learning_rate(n_actions: usize, horizon: usize) -> f64 {
    (8.0 * (n_actions as f64).ln() / horizon as f64).sqrt()
}

/// Running full-information statistics of one seat: counterfactual cumulative payoff
/// of every fixed action and the realized cumulative payoff.
#[derive(Clone, Debug)]
struct RegretLedger {
    counterfactual: Vec<f64>,
    realized: f64,
    seen: usize,
}

impl RegretLedger {
    fn new(n: usize) -> Self {
        Self {
            counterfactual: vec![0.0; n],
            realized: 0.0,
            seen: 0,
        }
    }

    fn clear(&mut self) {
        self.counterfactual.iter_mut().for_each(|x| *x = 0.0);
        self.realized = 0.0;
        self.seen = 0;
    }

    fn observe(&mut self, game: &GameClass, theta: TypeId, seat: Seat, step: JointAction) {
        let m = game.matrix(theta);
        let partner = step.of(seat.other());
        for (a, c) in self.counterfactual.iter_mut().enumerate() {
            *c += m.get(a, partner);
        }
        self.realized += m.get(step.of(seat), partner);
        self.seen += 1;
    }

    /// Folds in the steps of `history` not seen yet.
    fn catch_up(&mut self, game: &GameClass, theta: TypeId, seat: Seat, history: &History) {
        if history.len() < self.seen {
            self.clear();
        }
        for step in &history.steps()[self.seen..] {
            self.observe(game, theta, seat, *step);
        }
    }

    fn external_regret(&self) -> f64 {
        self.counterfactual.iter().copied().fold(f64::NEG_INFINITY, f64::max) - self.realized
    }

    fn hedge(&self, eta: f64) -> MixedStrategy {
        hedge_distribution(&self.counterfactual, eta)
    }

    fn regret_matching(&self) -> MixedStrategy {
        let regrets: Vec<f64> = self.counterfactual.iter().map(|c| c - self.realized).collect();
        regret_matching_distribution(&regrets)
    }
}

/// Exponential weights over cumulative payoffs.
pub fn hedge_distribution(cumulative: &[f64], eta: f64) -> MixedStrategy {
    let max = cumulative.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = cumulative.iter().map(|c| (eta * (c - max)).exp()).collect();
    MixedStrategy::from_weights(&w)
}

/// Plays proportionally to positive regrets; uniform when none is positive.
pub fn regret_matching_distribution(regrets: &[f64]) -> MixedStrategy {
    let pos: Vec<f64> = regrets.iter().map(|r| r.max(0.0)).collect();
    MixedStrategy::from_weights(&pos)
}

/// Always plays the same action.
#[derive(Clone, Debug)]
pub struct ConstantAgent {
    n: usize,
    action: Action,
    name: String,
}

impl ConstantAgent {
    pub fn new(n: usize, action: Action) -> Self {
        Self {
            n,
            action,
            name: format!("constant-{action}"),
        }
    }
}

impl MetaStrategy for ConstantAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn reset(&mut self, _: u64) {}

    fn act(&mut self, _: TypeId, _: Seat, _: &History) -> Result<MixedStrategy> {
        Ok(MixedStrategy::pure(self.n, self.action))
    }

    fn box_clone(&self) -> Box<dyn MetaStrategy> {
        Box::new(self.clone())
    }
}

#[derive(Clone, Debug)]
pub struct UniformAgent {
    n: usize,
}

impl UniformAgent {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl MetaStrategy for UniformAgent {
    fn name(&self) -> &str {
        "uniform"
    }

    fn reset(&mut self, _: u64) {}

    fn act(&mut self, _: TypeId, _: Seat, _: &History) -> Result<MixedStrategy> {
        Ok(MixedStrategy::uniform(self.n))
    }

    fn box_clone(&self) -> Box<dyn MetaStrategy> {
        Box::new(self.clone())
    }
}

/// Multiplicative weights over counterfactual payoffs against the observed partner
/// actions.
#[derive(Clone, Debug)]
pub struct HedgeAgent {
    game: Arc<GameClass>,
    eta: f64,
    ledger: RegretLedger,
}

impl HedgeAgent {
    pub fn new(game: Arc<GameClass>, learning_rate: f64) -> Self {
        let n = game.n_actions();
        Self {
            game,
            eta: learning_rate,
            ledger: RegretLedger::new(n),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.eta
    }
}

impl MetaStrategy for HedgeAgent {
    fn name(&self) -> &str {
        "hedge"
    }

    fn reset(&mut self, _: u64) {
        self.ledger.clear();
    }

    fn act(&mut self, theta: TypeId, seat: Seat, history: &History) -> Result<MixedStrategy> {
        self.ledger.catch_up(&self.game, theta, seat, history);
        Ok(self.ledger.hedge(self.eta))
    }

    fn box_clone(&self) -> Box<dyn MetaStrategy> {
        Box::new(self.clone())
    }
}

pub fn hedge_agent(learning_rate: f64, game: Arc<GameClass>) -> Result<HedgeAgent> {
    if !(learning_rate > 0.0) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    Ok(HedgeAgent::new(game, learning_rate))
}

/// Regret matching on cumulative external regrets of the realized play.
#[derive(Clone, Debug)]
pub struct RegretMatchingAgent {
    game: Arc<GameClass>,
    ledger: RegretLedger,
}

impl RegretMatchingAgent {
    pub fn new(game: Arc<GameClass>) -> Self {
        let n = game.n_actions();
        Self {
            game,
            ledger: RegretLedger::new(n),
        }
    }
}

pub fn regret_matching_agent(game: Arc<GameClass>) -> RegretMatchingAgent {
    RegretMatchingAgent::new(game)
}

impl MetaStrategy for RegretMatchingAgent {
    fn name(&self) -> &str {
        "regret-matching"
    }

    fn reset(&mut self, _: u64) {
        self.ledger.clear();
    }

    fn act(&mut self, theta: TypeId, seat: Seat, history: &History) -> Result<MixedStrategy> {
        self.ledger.catch_up(&self.game, theta, seat, history);
        Ok(self.ledger.regret_matching())
    }

    fn box_clone(&self) -> Box<dyn MetaStrategy> {
        Box::new(self.clone())
    }
}

/// Fixed-length base-N encoding of types used by the handshake prefix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HandshakeCodebook {
    n_actions: usize,
    n_types: usize,
    code_length: usize,
}

impl HandshakeCodebook {
    pub fn new(n_actions: usize, n_types: usize) -> Result<Self> {
        if n_actions < 2 && n_types > 1 {
            return Err(Error::invalid("a handshake needs at least two actions"));
        }
        if n_types == 0 {
            return Err(Error::invalid("type space must be non-empty"));
        }
        // ceil(log_N |Θ|) without floating point.
        let mut code_length = 0;
        let mut capacity = 1usize;
        while capacity < n_types {
            capacity = capacity.saturating_mul(n_actions);
            code_length += 1;
        }
        Ok(Self {
            n_actions,
            n_types,
            code_length,
        })
    }

    pub fn for_game(game: &GameClass) -> Result<Self> {
        Self::new(game.n_actions(), game.n_types())
    }

    pub fn code_length(&self) -> usize {
        self.code_length
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    /// Most significant digit first.
    pub fn encode(&self, theta: TypeId) -> Vec<Action> {
        let mut digits = vec![0; self.code_length];
        let mut rest = theta;
        for d in digits.iter_mut().rev() {
            *d = rest % self.n_actions;
            rest /= self.n_actions;
        }
        digits
    }

    /// Inverse of [`encode`](Self::encode); `None` for sequences no type encodes to.
    pub fn decode(&self, code: &[Action]) -> Option<TypeId> {
        if code.len() != self.code_length || code.iter().any(|&a| a >= self.n_actions) {
            return None;
        }
        let theta = code.iter().fold(0usize, |acc, &d| acc * self.n_actions + d);
        (theta < self.n_types).then_some(theta)
    }

    /// Types whose code starts with `prefix`.
    pub fn consistent_types(&self, prefix: &[Action]) -> Vec<TypeId> {
        (0..self.n_types)
            .filter(|&t| self.encode(t).starts_with(prefix))
            .collect()
    }
}

/// What a convention agent does once its partner breaks the convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeviationResponse {
    /// Switch to Hedge, replaying the whole observed history.
    Hedge { learning_rate: f64 },
    /// Play the pure action minimizing the partner's best achievable payoff.
    GrimTrigger,
}

/// Agreed play per joint type: the own-seat strategy of each seat, or `None` when
/// the joint type has no PONE.
#[derive(Debug)]
struct ConventionTable {
    n_types: usize,
    agreed: Vec<Option<[MixedStrategy; 2]>>,
}

impl ConventionTable {
    fn build(game: &GameClass) -> Result<Self> {
        let n_types = game.n_types();
        let agreed = game
            .joint_types()
            .map(|jt| {
                let pone = pone_set(jt, game)?;
                Ok(utilitarian_pone(&pone).map(|e| [e.strategy1.clone(), e.strategy2.clone()]))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n_types, agreed })
    }

    fn get(&self, jt: JointType) -> Option<&[MixedStrategy; 2]> {
        self.agreed[jt.theta1 * self.n_types + jt.theta2].as_ref()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Phase {
    Handshake,
    Agreed(JointType),
    Fallback,
    Punish(Action),
}

/// Handshake convention: announce the own type, decode the partner's, play the
/// utilitarian PONE of the decoded joint type, and react to any zero-likelihood
/// partner action with the configured [`DeviationResponse`].
#[derive(Clone, Debug)]
pub struct ConventionAgent {
    game: Arc<GameClass>,
    codebook: HandshakeCodebook,
    table: Arc<ConventionTable>,
    response: DeviationResponse,
    name: &'static str,
    phase: Phase,
    partner_code: Vec<Action>,
    ledger: RegretLedger,
}

impl ConventionAgent {
    fn new(
        game: Arc<GameClass>,
        codebook: HandshakeCodebook,
        table: Arc<ConventionTable>,
        response: DeviationResponse,
    ) -> Self {
        let n = game.n_actions();
        let name = match response {
            DeviationResponse::Hedge { .. } => "handshake-si",
            DeviationResponse::GrimTrigger => "grim-trigger",
        };
        Self {
            game,
            codebook,
            table,
            response,
            name,
            phase: Phase::Handshake,
            partner_code: Vec::new(),
            ledger: RegretLedger::new(n),
        }
    }

    /// True once the partner has broken the convention.
    pub fn deviated(&self) -> bool {
        matches!(self.phase, Phase::Fallback | Phase::Punish(_))
    }

    fn joint_type(&self, own: TypeId, partner: TypeId, seat: Seat) -> JointType {
        match seat {
            Seat::One => JointType::new(own, partner),
            Seat::Two => JointType::new(partner, own),
        }
    }

    fn complete_handshake(&mut self, theta: TypeId, seat: Seat) {
        let Some(partner) = self.codebook.decode(&self.partner_code) else {
            self.on_deviation(seat);
            return;
        };
        let jt = self.joint_type(theta, partner, seat);
        if self.table.get(jt).is_some() {
            self.phase = Phase::Agreed(jt);
        } else {
            self.on_deviation(seat);
        }
    }

    fn on_deviation(&mut self, seat: Seat) {
        self.phase = match self.response {
            DeviationResponse::Hedge { .. } => Phase::Fallback,
            DeviationResponse::GrimTrigger => {
                let candidates = match self.phase {
                    Phase::Agreed(jt) => vec![jt.of(seat.other())],
                    _ => {
                        let c = self.codebook.consistent_types(&self.partner_code);
                        if c.is_empty() {
                            (0..self.codebook.n_types()).collect()
                        } else {
                            c
                        }
                    }
                };
                Phase::Punish(minimax_punishment(&self.game, &candidates))
            }
        };
    }

    fn observe(&mut self, theta: TypeId, seat: Seat, t: usize, step: JointAction) {
        self.ledger.observe(&self.game, theta, seat, step);
        let partner_action = step.of(seat.other());
        match self.phase {
            Phase::Handshake => {
                self.partner_code.push(partner_action);
                if self.codebook.consistent_types(&self.partner_code).is_empty() {
                    self.on_deviation(seat);
                } else if t + 1 == self.codebook.code_length() {
                    self.complete_handshake(theta, seat);
                }
            }
            Phase::Agreed(jt) => {
                let partner_sigma = &self.table.get(jt).expect("agreed joint type has a PONE")
                    [seat.other().index()];
                if partner_sigma.prob(partner_action) <= TOL {
                    self.on_deviation(seat);
                }
            }
            Phase::Fallback | Phase::Punish(_) => {}
        }
    }
}

/// Own pure action minimizing the best payoff any candidate partner type can reach.
fn minimax_punishment(game: &GameClass, partner_types: &[TypeId]) -> Action {
    let n = game.n_actions();
    let worst_case = |own: Action| {
        partner_types
            .iter()
            .flat_map(|&t| (0..n).map(move |b| game.matrix(t).get(b, own)))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    (0..n)
        .min_by(|&a, &b| worst_case(a).total_cmp(&worst_case(b)).then(a.cmp(&b)))
        .unwrap_or(0)
}

impl MetaStrategy for ConventionAgent {
    fn name(&self) -> &str {
        self.name
    }

    fn reset(&mut self, _: u64) {
        self.phase = Phase::Handshake;
        self.partner_code.clear();
        self.ledger.clear();
    }

    fn act(&mut self, theta: TypeId, seat: Seat, history: &History) -> Result<MixedStrategy> {
        if history.len() < self.ledger.seen {
            self.reset(0);
        }
        if self.ledger.seen == 0 && self.codebook.code_length() == 0 && self.phase == Phase::Handshake {
            self.complete_handshake(theta, seat);
        }
        for t in self.ledger.seen..history.len() {
            self.observe(theta, seat, t, history.steps()[t]);
        }
        let t = history.len();
        let n = self.game.n_actions();
        Ok(match &self.phase {
            Phase::Handshake => MixedStrategy::pure(n, self.codebook.encode(theta)[t]),
            Phase::Agreed(jt) => self.table.get(*jt).expect("agreed joint type has a PONE")
                [seat.index()]
            .clone(),
            Phase::Fallback => match self.response {
                DeviationResponse::Hedge { learning_rate } => self.ledger.hedge(learning_rate),
                DeviationResponse::GrimTrigger => unreachable!("grim trigger never falls back"),
            },
            Phase::Punish(a) => MixedStrategy::pure(n, *a),
        })
    }

    fn box_clone(&self) -> Box<dyn MetaStrategy> {
        Box::new(self.clone())
    }
}

fn convention_factory(
    codebook: HandshakeCodebook,
    game: Arc<GameClass>,
    response: DeviationResponse,
) -> Result<StrategyFactory> {
    if codebook.code_length() >= game.horizon() {
        return Err(Error::invalid(format!(
            "handshake of length {} does not fit horizon {}",
            codebook.code_length(),
            game.horizon()
        )));
    }
    let table = Arc::new(ConventionTable::build(&game)?);
    let proto = ConventionAgent::new(game, codebook, table, response);
    Ok(StrategyFactory::new(proto.name, move || Box::new(proto.clone())))
}

/// Handshake agent with a Hedge fallback (socially intelligent construction).
pub fn handshake_si_agent(
    codebook: HandshakeCodebook,
    game: Arc<GameClass>,
    fallback_learning_rate: f64,
) -> Result<StrategyFactory> {
    if !(fallback_learning_rate > 0.0) {
        return Err(Error::invalid("fallback learning rate must be positive"));
    }
    convention_factory(
        codebook,
        game,
        DeviationResponse::Hedge {
            learning_rate: fallback_learning_rate,
        },
    )
}

/// Handshake agent that punishes any deviation for the rest of the episode.
pub fn grim_trigger_agent(codebook: HandshakeCodebook, game: Arc<GameClass>) -> Result<StrategyFactory> {
    convention_factory(codebook, game, DeviationResponse::GrimTrigger)
}

/// Follows a shared stream of joint-action recommendations drawn from `target` while
/// its own per-step external regret stays within `slack + 1/√t`; afterwards plays
/// regret matching for the rest of the episode.
#[derive(Clone, Debug)]
pub struct CceTracker {
    game: Arc<GameClass>,
    target: Arc<JointDistribution>,
    slack: f64,
    shared_seed: u64,
    stream: ChaCha8Rng,
    ledger: RegretLedger,
    fired: bool,
}

/// Coefficient of the `1/√t` term of the watchdog threshold.
pub const WATCHDOG_C: f64 = 1.0;

impl CceTracker {
    pub fn fired(&self) -> bool {
        self.fired
    }

    fn threshold(&self, t: usize) -> f64 {
        self.slack + WATCHDOG_C / (t as f64).sqrt()
    }

    /// The watchdog ignores the first `1/slack²` stages, where sampling noise alone
    /// routinely exceeds the threshold.
    fn armed(&self, t: usize) -> bool {
        t as f64 * self.slack * self.slack >= 1.0
    }
}

impl MetaStrategy for CceTracker {
    fn name(&self) -> &str {
        "cce-tracking"
    }

    fn reset(&mut self, episode_seed: u64) {
        // Both seats derive the identical stream from the shared seed.
        self.stream = stream_rng(derive_seed(self.shared_seed, episode_seed), 0);
        self.ledger.clear();
        self.fired = false;
    }

    fn act(&mut self, theta: TypeId, seat: Seat, history: &History) -> Result<MixedStrategy> {
        for step in &history.steps()[self.ledger.seen.min(history.len())..] {
            self.ledger.observe(&self.game, theta, seat, *step);
            let t = self.ledger.seen;
            if !self.fired && self.armed(t) && self.ledger.external_regret() / t as f64 > self.threshold(t) {
                self.fired = true;
            }
        }
        let joint = sample_index(self.target.flat(), unit_interval(self.stream.next_u64()));
        let n = self.target.n();
        if self.fired {
            return Ok(self.ledger.regret_matching());
        }
        let own = match seat {
            Seat::One => joint / n,
            Seat::Two => joint % n,
        };
        Ok(MixedStrategy::pure(n, own))
    }

    fn box_clone(&self) -> Box<dyn MetaStrategy> {
        Box::new(self.clone())
    }

    fn history_deterministic(&self) -> bool {
        false
    }
}

/// A recommendation-following CCE tracker; `target` must be a CCE of every joint
/// type in `supported`.
pub fn cce_tracker(
    target: JointDistribution,
    game: Arc<GameClass>,
    watchdog_slack: f64,
    shared_seed: u64,
    supported: &[JointType],
) -> Result<CceTracker> {
    if target.n() != game.n_actions() {
        return Err(Error::InvalidPopulation("CCE target has the wrong dimension".into()));
    }
    for &jt in supported {
        let (ok, gain) = is_cce(&target, jt, &game, 1e-9)?;
        if !ok {
            return Err(Error::InvalidPopulation(format!(
                "target is not a CCE for joint type {jt} (deviation gain {gain:.6})"
            )));
        }
    }
    let n = game.n_actions();
    Ok(CceTracker {
        game,
        target: Arc::new(target),
        slack: watchdog_slack,
        shared_seed,
        stream: stream_rng(shared_seed, 0),
        ledger: RegretLedger::new(n),
        fired: false,
    })
}

/// Factory for CCE trackers. The same factory serves both seats; each instance plays
/// its own seat's component.
pub fn cce_tracking_agent(
    target: JointDistribution,
    game: Arc<GameClass>,
    watchdog_slack: f64,
    shared_seed: u64,
    supported: &[JointType],
) -> Result<StrategyFactory> {
    let proto = cce_tracker(target, game, watchdog_slack, shared_seed, supported)?;
    Ok(StrategyFactory::new("cce-tracking", move || Box::new(proto.clone())))
}

/// Convenience pair of CCE trackers for seats 1 and 2.
pub fn cce_tracking_pair(
    target: JointDistribution,
    game: Arc<GameClass>,
    watchdog_slack: f64,
    shared_seed: u64,
    supported: &[JointType],
) -> Result<(Box<dyn MetaStrategy>, Box<dyn MetaStrategy>)> {
    let f = cce_tracking_agent(target, game, watchdog_slack, shared_seed, supported)?;
    Ok((f.build(), f.build()))
}

/// Answers with the action the partner has used least so far; ties go to an action
/// other than the partner's last one, then to the lowest index.
#[derive(Clone, Debug)]
pub struct FlipAdversary {
    n: usize,
    partner: PartnerCounts,
}

impl FlipAdversary {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            partner: PartnerCounts::new(n),
        }
    }
}

impl MetaStrategy for FlipAdversary {
    fn name(&self) -> &str {
        "adversarial-flip"
    }

    fn reset(&mut self, _: u64) {
        self.partner.clear();
    }

    fn act(&mut self, _: TypeId, seat: Seat, history: &History) -> Result<MixedStrategy> {
        let counts = self.partner.update(seat, history);
        let last = history.steps().last().map(|s| s.of(seat.other()));
        let action = (0..self.n)
            .min_by_key(|&a| (counts[a], Some(a) == last, a))
            .unwrap_or(0);
        Ok(MixedStrategy::pure(self.n, action))
    }

    fn box_clone(&self) -> Box<dyn MetaStrategy> {
        Box::new(self.clone())
    }
}

/// Running counts of the partner's actions, caught up from the history on each call.
#[derive(Clone, Debug)]
struct PartnerCounts {
    counts: Vec<usize>,
    seen: usize,
}

impl PartnerCounts {
    fn new(n: usize) -> Self {
        Self {
            counts: vec![0; n],
            seen: 0,
        }
    }

    fn clear(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.seen = 0;
    }

    fn update(&mut self, seat: Seat, history: &History) -> &[usize] {
        if history.len() < self.seen {
            self.clear();
        }
        for s in &history.steps()[self.seen..] {
            self.counts[s.of(seat.other())] += 1;
        }
        self.seen = history.len();
        &self.counts
    }
}

/// Best response (under its own type) to the partner's empirical action frequencies.
#[derive(Clone, Debug)]
pub struct EmpiricalBestResponse {
    game: Arc<GameClass>,
    partner: PartnerCounts,
}

impl EmpiricalBestResponse {
    pub fn new(game: Arc<GameClass>) -> Self {
        let partner = PartnerCounts::new(game.n_actions());
        Self { game, partner }
    }
}

impl MetaStrategy for EmpiricalBestResponse {
    fn name(&self) -> &str {
        "best-response-empirical"
    }

    fn reset(&mut self, _: u64) {
        self.partner.clear();
    }

    fn act(&mut self, theta: TypeId, seat: Seat, history: &History) -> Result<MixedStrategy> {
        let n = self.game.n_actions();
        let counts: Vec<f64> = self.partner.update(seat, history).iter().map(|&c| c as f64).collect();
        let empirical = MixedStrategy::from_weights(&counts);
        let (a, _) = best_response_to(self.game.matrix(theta), &empirical);
        Ok(MixedStrategy::pure(n, a))
    }

    fn box_clone(&self) -> Box<dyn MetaStrategy> {
        Box::new(self.clone())
    }
}

/// A weighted set of strategies (the population distribution).
#[derive(Clone, Debug)]
pub struct Population {
    name: String,
    members: Vec<(StrategyFactory, f64)>,
}

impl Population {
    pub fn new(name: impl Into<String>, members: Vec<(StrategyFactory, f64)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidPopulation("population must be non-empty".into()));
        }
        if members.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(Error::InvalidPopulation("member weights must be non-negative".into()));
        }
        let total: f64 = members.iter().map(|(_, w)| w).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidPopulation("member weights sum to zero".into()));
        }
        let members = members.into_iter().map(|(f, w)| (f, w / total)).collect();
        Ok(Self {
            name: name.into(),
            members,
        })
    }

    pub fn singleton(name: impl Into<String>, factory: StrategyFactory) -> Self {
        Self {
            name: name.into(),
            members: vec![(factory, 1.0)],
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn members(&self) -> &[(StrategyFactory, f64)] {
        &self.members
    }

    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|(_, w)| *w).collect()
    }

    pub fn sample_index(&self, u: f64) -> usize {
        sample_index(&self.weights(), u)
    }
}

/// Distribution over joint types, stored row-major `[θ₁ * |Θ| + θ₂]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeDistribution {
    n_types: usize,
    weights: Vec<f64>,
}

impl TypeDistribution {
    pub fn new(n_types: usize, weights: Vec<f64>) -> Result<Self> {
        if n_types == 0 || weights.len() != n_types * n_types {
            return Err(Error::invalid("type distribution must cover Θ×Θ"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("type distribution has a negative weight"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > TOL {
            return Err(Error::invalid(format!("type distribution sums to {total}")));
        }
        Ok(Self { n_types, weights })
    }

    pub fn uniform(n_types: usize) -> Self {
        let k = n_types * n_types;
        Self {
            n_types,
            weights: vec![1.0 / k as f64; k],
        }
    }

    pub fn point(n_types: usize, jt: JointType) -> Self {
        let mut weights = vec![0.0; n_types * n_types];
        weights[jt.theta1 * n_types + jt.theta2] = 1.0;
        Self { n_types, weights }
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    pub fn weight(&self, jt: JointType) -> f64 {
        self.weights[jt.theta1 * self.n_types + jt.theta2]
    }

    /// Joint types with positive probability, with their weights.
    pub fn support(&self) -> Vec<(JointType, f64)> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, w)| (JointType::new(i / self.n_types, i % self.n_types), *w))
            .collect()
    }

    pub fn sample(&self, u: f64) -> JointType {
        let i = sample_index(&self.weights, u);
        JointType::new(i / self.n_types, i % self.n_types)
    }
}

/// An episode pairing: one strategy per seat and the joint type.
pub struct Pairing {
    pub strategy1: Box<dyn MetaStrategy>,
    pub strategy2: Box<dyn MetaStrategy>,
    pub joint_type: JointType,
    /// Population indices of the two members.
    pub members: (usize, usize),
}

/// Draws two members independently from the population and a joint type.
pub fn sample_pairing(population: &Population, types: &TypeDistribution, seed: u64) -> Pairing {
    let mut rng = stream_rng(seed, STREAM_PAIRING);
    let i = population.sample_index(rng.gen());
    let j = population.sample_index(rng.gen());
    let joint_type = types.sample(rng.gen());
    Pairing {
        strategy1: population.members[i].0.build(),
        strategy2: population.members[j].0.build(),
        joint_type,
        members: (i, j),
    }
}
