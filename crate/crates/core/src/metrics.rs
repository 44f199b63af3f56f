//! Regret measures and statistical certification of consistency, compatibility and
//! socially intelligent classes.
//!
//! Certification is necessary-condition testing: the "any partner" quantifier of
//! consistency is replaced by a finite adversary suite, and the "for all types"
//! quantifier by a worst case over cells.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::TypeDistribution;
use crate::equilibrium::{pone_set, worst_pone_for, EquilibriumProfile};
use crate::error::{Error, Result};
use crate::game::{play_episode, GameClass, History, JointType, Seat, StrategyFactory, TypeId};
use crate::rng::derive_seed;
use crate::stats::{quantile, wilson_interval};

/// Normal quantile of the two-sided 95% intervals in reports.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub total: f64,
    pub per_step: f64,
    pub horizon: usize,
    pub seat: Seat,
}

impl RegretReport {
    fn new(total: f64, horizon: usize, seat: Seat) -> Self {
        Self {
            total,
            per_step: total / horizon as f64,
            horizon,
            seat,
        }
    }
}

/// External regret of `seat` (type `theta`) over `history`: best fixed action's
/// counterfactual total minus the realized total.
pub fn external_regret(
    history: &History,
    theta: TypeId,
    seat: Seat,
    game: &GameClass,
) -> Result<RegretReport> {
    if history.is_empty() {
        return Err(Error::invalid("external regret of an empty history"));
    }
    game.check_type(theta)?;
    let m = game.matrix(theta);
    let mut counterfactual = vec![0.0; game.n_actions()];
    let mut realized = 0.0;
    for step in history.steps() {
        let partner = step.of(seat.other());
        for (a, c) in counterfactual.iter_mut().enumerate() {
            *c += m.get(a, partner);
        }
        realized += m.get(step.of(seat), partner);
    }
    let best = counterfactual.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(RegretReport::new(best - realized, history.len(), seat))
}

/// Per-step altruistic-regret baseline: partner payoff under the PONE worst for the
/// partner, precomputed for every joint type and partner seat.
#[derive(Clone, Debug)]
pub struct AltruisticBaseline {
    n_types: usize,
    // [joint type][partner seat]
    worst: Vec<Option<[EquilibriumProfile; 2]>>,
}

impl AltruisticBaseline {
    pub fn new(game: &GameClass) -> Result<Self> {
        let worst = game
            .joint_types()
            .map(|jt| {
                let pone = pone_set(jt, game)?;
                Ok(match (worst_pone_for(Seat::One, &pone), worst_pone_for(Seat::Two, &pone)) {
                    (Some(a), Some(b)) => Some([a.clone(), b.clone()]),
                    _ => None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_types: game.n_types(),
            worst,
        })
    }

    pub fn worst_pone(&self, jt: JointType, partner_seat: Seat) -> Result<&EquilibriumProfile> {
        self.worst[jt.theta1 * self.n_types + jt.theta2]
            .as_ref()
            .map(|w| &w[partner_seat.index()])
            .ok_or(Error::NoPone(jt.theta1, jt.theta2))
    }

    pub fn value(&self, jt: JointType, partner_seat: Seat) -> Result<f64> {
        Ok(self.worst_pone(jt, partner_seat)?.payoff(partner_seat))
    }

    /// Altruistic regret measured in the payoffs of `partner_seat`.
    pub fn regret(
        &self,
        history: &History,
        joint_type: JointType,
        partner_seat: Seat,
        game: &GameClass,
    ) -> Result<RegretReport> {
        let baseline = self.value(joint_type, partner_seat)?;
        let partner_type = joint_type.of(partner_seat);
        let realized = history.total_payoff(game, partner_type, partner_seat);
        let horizon = history.len().max(1);
        Ok(RegretReport::new(
            baseline * history.len() as f64 - realized,
            horizon,
            partner_seat.other(),
        ))
    }
}

/// Altruistic regret of the agent opposite `partner_seat`, in the partner's payoffs,
/// relative to the PONE worst for the partner. May be negative.
pub fn altruistic_regret(
    history: &History,
    joint_type: JointType,
    partner_seat: Seat,
    game: &GameClass,
) -> Result<RegretReport> {
    joint_type.validate(game)?;
    let pone = pone_set(joint_type, game)?;
    let worst = worst_pone_for(partner_seat, &pone)
        .ok_or(Error::NoPone(joint_type.theta1, joint_type.theta2))?;
    let baseline = worst.payoff(partner_seat);
    let realized = history.total_payoff(game, joint_type.of(partner_seat), partner_seat);
    Ok(RegretReport::new(
        baseline * history.len() as f64 - realized,
        history.len().max(1),
        partner_seat.other(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Consistency,
    Compatibility,
    SiClass,
}

/// Failure statistics of one certification cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub label: String,
    pub trials: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub failure_rate_upper: f64,
    /// Smallest per-step gap met in at least `1 − δ` of this cell's trials.
    pub epsilon_quantile: f64,
    pub max_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub property: Property,
    pub subject: String,
    pub requested_delta: f64,
    pub requested_epsilon: f64,
    pub horizon: usize,
    pub epsilon_measured: f64,
    pub delta_measured: f64,
    /// Upper end of the two-sided 95% Wilson interval of the worst cell.
    pub delta_upper: f64,
    pub trials: usize,
    pub confidence: f64,
    pub pass: bool,
    pub binding: String,
    pub cells: Vec<CellReport>,
    pub note: String,
}

impl CertificationReport {
    fn assemble(
        property: Property,
        subject: String,
        requested_delta: f64,
        requested_epsilon: f64,
        horizon: usize,
        trials: usize,
        cells: Vec<CellReport>,
        note: &str,
    ) -> Self {
        let worst = cells
            .iter()
            .max_by(|a, b| a.failure_rate_upper.total_cmp(&b.failure_rate_upper))
            .expect("at least one cell");
        let delta_upper = worst.failure_rate_upper;
        let binding = worst.label.clone();
        let delta_measured = cells.iter().map(|c| c.failure_rate).fold(0.0, f64::max);
        let epsilon_measured = cells.iter().map(|c| c.epsilon_quantile).fold(f64::NEG_INFINITY, f64::max);
        Self {
            property,
            subject,
            requested_delta,
            requested_epsilon,
            horizon,
            epsilon_measured,
            delta_measured,
            delta_upper,
            trials,
            confidence: 0.95,
            pass: delta_upper <= requested_delta,
            binding,
            cells,
            note: note.into(),
        }
    }
}

fn cell(label: String, gaps: &[f64], epsilon: f64, delta: f64) -> CellReport {
    let failures = gaps.iter().filter(|g| **g > epsilon).count();
    let (_, upper) = wilson_interval(failures, gaps.len(), Z95);
    CellReport {
        label,
        trials: gaps.len(),
        failures,
        failure_rate: failures as f64 / gaps.len() as f64,
        failure_rate_upper: upper,
        epsilon_quantile: quantile(gaps, 1.0 - delta),
        max_gap: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < 30 {
        return Err(Error::invalid(format!("certification needs at least 30 trials, got {trials}")));
    }
    Ok(())
}

/// Per-step external regrets of `agent` (seat 1, type `theta`) against `adversary`.
/// The adversary's type cycles through the type space by trial index.
pub fn consistency_trials(
    agent: &StrategyFactory,
    adversary: &StrategyFactory,
    theta: TypeId,
    game: &GameClass,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let jt = JointType::new(theta, trial % game.n_types());
            let rec = play_episode(
                &mut *agent.build(),
                &mut *adversary.build(),
                jt,
                game,
                derive_seed(seed, trial as u64),
            )?;
            Ok(external_regret(&rec.history, theta, Seat::One, game)?.per_step)
        })
        .collect()
}

/// Consistency: for every (type, adversary) cell, the fraction of trials whose
/// per-step external regret exceeds `requested_epsilon`; passes when the worst
/// cell's upper confidence bound is at most `requested_delta`.
pub fn certify_consistency(
    agent: &StrategyFactory,
    requested_delta: f64,
    requested_epsilon: f64,
    game: &GameClass,
    adversaries: &[StrategyFactory],
    trials: usize,
    seed: u64,
) -> Result<CertificationReport> {
    if adversaries.is_empty() {
        return Err(Error::invalid("adversary suite is empty"));
    }
    check_trials(trials)?;
    let mut cells = Vec::new();
    for theta in 0..game.n_types() {
        for (k, adv) in adversaries.iter().enumerate() {
            let cell_seed = derive_seed(derive_seed(seed, theta as u64), k as u64);
            let gaps = consistency_trials(agent, adv, theta, game, trials, cell_seed)?;
            cells.push(cell(
                format!("type {theta} vs {}", adv.name()),
                &gaps,
                requested_epsilon,
                requested_delta,
            ));
        }
    }
    Ok(CertificationReport::assemble(
        Property::Consistency,
        agent.name().to_string(),
        requested_delta,
        requested_epsilon,
        game.horizon(),
        trials,
        cells,
        "necessary-condition test against a finite adversary suite; worst case over (type, adversary) cells",
    ))
}

/// Smallest, over PONEs, of the larger per-step shortfall of the two seats.
pub fn compatibility_gap(history: &History, jt: JointType, pone: &[EquilibriumProfile], game: &GameClass) -> f64 {
    let t = history.len() as f64;
    let realized = [
        history.total_payoff(game, jt.theta1, Seat::One) / t,
        history.total_payoff(game, jt.theta2, Seat::Two) / t,
    ];
    pone.iter()
        .map(|e| (e.payoff1 - realized[0]).max(e.payoff2 - realized[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Compatibility of `a` (seat 1) with `b` (seat 2) at `horizon`: a trial succeeds when
/// some single PONE is within `requested_epsilon` per step for both seats.
#[allow(clippy::too_many_arguments)]
pub fn certify_compatibility(
    a: &StrategyFactory,
    b: &StrategyFactory,
    requested_delta: f64,
    requested_epsilon: f64,
    horizon: usize,
    types: &TypeDistribution,
    game: &GameClass,
    trials: usize,
    seed: u64,
) -> Result<CertificationReport> {
    check_trials(trials)?;
    let game = game.with_horizon(horizon)?;
    let mut cells = Vec::new();
    for (jt, _) in types.support() {
        let pone = pone_set(jt, &game)?;
        if pone.is_empty() {
            return Err(Error::NoPone(jt.theta1, jt.theta2));
        }
        let cell_seed = derive_seed(seed, (jt.theta1 * types.n_types() + jt.theta2) as u64);
        let gaps = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let rec = play_episode(
                    &mut *a.build(),
                    &mut *b.build(),
                    jt,
                    &game,
                    derive_seed(cell_seed, trial as u64),
                )?;
                Ok(compatibility_gap(&rec.history, jt, &pone, &game))
            })
            .collect::<Result<Vec<f64>>>()?;
        cells.push(cell(format!("joint type {jt}"), &gaps, requested_epsilon, requested_delta));
    }
    Ok(CertificationReport::assemble(
        Property::Compatibility,
        format!("{} + {}", a.name(), b.name()),
        requested_delta,
        requested_epsilon,
        horizon,
        trials,
        cells,
        "per-step averages of realized play compared with PONE expected payoffs; sampling noise is absorbed into epsilon",
    ))
}

/// Requested parameters of a socially intelligent class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiRequest {
    pub delta: f64,
    pub epsilon: f64,
    pub consistency_horizon: usize,
    pub compatibility_horizon: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiClassReport {
    pub summary: CertificationReport,
    pub members: Vec<CertificationReport>,
    pub pairs: Vec<CertificationReport>,
}

/// Every member consistent at the consistency horizon and every ordered pair
/// compatible at the compatibility horizon.
#[allow(clippy::too_many_arguments)]
pub fn certify_si_class(
    members: &[StrategyFactory],
    requested: SiRequest,
    game: &GameClass,
    types: &TypeDistribution,
    adversaries: &[StrategyFactory],
    trials: usize,
    seed: u64,
) -> Result<SiClassReport> {
    if adversaries.is_empty() {
        return Err(Error::invalid("adversary suite is empty"));
    }
    if members.is_empty() {
        return Err(Error::invalid("population has no members"));
    }
    let long = game.with_horizon(requested.consistency_horizon)?;
    let member_reports = members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            certify_consistency(
                m,
                requested.delta,
                requested.epsilon,
                &long,
                adversaries,
                trials,
                derive_seed(seed, i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pair_reports = Vec::new();
    for (i, a) in members.iter().enumerate() {
        for (j, b) in members.iter().enumerate() {
            pair_reports.push(certify_compatibility(
                a,
                b,
                requested.delta,
                requested.epsilon,
                requested.compatibility_horizon,
                types,
                game,
                trials,
                derive_seed(seed, (1 << 20) + (i * members.len() + j) as u64),
            )?);
        }
    }
    let all: Vec<&CertificationReport> = member_reports.iter().chain(&pair_reports).collect();
    let binding = all
        .iter()
        .max_by(|a, b| a.delta_upper.total_cmp(&b.delta_upper))
        .expect("non-empty");
    let summary = CertificationReport {
        property: Property::SiClass,
        subject: members.iter().map(|m| m.name()).collect::<Vec<_>>().join(", "),
        requested_delta: requested.delta,
        requested_epsilon: requested.epsilon,
        horizon: requested.consistency_horizon,
        epsilon_measured: all.iter().map(|r| r.epsilon_measured).fold(f64::NEG_INFINITY, f64::max),
        delta_measured: all.iter().map(|r| r.delta_measured).fold(0.0, f64::max),
        delta_upper: binding.delta_upper,
        trials,
        confidence: 0.95,
        pass: all.iter().all(|r| r.pass),
        binding: format!("{:?} of {}: {}", binding.property, binding.subject, binding.binding),
        cells: Vec::new(),
        note: format!(
            "consistency at T = {}, compatibility at T = {}",
            requested.consistency_horizon, requested.compatibility_horizon
        ),
    };
    Ok(SiClassReport {
        summary,
        members: member_reports,
        pairs: pair_reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{
        handshake_si_agent, ConstantAgent, FlipAdversary, HandshakeCodebook,
        UniformAgent,
    };
    use crate::equilibrium::pone_set;
    use crate::game::{make_coordpref_game, PayoffMatrix};
    use std::sync::Arc;

    fn coord(h: usize) -> GameClass {
        make_coordpref_game(2, 0.6, h).unwrap()
    }

    #[test]
    fn external_regret_examples() {
        let g = coord(10);
        let h = History::from_pairs(&[(0, 0), (0, 0), (0, 0)]);
        assert_eq!(external_regret(&h, 0, Seat::One, &g).unwrap().total, 0.0);
        let h = History::from_pairs(&[(0, 0), (1, 0)]);
        let r = external_regret(&h, 0, Seat::One, &g).unwrap();
        assert!((r.total - 1.0).abs() < 1e-12);
        assert!((r.per_step - 0.5).abs() < 1e-12);
        let h = History::from_pairs(&[(1, 0), (0, 1)]);
        assert!((external_regret(&h, 0, Seat::One, &g).unwrap().total - 1.0).abs() < 1e-12);
        // Seat 2 reads its own action from the second slot.
        let h = History::from_pairs(&[(0, 0), (0, 1)]);
        assert!((external_regret(&h, 0, Seat::Two, &g).unwrap().total - 1.0).abs() < 1e-12);
        assert!(external_regret(&History::new(), 0, Seat::One, &g).is_err());
    }

    #[test]
    fn altruistic_regret_examples() {
        let g = coord(10);
        let jt = JointType::new(0, 1);
        let cases = [((0, 0), 0.0), ((1, 1), -4.0), ((0, 1), 6.0)];
        let baseline = AltruisticBaseline::new(&g).unwrap();
        for (step, expected) in cases {
            let h = History::from_pairs(&[step; 10]);
            let r = altruistic_regret(&h, jt, Seat::Two, &g).unwrap();
            assert!((r.total - expected).abs() < 1e-9, "{step:?}: {r:?}");
            assert_eq!(r.seat, Seat::One);
            let r2 = baseline.regret(&h, jt, Seat::Two, &g).unwrap();
            assert!((r.total - r2.total).abs() < 1e-12);
        }
    }

    #[test]
    fn baseline_matches_worst_pone() {
        let g = coord(10);
        let baseline = AltruisticBaseline::new(&g).unwrap();
        for jt in g.joint_types() {
            let pone = pone_set(jt, &g).unwrap();
            for seat in Seat::BOTH {
                let w = worst_pone_for(seat, &pone).unwrap();
                assert_eq!(baseline.value(jt, seat).unwrap(), w.payoff(seat));
            }
        }
    }

    #[test]
    fn altruistic_regret_ignores_ai_payoffs() {
        // Perturbing the type-2 matrix (the AI's own) leaves the partner's PONE set and
        // payoffs unchanged here, so the report must not move.
        let base = coord(10);
        let m = |rows: Vec<Vec<f64>>| PayoffMatrix::new(rows).unwrap();
        let perturbed = GameClass::new(
            2,
            vec![
                base.matrix(0).clone(),
                base.matrix(1).clone(),
                m(vec![vec![0.7, 0.1], vec![0.0, 0.95]]),
            ],
            10,
        )
        .unwrap();
        let original = GameClass::new(
            2,
            vec![
                base.matrix(0).clone(),
                base.matrix(1).clone(),
                base.matrix(1).clone(),
            ],
            10,
        )
        .unwrap();
        let h = History::from_pairs(&[(0, 1), (1, 1), (0, 0), (1, 0), (1, 1)]);
        let a = altruistic_regret(&h, JointType::new(0, 1), Seat::One, &original).unwrap();
        let b = altruistic_regret(&h, JointType::new(0, 2), Seat::One, &perturbed).unwrap();
        assert_eq!(a, b);
    }

    fn suite(n: usize) -> Vec<StrategyFactory> {
        vec![
            StrategyFactory::new("constant-0", move || Box::new(ConstantAgent::new(n, 0))),
            StrategyFactory::new("constant-1", move || Box::new(ConstantAgent::new(n, 1))),
            StrategyFactory::new("uniform", move || Box::new(UniformAgent::new(n))),
            StrategyFactory::new("adversarial-flip", move || Box::new(FlipAdversary::new(n))),
        ]
    }

    #[test]
    fn best_response_agent_is_consistent_vs_constant() {
        // Action 0 is the best response to action 0 for both CoordPref types.
        let g = coord(50);
        let agent = StrategyFactory::new("constant-0", || Box::new(ConstantAgent::new(2, 0)));
        let constant = vec![agent.clone()];
        let r = certify_consistency(&agent, 0.05, 0.0, &g, &constant, 100, 1).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.delta_measured, 0.0);
    }

    #[test]
    fn constant_agent_fails_consistency() {
        let g = coord(200);
        let agent = StrategyFactory::new("constant-0", || Box::new(ConstantAgent::new(2, 0)));
        let r = certify_consistency(&agent, 0.05, 0.1, &g, &suite(2), 30, 1).unwrap();
        assert!(!r.pass);
        assert!(r.epsilon_measured > 0.1);
    }

    #[test]
    fn certification_preconditions() {
        let g = coord(20);
        let agent = StrategyFactory::new("constant-0", || Box::new(ConstantAgent::new(2, 0)));
        assert!(certify_consistency(&agent, 0.05, 0.1, &g, &[], 30, 1).is_err());
        assert!(certify_consistency(&agent, 0.05, 0.1, &g, &suite(2), 10, 1).is_err());
        let types = TypeDistribution::uniform(2);
        let req = SiRequest {
            delta: 0.05,
            epsilon: 0.1,
            consistency_horizon: 20,
            compatibility_horizon: 10,
        };
        assert!(certify_si_class(&[agent], req, &g, &types, &[], 30, 1).is_err());
    }

    fn handshake(g: &GameClass) -> StrategyFactory {
        let g = Arc::new(g.clone());
        let cb = HandshakeCodebook::for_game(&g).unwrap();
        handshake_si_agent(cb, g, 0.1).unwrap()
    }

    #[test]
    fn handshake_pair_is_compatible() {
        let g = coord(10);
        let hs = handshake(&g);
        let types = TypeDistribution::uniform(2);
        let r = certify_compatibility(&hs, &hs, 0.05, 0.15, 10, &types, &g, 100, 3).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.epsilon_measured <= 0.1 + 1e-12);
    }

    #[test]
    fn handshake_vs_noise_is_not_compatible() {
        let g = coord(10);
        let hs = handshake(&g);
        let noise = StrategyFactory::new("uniform", || Box::new(UniformAgent::new(2)));
        let types = TypeDistribution::uniform(2);
        let r = certify_compatibility(&hs, &noise, 0.05, 0.15, 10, &types, &g, 50, 3).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn fixed_pone_pair_has_zero_gap() {
        let g = coord(10);
        let a = StrategyFactory::new("constant-1", || Box::new(ConstantAgent::new(2, 1)));
        let types = TypeDistribution::point(2, JointType::new(1, 1));
        let r = certify_compatibility(&a, &a, 0.05, 0.0, 10, &types, &g, 100, 3).unwrap();
        assert!(r.pass);
        assert!(r.epsilon_measured.abs() < 1e-12);
    }

    #[test]
    fn certification_replays() {
        let g = coord(100);
        let hs = handshake(&g);
        let a = certify_consistency(&hs, 0.05, 0.05, &g, &suite(2), 30, 9).unwrap();
        let b = certify_consistency(&hs, 0.05, 0.05, &g, &suite(2), 30, 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn constant_best_action_has_zero_regret_exhaustive() {
        // Rational 2x2 matrices on a grid of eighths.
        let vals: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
        for &a in &vals {
            for &b in &vals {
                for &c in &vals {
                    for &d in &vals {
                        let m = PayoffMatrix::new(vec![vec![a, b], vec![c, d]]).unwrap();
                        let g = GameClass::new(2, vec![m], 4).unwrap();
                        let partner = [0, 1, 1, 0];
                        let totals: Vec<f64> = (0..2)
                            .map(|x| partner.iter().map(|&p| g.matrix(0).get(x, p)).sum())
                            .collect();
                        let best = if totals[0] >= totals[1] { 0 } else { 1 };
                        let h = History::from_pairs(&partner.map(|p| (best, p)));
                        assert_eq!(external_regret(&h, 0, Seat::One, &g).unwrap().total, 0.0);
                    }
                }
            }
        }
    }
}
