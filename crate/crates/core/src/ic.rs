//! Imitate-then-commit: imitate the population for `T̃` stages, then commit to a
//! mixed strategy drawn from a mixture built from the observed joint play.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::JointDistribution;
use crate::error::{Error, Result};
use crate::game::{History, MetaStrategy, MixedStrategy, PayoffMatrix, Seat, StrategyFactory, TypeId};
use crate::imitation::{imitation_tv_bound, EmpiricalPolicy};
use crate::rng::{derive_seed, sample_index, stream_rng, STREAM_STRATEGY};

/// Frequency histogram of the joint actions in a history prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct JointEmpirical {
    pub distribution: JointDistribution,
    pub prefix_len: usize,
}

pub fn empirical_joint_strategy(history: &History, imitation_horizon: usize, n: usize) -> Result<JointEmpirical> {
    if imitation_horizon == 0 {
        return Err(Error::invalid("imitation horizon must be at least 1"));
    }
    if history.len() < imitation_horizon {
        return Err(Error::invalid(format!(
            "history of length {} is shorter than the prefix {imitation_horizon}",
            history.len()
        )));
    }
    let mut weights = vec![0.0; n * n];
    for s in &history.steps()[..imitation_horizon] {
        if s.0 >= n || s.1 >= n {
            return Err(Error::invalid("action index out of range"));
        }
        weights[s.0 * n + s.1] += 1.0;
    }
    weights.iter_mut().for_each(|w| *w /= imitation_horizon as f64);
    Ok(JointEmpirical {
        distribution: JointDistribution::from_flat(n, weights)?,
        prefix_len: imitation_horizon,
    })
}

/// A finite mixture over mixed strategies.
#[derive(Clone, Debug, PartialEq)]
pub struct CommitMixture {
    pub components: Vec<(MixedStrategy, f64)>,
}

impl CommitMixture {
    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|(_, w)| *w).collect()
    }

    pub fn sample(&self, u: f64) -> &MixedStrategy {
        &self.components[sample_index(&self.weights(), u)].0
    }

    /// Expected value, over the mixture, of the partner's best response to the drawn
    /// strategy. `partner` is the partner's own-row matrix.
    pub fn partner_best_response_value(&self, partner: &PayoffMatrix) -> f64 {
        self.components
            .iter()
            .map(|(x, w)| {
                let best = (0..partner.n())
                    .map(|b| partner.action_value(b, x))
                    .fold(f64::NEG_INFINITY, f64::max);
                w * best
            })
            .sum()
    }
}

/// Own-seat marginal of `z` decomposed into pure strategies; zero-weight components
/// are omitted.
pub fn commit_mixture(z: &JointEmpirical, own_seat: Seat) -> CommitMixture {
    let marginal = z.distribution.marginal(own_seat);
    let n = marginal.n();
    CommitMixture {
        components: marginal
            .probs()
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(a, w)| (MixedStrategy::pure(n, a), *w))
            .collect(),
    }
}

/// Partner's expected payoff when joint play follows `z`, the partner sitting
/// opposite `own_seat`.
pub fn partner_value_under(z: &JointDistribution, own_seat: Seat, partner: &PayoffMatrix) -> f64 {
    let n = z.n();
    let mut v = 0.0;
    for a1 in 0..n {
        for a2 in 0..n {
            let (own, other) = match own_seat {
                Seat::One => (a1, a2),
                Seat::Two => (a2, a1),
            };
            v += z.get(a1, a2) * partner.get(other, own);
        }
    }
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IcConfig {
    pub imitation_horizon: usize,
    pub total_horizon: usize,
    pub seat: Seat,
}

impl IcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.imitation_horizon == 0 || self.imitation_horizon >= self.total_horizon {
            return Err(Error::invalid(format!(
                "need 0 < T̃ < T, got T̃ = {}, T = {}",
                self.imitation_horizon, self.total_horizon
            )));
        }
        Ok(())
    }
}

/// Imitates for `T̃` stages, then plays a once-drawn commitment i.i.d.
#[derive(Clone, Debug)]
pub struct IcStrategy {
    policy: Arc<EmpiricalPolicy>,
    config: IcConfig,
    episode_seed: u64,
    committed: Option<MixedStrategy>,
}

impl IcStrategy {
    pub fn new(policy: Arc<EmpiricalPolicy>, config: IcConfig) -> Result<Self> {
        config.validate()?;
        if policy.imitation_horizon() != config.imitation_horizon {
            return Err(Error::invalid(format!(
                "policy imitates {} stages, config asks for {}",
                policy.imitation_horizon(),
                config.imitation_horizon
            )));
        }
        if policy.seat() != config.seat {
            return Err(Error::invalid("policy seat differs from the configured seat"));
        }
        Ok(Self {
            policy,
            config,
            episode_seed: 0,
            committed: None,
        })
    }

    /// The strategy drawn at the end of the imitation phase, if any.
    pub fn committed(&self) -> Option<&MixedStrategy> {
        self.committed.as_ref()
    }
}

impl MetaStrategy for IcStrategy {
    fn name(&self) -> &str {
        "imitate-then-commit"
    }

    fn reset(&mut self, episode_seed: u64) {
        self.episode_seed = episode_seed;
        self.committed = None;
    }

    fn act(&mut self, theta: TypeId, seat: Seat, history: &History) -> Result<MixedStrategy> {
        let t = history.len();
        if t >= self.config.total_horizon {
            return Err(Error::ProtocolViolation {
                stage: t + 1,
                seat,
                reason: format!("history exceeds the horizon {}", self.config.total_horizon),
            });
        }
        if seat != self.config.seat {
            return Err(Error::invalid(format!("configured for seat {} but seated at {seat}", self.config.seat)));
        }
        if t < self.config.imitation_horizon {
            self.committed = None;
            return Ok(self.policy.get(theta, history.steps()));
        }
        if let Some(x) = &self.committed {
            return Ok(x.clone());
        }
        let z = empirical_joint_strategy(history, self.config.imitation_horizon, self.policy.n_actions())?;
        let mixture = commit_mixture(&z, seat);
        let stream = STREAM_STRATEGY + seat.index() as u64;
        let u = stream_rng(derive_seed(self.episode_seed, stream), 0).gen::<f64>();
        let x = mixture.sample(u).clone();
        self.committed = Some(x.clone());
        Ok(x)
    }

    fn box_clone(&self) -> Box<dyn MetaStrategy> {
        Box::new(self.clone())
    }

    fn history_deterministic(&self) -> bool {
        false
    }
}

pub fn ic_meta_strategy(policy: Arc<EmpiricalPolicy>, config: IcConfig) -> Result<StrategyFactory> {
    let proto = IcStrategy::new(policy, config)?;
    Ok(StrategyFactory::new("imitate-then-commit", move || Box::new(proto.clone())))
}

/// `2δ + δ(K) + (2(T − T̃)/T + 1)·ε` with `δ(K)` the imitation TV bound.
pub fn ic_regret_bound(
    delta: f64,
    epsilon: f64,
    k: usize,
    n_actions: usize,
    imitation_horizon: usize,
    horizon: usize,
    n_types: usize,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid(format!("δ = {delta} outside [0, 1]")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!("ε = {epsilon} is negative")));
    }
    if imitation_horizon == 0 || imitation_horizon >= horizon {
        return Err(Error::invalid("need 0 < T̃ < T"));
    }
    let tv = imitation_tv_bound(n_actions, imitation_horizon, n_types, k)?;
    let t = horizon as f64;
    Ok(2.0 * delta + tv + (2.0 * (t - imitation_horizon as f64) / t + 1.0) * epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{hedge_agent, ConstantAgent, Population, TypeDistribution};
    use crate::game::{make_coordpref_game, play_episode, GameClass, JointAction, JointType};
    use crate::imitation::{fit_imitation, generate_dataset};
    use crate::stats::mean;
    use proptest::prelude::*;

    fn coord(h: usize) -> GameClass {
        make_coordpref_game(2, 0.6, h).unwrap()
    }

    #[test]
    fn empirical_joint_examples() {
        let z = empirical_joint_strategy(&History::from_pairs(&[(0, 1), (0, 1)]), 2, 2).unwrap();
        assert_eq!(z.distribution.get(0, 1), 1.0);
        let z = empirical_joint_strategy(&History::from_pairs(&[(0, 0), (1, 1)]), 2, 2).unwrap();
        assert_eq!((z.distribution.get(0, 0), z.distribution.get(1, 1)), (0.5, 0.5));
        let z = empirical_joint_strategy(&History::from_pairs(&[(0, 0), (1, 1), (1, 1)]), 2, 2).unwrap();
        assert_eq!((z.distribution.get(0, 0), z.distribution.get(1, 1)), (0.5, 0.5));
        assert_eq!(z.prefix_len, 2);
        assert!(empirical_joint_strategy(&History::from_pairs(&[(0, 0)]), 0, 2).is_err());
        assert!(empirical_joint_strategy(&History::from_pairs(&[(0, 0)]), 2, 2).is_err());
    }

    #[test]
    fn commit_mixture_examples() {
        let point = empirical_joint_strategy(&History::from_pairs(&[(0, 0)]), 1, 2).unwrap();
        let m = commit_mixture(&point, Seat::One);
        assert_eq!(m.components, vec![(MixedStrategy::pure(2, 0), 1.0)]);

        let z = empirical_joint_strategy(&History::from_pairs(&[(0, 0), (1, 1)]), 2, 2).unwrap();
        let m = commit_mixture(&z, Seat::One);
        assert_eq!(
            m.components,
            vec![(MixedStrategy::pure(2, 0), 0.5), (MixedStrategy::pure(2, 1), 0.5)]
        );
        let partner = coord(2).matrix(1).clone();
        let br = m.partner_best_response_value(&partner);
        let under = partner_value_under(&z.distribution, Seat::One, &partner);
        assert!((br - 0.8).abs() < 1e-12);
        assert!((under - 0.8).abs() < 1e-12);
    }

    fn always_zero_policy(g: &GameClass, t_tilde: usize) -> Arc<EmpiricalPolicy> {
        let pop = Population::singleton(
            "constant-0",
            StrategyFactory::new("constant-0", || Box::new(ConstantAgent::new(2, 0))),
        );
        let ds = generate_dataset(&pop, &TypeDistribution::uniform(2), 50, g, 0).unwrap();
        Arc::new(fit_imitation(&ds, t_tilde, Seat::One).unwrap())
    }

    #[test]
    fn deterministic_chain_commits_to_zero() {
        let g = coord(8);
        let config = IcConfig {
            imitation_horizon: 3,
            total_horizon: 8,
            seat: Seat::One,
        };
        let mut ic = IcStrategy::new(always_zero_policy(&g, 3), config).unwrap();
        let rec = play_episode(&mut ic, &mut ConstantAgent::new(2, 0), JointType::new(0, 0), &g, 4).unwrap();
        assert_eq!(rec.history, History::from_pairs(&[(0, 0); 8]));
        assert_eq!(ic.committed(), Some(&MixedStrategy::pure(2, 0)));
        ic.reset(1);
        assert_eq!(ic.committed(), None);
    }

    /// Plays action 0 for a fixed number of stages, then delegates.
    #[derive(Clone)]
    struct ZeroThen<S> {
        stages: usize,
        inner: S,
    }

    impl<S: MetaStrategy + Clone + 'static> MetaStrategy for ZeroThen<S> {
        fn name(&self) -> &str {
            "zero-then"
        }
        fn reset(&mut self, seed: u64) {
            self.inner.reset(seed);
        }
        fn act(&mut self, theta: TypeId, seat: Seat, h: &History) -> Result<MixedStrategy> {
            let d = self.inner.act(theta, seat, h)?;
            Ok(if h.len() < self.stages { MixedStrategy::pure(d.n(), 0) } else { d })
        }
        fn box_clone(&self) -> Box<dyn MetaStrategy> {
            Box::new(self.clone())
        }
    }

    #[test]
    fn hedge_partner_converges_in_tail() {
        let t_tilde = 5;
        let g = coord(t_tilde + 1000);
        let config = IcConfig {
            imitation_horizon: t_tilde,
            total_horizon: g.horizon(),
            seat: Seat::One,
        };
        let policy = always_zero_policy(&coord(20), t_tilde);
        let lr = crate::agents::default_learning_rate(2, g.horizon());
        for seed in 0..5 {
            let mut ic = IcStrategy::new(policy.clone(), config).unwrap();
            let mut partner = ZeroThen {
                stages: t_tilde,
                inner: hedge_agent(lr, Arc::new(g.clone())).unwrap(),
            };
            let rec = play_episode(&mut ic, &mut partner, JointType::new(0, 0), &g, seed).unwrap();
            assert_eq!(ic.committed(), Some(&MixedStrategy::pure(2, 0)));
            let tail: Vec<f64> = rec.history.steps()[t_tilde..]
                .iter()
                .map(|s| g.stage_payoff(0, Seat::Two, *s))
                .collect();
            assert!(mean(&tail) >= 0.95, "seed {seed}: {}", mean(&tail));
        }
    }

    #[test]
    fn tail_is_iid_from_the_commitment() {
        let t_tilde = 2;
        let g = coord(4002);
        let mut ic = IcStrategy::new(
            always_zero_policy(&coord(10), t_tilde),
            IcConfig {
                imitation_horizon: t_tilde,
                total_horizon: g.horizon(),
                seat: Seat::One,
            },
        )
        .unwrap();
        let rec = play_episode(&mut ic, &mut ConstantAgent::new(2, 1), JointType::new(0, 1), &g, 9).unwrap();
        let x = ic.committed().unwrap().clone();
        let tail = &rec.history.steps()[t_tilde..];
        let n = tail.len() as f64;
        let freq0 = tail.iter().filter(|s| s.0 == 0).count() as f64 / n;
        let p = x.prob(0);
        let band = 2.576 * (p * (1.0 - p) / n).sqrt() + 1e-12;
        assert!((freq0 - p).abs() <= band);
    }

    #[test]
    fn prefix_matches_policy_exactly() {
        let g = coord(10);
        let policy = always_zero_policy(&g, 4);
        let mut ic = IcStrategy::new(
            policy.clone(),
            IcConfig {
                imitation_horizon: 4,
                total_horizon: 10,
                seat: Seat::One,
            },
        )
        .unwrap();
        let mut h = History::new();
        for step in [(0, 0), (1, 0), (0, 1)] {
            assert_eq!(ic.act(1, Seat::One, &h).unwrap(), policy.get(1, h.steps()));
            h.push(JointAction(step.0, step.1));
        }
    }

    #[test]
    fn history_past_horizon_is_a_protocol_error() {
        let g = coord(4);
        let mut ic = IcStrategy::new(
            always_zero_policy(&g, 2),
            IcConfig {
                imitation_horizon: 2,
                total_horizon: 4,
                seat: Seat::One,
            },
        )
        .unwrap();
        let h = History::from_pairs(&[(0, 0); 4]);
        assert!(matches!(ic.act(0, Seat::One, &h), Err(Error::ProtocolViolation { stage: 5, .. })));
        assert!(ic.act(0, Seat::Two, &History::new()).is_err());
    }

    #[test]
    fn config_validation() {
        let g = coord(4);
        let bad = IcConfig {
            imitation_horizon: 3,
            total_horizon: 4,
            seat: Seat::One,
        };
        assert!(IcStrategy::new(always_zero_policy(&g, 2), bad).is_err());
        let bad = IcConfig {
            imitation_horizon: 4,
            total_horizon: 4,
            seat: Seat::One,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn regret_bound_examples() {
        let b = ic_regret_bound(0.05, 0.01, 100_000, 2, 2, 100, 2).unwrap();
        let tv = 512.0 * (1e5f64).ln() / 1e5;
        assert!((b - (0.1 + tv + 2.96 * 0.01)).abs() < 1e-12);
        assert!((b - 0.1886).abs() < 1e-4);
        let huge = ic_regret_bound(0.0, 0.0, usize::MAX / 2, 2, 2, 100, 2).unwrap();
        assert!((huge - imitation_tv_bound(2, 2, 2, usize::MAX / 2).unwrap()).abs() < 1e-15);
        // ε coefficient at T̃ = T − 1.
        let t = 10_000;
        let a = ic_regret_bound(0.0, 1.0, 10, 2, t - 1, t, 2).unwrap();
        let base = ic_regret_bound(0.0, 0.0, 10, 2, t - 1, t, 2).unwrap();
        assert!(((a - base) - (1.0 + 2.0 / t as f64)).abs() < 1e-12);
        assert!(ic_regret_bound(1.5, 0.0, 10, 2, 2, 10, 2).is_err());
        assert!(ic_regret_bound(0.1, -0.1, 10, 2, 2, 10, 2).is_err());
        assert!(ic_regret_bound(0.1, 0.1, 1, 2, 2, 10, 2).is_err());
        assert!(ic_regret_bound(0.1, 0.1, 10, 2, 10, 10, 2).is_err());
    }

    #[test]
    fn regret_bound_monotone_on_grid() {
        let ks = [2usize, 10, 100, 1000, 10_000, 100_000, 1_000_000];
        let vals = [0.0, 0.01, 0.05, 0.1, 0.5, 1.0];
        for &d in &vals {
            for &e in &vals {
                let by_k: Vec<f64> = ks.iter().map(|&k| ic_regret_bound(d, e, k, 2, 3, 50, 2).unwrap()).collect();
                assert!(by_k.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{by_k:?}");
            }
        }
        for &k in &ks {
            let by_e: Vec<f64> = vals.iter().map(|&e| ic_regret_bound(0.1, e, k, 2, 3, 50, 2).unwrap()).collect();
            let by_d: Vec<f64> = vals.iter().map(|&d| ic_regret_bound(d, 0.1, k, 2, 3, 50, 2).unwrap()).collect();
            assert!(by_e.windows(2).all(|w| w[1] >= w[0]));
            assert!(by_d.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    fn guarantee_slack(z: &JointDistribution, seat: Seat, partner: &PayoffMatrix) -> f64 {
        let ze = JointEmpirical {
            distribution: z.clone(),
            prefix_len: 1,
        };
        commit_mixture(&ze, seat).partner_best_response_value(partner) - partner_value_under(z, seat, partner)
    }

    #[test]
    fn mixture_guarantee_point_masses() {
        for n in 2..=3 {
            for a1 in 0..n {
                for a2 in 0..n {
                    let z = JointDistribution::point(n, a1, a2);
                    for corner in 0..n * n {
                        let mut rows = vec![vec![0.0; n]; n];
                        rows[corner / n][corner % n] = 1.0;
                        let m = PayoffMatrix::new(rows).unwrap();
                        for seat in Seat::BOTH {
                            assert!(guarantee_slack(&z, seat, &m) >= -1e-12);
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn mixture_guarantee_random(
            n in 2usize..4,
            raw_z in proptest::collection::vec(0.0f64..1.0, 9),
            raw_b in proptest::collection::vec(0.0f64..=1.0, 9),
            seat2 in any::<bool>(),
        ) {
            let w: Vec<f64> = raw_z[..n * n].to_vec();
            let total: f64 = w.iter().sum();
            prop_assume!(total > 1e-6);
            let z = JointDistribution::from_flat(n, w.iter().map(|x| x / total).collect()).unwrap();
            let rows: Vec<Vec<f64>> = (0..n).map(|i| raw_b[i * n..(i + 1) * n].to_vec()).collect();
            let m = PayoffMatrix::new(rows).unwrap();
            let seat = if seat2 { Seat::Two } else { Seat::One };
            prop_assert!(guarantee_slack(&z, seat, &m) >= -1e-12);
        }
    }
}
