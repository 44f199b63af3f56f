//! Experiment configuration: one JSON document per experiment.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{
    cce_tracking_agent, default_learning_rate, grim_trigger_agent, handshake_si_agent, hedge_agent,
    ConstantAgent, EmpiricalBestResponse, FlipAdversary, HandshakeCodebook, Population, RegretMatchingAgent,
    TypeDistribution, UniformAgent,
};
use crate::equilibrium::{enumerate_nash, JointDistribution};
use crate::error::{Error, Result};
use crate::game::{
    make_coordpref_game, make_matching_pennies_game, GameClass, JointType, PayoffMatrix, Seat, StrategyFactory,
};
use crate::metrics::SiRequest;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSpec {
    Coordpref {
        n_actions: usize,
        off_peak: f64,
        horizon: usize,
    },
    MatchingPennies {
        horizon: usize,
    },
    /// Explicit own-row matrices, one per type.
    Matrices {
        matrices: Vec<Vec<Vec<f64>>>,
        horizon: usize,
    },
}

impl GameSpec {
    pub fn horizon(&self) -> usize {
        match self {
            GameSpec::Coordpref { horizon, .. }
            | GameSpec::MatchingPennies { horizon }
            | GameSpec::Matrices { horizon, .. } => *horizon,
        }
    }

    pub fn build(&self) -> Result<GameClass> {
        match self {
            GameSpec::Coordpref {
                n_actions,
                off_peak,
                horizon,
            } => make_coordpref_game(*n_actions, *off_peak, *horizon),
            GameSpec::MatchingPennies { horizon } => make_matching_pennies_game(*horizon),
            GameSpec::Matrices { matrices, horizon } => {
                let n = matrices.first().map_or(0, |m| m.len());
                let ms = matrices
                    .iter()
                    .map(|m| PayoffMatrix::new(m.clone()))
                    .collect::<Result<Vec<_>>>()?;
                GameClass::new(n, ms, *horizon)
            }
        }
    }
}

/// A joint distribution target for CCE trackers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CceTarget {
    /// Explicit row-major joint distribution.
    Joint(Vec<Vec<f64>>),
    /// Product of the fully mixed Nash equilibrium of a joint type.
    MixedNash([usize; 2]),
}

impl CceTarget {
    pub fn resolve(&self, game: &GameClass) -> Result<(JointDistribution, Vec<JointType>)> {
        match self {
            CceTarget::Joint(rows) => {
                let z = JointDistribution::new(rows.clone())?;
                Ok((z, game.joint_types().collect()))
            }
            CceTarget::MixedNash([t1, t2]) => {
                let jt = JointType::new(*t1, *t2);
                let ne = enumerate_nash(jt, game, 1e-9)?;
                let mixed = ne
                    .iter()
                    .find(|e| e.strategy1.as_pure().is_none() && e.strategy2.as_pure().is_none())
                    .ok_or_else(|| Error::Config(format!("joint type {jt} has no fully mixed equilibrium")))?;
                Ok((JointDistribution::product(&mixed.strategy1, &mixed.strategy2)?, vec![jt]))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MemberSpec {
    Constant {
        action: usize,
        #[serde(default = "one")]
        weight: f64,
    },
    Uniform {
        #[serde(default = "one")]
        weight: f64,
    },
    Hedge {
        /// Defaults to `√(8 ln N / T)`.
        learning_rate: Option<f64>,
        #[serde(default = "one")]
        weight: f64,
    },
    RegretMatching {
        #[serde(default = "one")]
        weight: f64,
    },
    HandshakeSi {
        /// Hedge fallback rate; defaults to `√(8 ln N / T)`.
        learning_rate: Option<f64>,
        #[serde(default = "one")]
        weight: f64,
    },
    GrimTrigger {
        #[serde(default = "one")]
        weight: f64,
    },
    CceTracking {
        target: CceTarget,
        #[serde(default = "default_slack")]
        watchdog_slack: f64,
        #[serde(default)]
        shared_seed: u64,
        #[serde(default = "one")]
        weight: f64,
    },
    BestResponseEmpirical {
        #[serde(default = "one")]
        weight: f64,
    },
    AdversarialFlip {
        #[serde(default = "one")]
        weight: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_slack() -> f64 {
    0.1
}

impl MemberSpec {
    pub fn weight(&self) -> f64 {
        match self {
            MemberSpec::Constant { weight, .. }
            | MemberSpec::Uniform { weight }
            | MemberSpec::Hedge { weight, .. }
            | MemberSpec::RegretMatching { weight }
            | MemberSpec::HandshakeSi { weight, .. }
            | MemberSpec::GrimTrigger { weight }
            | MemberSpec::CceTracking { weight, .. }
            | MemberSpec::BestResponseEmpirical { weight }
            | MemberSpec::AdversarialFlip { weight } => *weight,
        }
    }

    pub fn factory(&self, game: &Arc<GameClass>) -> Result<StrategyFactory> {
        let n = game.n_actions();
        let default_lr = default_learning_rate(n, game.horizon());
        Ok(match self {
            MemberSpec::Constant { action, .. } => {
                let a = *action;
                if a >= n {
                    return Err(Error::Config(format!("constant action {a} out of range for N = {n}")));
                }
                StrategyFactory::new(format!("constant-{a}"), move || Box::new(ConstantAgent::new(n, a)))
            }
            MemberSpec::Uniform { .. } => StrategyFactory::new("uniform", move || Box::new(UniformAgent::new(n))),
            MemberSpec::Hedge { learning_rate, .. } => {
                let proto = hedge_agent(learning_rate.unwrap_or(default_lr), game.clone())?;
                StrategyFactory::new("hedge", move || Box::new(proto.clone()))
            }
            MemberSpec::RegretMatching { .. } => {
                let g = game.clone();
                StrategyFactory::new("regret-matching", move || Box::new(RegretMatchingAgent::new(g.clone())))
            }
            MemberSpec::HandshakeSi { learning_rate, .. } => handshake_si_agent(
                HandshakeCodebook::for_game(game)?,
                game.clone(),
                learning_rate.unwrap_or(default_lr),
            )?,
            MemberSpec::GrimTrigger { .. } => grim_trigger_agent(HandshakeCodebook::for_game(game)?, game.clone())?,
            MemberSpec::CceTracking {
                target,
                watchdog_slack,
                shared_seed,
                ..
            } => {
                let (z, supported) = target.resolve(game)?;
                cce_tracking_agent(z, game.clone(), *watchdog_slack, *shared_seed, &supported)?
            }
            MemberSpec::BestResponseEmpirical { .. } => {
                let g = game.clone();
                StrategyFactory::new("best-response-empirical", move || {
                    Box::new(EmpiricalBestResponse::new(g.clone()))
                })
            }
            MemberSpec::AdversarialFlip { .. } => {
                StrategyFactory::new("adversarial-flip", move || Box::new(FlipAdversary::new(n)))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub name: String,
    pub members: Vec<MemberSpec>,
}

impl PopulationSpec {
    pub fn build(&self, game: &Arc<GameClass>) -> Result<Population> {
        let members = self
            .members
            .iter()
            .map(|m| Ok((m.factory(game)?, m.weight())))
            .collect::<Result<Vec<_>>>()?;
        Population::new(self.name.clone(), members)
    }

    /// The member strategies alone, ignoring weights.
    pub fn factories(&self, game: &Arc<GameClass>) -> Result<Vec<StrategyFactory>> {
        self.members.iter().map(|m| m.factory(game)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TypesSpec {
    Uniform,
    Point([usize; 2]),
    /// Row-major `|Θ|×|Θ|` weights.
    Weights(Vec<Vec<f64>>),
}

impl TypesSpec {
    pub fn build(&self, n_types: usize) -> Result<TypeDistribution> {
        match self {
            TypesSpec::Uniform => Ok(TypeDistribution::uniform(n_types)),
            TypesSpec::Point([a, b]) => {
                if *a >= n_types || *b >= n_types {
                    return Err(Error::Config(format!("point type ({a}, {b}) out of range")));
                }
                Ok(TypeDistribution::point(n_types, JointType::new(*a, *b)))
            }
            TypesSpec::Weights(rows) => {
                if rows.len() != n_types {
                    return Err(Error::Config("type weights must be |Θ|×|Θ|".into()));
                }
                TypeDistribution::new(n_types, rows.concat())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Requested {
    pub delta: f64,
    pub epsilon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    /// Feed the requested `(δ, ε)` into the regret bound.
    Requested,
    /// Certify the population first and feed the measured values.
    Certified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificationSpec {
    pub trials: usize,
    pub consistency_horizon: usize,
    pub compatibility_horizon: usize,
    /// Adversary names; defaults to every constant action, uniform, adversarial
    /// flip and empirical best response.
    #[serde(default)]
    pub adversaries: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TvMethod {
    Auto,
    Exact,
    Mc,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvSpec {
    pub method: TvMethod,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
}

fn default_mc_samples() -> usize {
    10_000
}

impl Default for TvSpec {
    fn default() -> Self {
        Self {
            method: TvMethod::Auto,
            mc_samples: default_mc_samples(),
        }
    }
}

/// Imitation of a compatible but inconsistent population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrimAblationSpec {
    pub k: usize,
    pub imitation_horizon: usize,
    pub episodes: usize,
    /// Population whose self-play sets the reference partner payoff.
    pub reference: PopulationSpec,
}

/// Self-play of consistent but incompatible CCE trackers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CceAblationSpec {
    pub target: CceTarget,
    pub convergence_horizon: usize,
    pub convergence_seeds: usize,
    /// Common CCE of every joint type, used for the type-signal check.
    pub signal_target: Vec<Vec<f64>>,
    pub signal_history_length: usize,
    pub signal_rollouts: usize,
    #[serde(default = "default_slack")]
    pub watchdog_slack: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSpec {
    pub grim: Option<GrimAblationSpec>,
    pub cce: Option<CceAblationSpec>,
}

fn default_ai_seat() -> Seat {
    Seat::Two
}

fn default_bound_source() -> BoundSource {
    BoundSource::Requested
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub game: GameSpec,
    pub population: PopulationSpec,
    pub types: TypesSpec,
    pub k_list: Vec<usize>,
    pub imitation_horizons: Vec<usize>,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub requested: Requested,
    #[serde(default = "default_ai_seat")]
    pub ai_seat: Seat,
    #[serde(default = "default_bound_source")]
    pub bound_source: BoundSource,
    #[serde(default)]
    pub tv: TvSpec,
    #[serde(default)]
    pub certification: Option<CertificationSpec>,
    #[serde(default)]
    pub ablation: AblationSpec,
    /// Dataset size for the `dataset` command; defaults to the largest K.
    #[serde(default)]
    pub dataset_k: Option<usize>,
    /// Adds elapsed seconds to result rows, which makes them run-dependent.
    #[serde(default)]
    pub record_wall_clock: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.into()));
        if self.k_list.is_empty() || self.imitation_horizons.is_empty() || self.seeds.is_empty() {
            return err("k_list, imitation_horizons and seeds must be non-empty");
        }
        if self.k_list.iter().any(|&k| k < 2) {
            return err("every K must be at least 2");
        }
        if self.eval_episodes == 0 {
            return err("eval_episodes must be positive");
        }
        let t = self.game.horizon();
        if self.imitation_horizons.iter().any(|&h| h == 0 || h >= t) {
            return err("imitation horizons must lie in [1, T)");
        }
        if self.population.members.is_empty() {
            return err("population has no members");
        }
        Ok(())
    }

    pub fn max_k(&self) -> usize {
        self.k_list.iter().copied().max().unwrap_or(0)
    }

    pub fn si_request(&self, spec: &CertificationSpec) -> SiRequest {
        SiRequest {
            delta: self.requested.delta,
            epsilon: self.requested.epsilon,
            consistency_horizon: spec.consistency_horizon,
            compatibility_horizon: spec.compatibility_horizon,
        }
    }
}

/// A parsed configuration with the hash of its canonical JSON form.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub hash: String,
}

/// SHA-256 (hex) of a JSON value serialized with sorted keys and no whitespace.
pub fn canonical_hash(value: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(value).expect("JSON values serialize");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("not valid JSON: {e}")))?;
    let config: ExperimentConfig =
        serde_json::from_value(value.clone()).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(LoadedConfig {
        hash: canonical_hash(&value),
        config,
    })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Resolves adversary names against a game.
pub fn adversary_suite(names: Option<&[String]>, game: &Arc<GameClass>) -> Result<Vec<StrategyFactory>> {
    let n = game.n_actions();
    let default: Vec<String> = (0..n)
        .map(|a| format!("constant-{a}"))
        .chain(["uniform", "adversarial-flip", "best-response-empirical"].map(String::from))
        .collect();
    let names = names.map(|n| n.to_vec()).unwrap_or(default);
    if names.is_empty() {
        return Err(Error::Config("adversary suite is empty".into()));
    }
    names
        .iter()
        .map(|name| {
            let spec = match name.as_str() {
                "uniform" => MemberSpec::Uniform { weight: 1.0 },
                "adversarial-flip" => MemberSpec::AdversarialFlip { weight: 1.0 },
                "best-response-empirical" => MemberSpec::BestResponseEmpirical { weight: 1.0 },
                other => match other.strip_prefix("constant-").and_then(|a| a.parse().ok()) {
                    Some(action) => MemberSpec::Constant { action, weight: 1.0 },
                    None => return Err(Error::Config(format!("unknown adversary `{name}`"))),
                },
            };
            spec.factory(game)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "name": "t",
        "game": {"family": "coordpref", "n_actions": 2, "off_peak": 0.6, "horizon": 20},
        "population": {"name": "hs", "members": [{"kind": "handshake_si", "learning_rate": 0.1}]},
        "types": "uniform",
        "k_list": [10],
        "imitation_horizons": [3],
        "eval_episodes": 5,
        "seeds": [0],
        "master_seed": 1,
        "requested": {"delta": 0.05, "epsilon": 0.1}
    }"#;

    #[test]
    fn parses_and_defaults() {
        let c = parse_config(BASE).unwrap();
        assert_eq!(c.config.ai_seat, Seat::Two);
        assert_eq!(c.config.tv, TvSpec::default());
        assert_eq!(c.hash.len(), 64);
        let game = Arc::new(c.config.game.build().unwrap());
        let pop = c.config.population.build(&game).unwrap();
        assert_eq!(pop.members()[0].0.name(), "handshake-si");
    }

    #[test]
    fn hash_ignores_formatting_and_key_order() {
        let a = parse_config(BASE).unwrap().hash;
        let v: serde_json::Value = serde_json::from_str(BASE).unwrap();
        let compact = serde_json::to_string(&v).unwrap();
        assert_eq!(parse_config(&compact).unwrap().hash, a);
        let changed = BASE.replace("\"master_seed\": 1", "\"master_seed\": 2");
        assert_ne!(parse_config(&changed).unwrap().hash, a);
    }

    #[test]
    fn unknown_member_is_named() {
        let bad = BASE.replace("handshake_si", "telepath");
        let err = parse_config(&bad).unwrap_err().to_string();
        assert!(err.contains("telepath"), "{err}");
    }

    #[test]
    fn rejects_bad_sweeps() {
        assert!(parse_config(&BASE.replace("[10]", "[]")).is_err());
        assert!(parse_config(&BASE.replace("\"imitation_horizons\": [3]", "\"imitation_horizons\": [20]")).is_err());
    }

    #[test]
    fn mixed_nash_target_is_the_product() {
        let game = make_coordpref_game(2, 0.6, 10).unwrap();
        let (z, supported) = CceTarget::MixedNash([0, 1]).resolve(&game).unwrap();
        assert_eq!(supported, vec![JointType::new(0, 1)]);
        assert!((z.get(0, 0) - 0.625 * 0.375).abs() < 1e-9);
        assert!((z.get(1, 1) - 0.375 * 0.625).abs() < 1e-9);
    }

    #[test]
    fn adversary_names() {
        let game = Arc::new(make_coordpref_game(2, 0.6, 10).unwrap());
        let suite = adversary_suite(None, &game).unwrap();
        let names: Vec<&str> = suite.iter().map(|f| f.name()).collect();
        assert_eq!(
            names,
            ["constant-0", "constant-1", "uniform", "adversarial-flip", "best-response-empirical"]
        );
        assert!(adversary_suite(Some(&["oracle".into()]), &game).is_err());
        assert!(adversary_suite(Some(&[]), &game).is_err());
    }
}
