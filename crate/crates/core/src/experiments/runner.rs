//! The experiment commands. Each returns plain data; callers decide where it goes.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{adversary_suite, BoundSource, CceTarget, ExperimentConfig, LoadedConfig, TvMethod};
use super::output::{Axis, PlotManifest, Series};
use crate::agents::{cce_tracker, cce_tracking_agent, sample_pairing, Population, TypeDistribution};
use crate::equilibrium::{pareto_optimal_nash, support_enumeration, Bimatrix, worst_pone_for, EquilibriumProfile};
use crate::error::{Error, Result};
use crate::game::{play_episode, GameClass, JointType, Seat, StrategyFactory};
use crate::ic::{empirical_joint_strategy, ic_meta_strategy, ic_regret_bound, IcConfig};
use crate::imitation::{
    fit_imitation, generate_dataset, imitation_tv_bound, rollout_distribution_exact, sample_history_distribution,
    tv_distance, tv_distance_mc, Dataset, EmpiricalPolicy, RolloutSource, MAX_EXACT_HISTORIES,
};
use crate::metrics::{certify_si_class, external_regret, AltruisticBaseline, SiClassReport};
use crate::rng::derive_seed;
use crate::stats::{bootstrap_mean_ci, mean, quantile};

// Children of the master seed.
const ROOT_DATASET: u64 = 0;
const ROOT_EVAL: u64 = 1;
const ROOT_TV: u64 = 2;
const ROOT_CERTIFY: u64 = 3;
const ROOT_ABLATION: u64 = 4;

const BOOTSTRAP_RESAMPLES: usize = 2000;

/// A loaded configuration plus the effective master seed.
#[derive(Clone, Debug)]
pub struct Context {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub master_seed: u64,
}

impl Context {
    pub fn new(loaded: LoadedConfig, seed_override: Option<u64>) -> Self {
        let master_seed = seed_override.unwrap_or(loaded.config.master_seed);
        Self {
            config: loaded.config,
            config_hash: loaded.hash,
            master_seed,
        }
    }

    pub fn game(&self) -> Result<Arc<GameClass>> {
        Ok(Arc::new(self.config.game.build()?))
    }

    pub fn population(&self, game: &Arc<GameClass>) -> Result<Population> {
        self.config.population.build(game)
    }

    pub fn types(&self, game: &GameClass) -> Result<TypeDistribution> {
        self.config.types.build(game.n_types())
    }

    fn child(&self, root: u64) -> u64 {
        derive_seed(self.master_seed, root)
    }

    /// Generation seed of the dataset used for replicate `seed`.
    pub fn dataset_seed(&self, seed: u64) -> u64 {
        derive_seed(self.child(ROOT_DATASET), seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub strategy1: Vec<f64>,
    pub strategy2: Vec<f64>,
    pub payoff1: f64,
    pub payoff2: f64,
}

impl From<&EquilibriumProfile> for ProfileReport {
    fn from(e: &EquilibriumProfile) -> Self {
        Self {
            strategy1: e.strategy1.probs().to_vec(),
            strategy2: e.strategy2.probs().to_vec(),
            payoff1: e.payoff1,
            payoff2: e.payoff2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointTypeEquilibria {
    pub theta1: usize,
    pub theta2: usize,
    pub nash: Vec<ProfileReport>,
    pub pone: Vec<ProfileReport>,
    pub worst_pone_for_seat1: Option<ProfileReport>,
    pub worst_pone_for_seat2: Option<ProfileReport>,
    pub degenerate_supports: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriaReport {
    pub config_hash: String,
    pub master_seed: u64,
    pub joint_types: Vec<JointTypeEquilibria>,
}

/// Nash, PONE and worst-PONE sets of the requested joint types (all when empty).
pub fn equilibria(ctx: &Context, joint_types: &[JointType]) -> Result<EquilibriaReport> {
    let game = ctx.game()?;
    let jts: Vec<JointType> = if joint_types.is_empty() {
        game.joint_types().collect()
    } else {
        joint_types.to_vec()
    };
    let joint_types = jts
        .into_iter()
        .map(|jt| {
            let ne = support_enumeration(&Bimatrix::from_game(&game, jt)?, 1e-9)?;
            let pone = pareto_optimal_nash(&ne.profiles);
            Ok(JointTypeEquilibria {
                theta1: jt.theta1,
                theta2: jt.theta2,
                nash: ne.profiles.iter().map(Into::into).collect(),
                pone: pone.iter().map(Into::into).collect(),
                worst_pone_for_seat1: worst_pone_for(Seat::One, &pone).map(Into::into),
                worst_pone_for_seat2: worst_pone_for(Seat::Two, &pone).map(Into::into),
                degenerate_supports: ne.degenerate_supports,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquilibriaReport {
        config_hash: ctx.config_hash.clone(),
        master_seed: ctx.master_seed,
        joint_types,
    })
}

/// Human-readable rendering of [`equilibria`].
pub fn equilibria_text(report: &EquilibriaReport) -> String {
    let fmt = |p: &ProfileReport| {
        let v = |xs: &[f64]| xs.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ");
        format!("([{}], [{}]) payoffs ({:.6}, {:.6})", v(&p.strategy1), v(&p.strategy2), p.payoff1, p.payoff2)
    };
    let mut out = String::new();
    for jt in &report.joint_types {
        out.push_str(&format!("joint type ({}, {})\n", jt.theta1, jt.theta2));
        out.push_str(&format!("  Nash equilibria: {}\n", jt.nash.len()));
        for p in &jt.nash {
            out.push_str(&format!("    {}\n", fmt(p)));
        }
        out.push_str(&format!("  Pareto-optimal: {}\n", jt.pone.len()));
        for p in &jt.pone {
            out.push_str(&format!("    {}\n", fmt(p)));
        }
        for (seat, w) in [(1, &jt.worst_pone_for_seat1), (2, &jt.worst_pone_for_seat2)] {
            if let Some(p) = w {
                out.push_str(&format!("  worst for seat {seat}: {}\n", fmt(p)));
            }
        }
    }
    out
}

/// The dataset of replicate `seeds[0]`, of size `dataset_k` (default: largest K).
pub fn dataset(ctx: &Context) -> Result<Dataset> {
    let game = ctx.game()?;
    let k = ctx.config.dataset_k.unwrap_or_else(|| ctx.config.max_k());
    generate_dataset(
        &ctx.population(&game)?,
        &ctx.types(&game)?,
        k,
        &game,
        ctx.dataset_seed(ctx.config.seeds[0]),
    )
}

/// One evaluation cell of the imitate-then-commit pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub k: usize,
    pub imitation_horizon: usize,
    pub seed: u64,
    pub ai_seat: Seat,
    pub episodes: usize,
    pub alt_regret_mean: f64,
    pub alt_regret_pos_mean: f64,
    pub alt_regret_q50: f64,
    pub alt_regret_q90: f64,
    pub alt_regret_ci_low: f64,
    pub alt_regret_ci_high: f64,
    pub ext_regret_mean: f64,
    pub partner_payoff_mean: f64,
    pub tv: Option<f64>,
    pub tv_method: String,
    pub tv_bound: f64,
    pub tv_bound_capped: f64,
    pub regret_bound: f64,
    pub bound_delta: f64,
    pub bound_epsilon: f64,
    pub bound_source: String,
    pub wall_clock_s: Option<f64>,
}

/// Golden header of the results table.
pub const RESULT_COLUMNS: [&str; 25] = [
    "experiment",
    "config_hash",
    "master_seed",
    "k",
    "imitation_horizon",
    "seed",
    "ai_seat",
    "episodes",
    "alt_regret_mean",
    "alt_regret_pos_mean",
    "alt_regret_q50",
    "alt_regret_q90",
    "alt_regret_ci_low",
    "alt_regret_ci_high",
    "ext_regret_mean",
    "partner_payoff_mean",
    "tv",
    "tv_method",
    "tv_bound",
    "tv_bound_capped",
    "regret_bound",
    "bound_delta",
    "bound_epsilon",
    "bound_source",
    "wall_clock_s",
];

/// Per-episode outcomes of an agent seated against population partners.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalOutcome {
    /// Per-step altruistic regret in the partner's payoffs.
    pub alt_regret: Vec<f64>,
    /// Per-step external regret of the evaluated agent.
    pub ext_regret: Vec<f64>,
    pub partner_payoff: Vec<f64>,
}

/// Plays `episodes` episodes of `agent` in `seat` against partners and joint types
/// drawn from `(population, types)`; episode `e` uses `derive_seed(seed, e)`.
pub fn evaluate_against_population(
    agent: &StrategyFactory,
    seat: Seat,
    population: &Population,
    types: &TypeDistribution,
    game: &GameClass,
    baseline: &AltruisticBaseline,
    episodes: usize,
    seed: u64,
) -> Result<EvalOutcome> {
    let partner_seat = seat.other();
    let per_episode = (0..episodes)
        .into_par_iter()
        .map(|e| {
            let s = derive_seed(seed, e as u64);
            let mut pairing = sample_pairing(population, types, s);
            let mut ai = agent.build();
            let jt = pairing.joint_type;
            let rec = match seat {
                Seat::One => play_episode(&mut *ai, &mut *pairing.strategy2, jt, game, s)?,
                Seat::Two => play_episode(&mut *pairing.strategy1, &mut *ai, jt, game, s)?,
            };
            let alt = baseline.regret(&rec.history, jt, partner_seat, game)?.per_step;
            let ext = external_regret(&rec.history, jt.of(seat), seat, game)?.per_step;
            let pay = rec.history.total_payoff(game, jt.of(partner_seat), partner_seat) / game.horizon() as f64;
            Ok((alt, ext, pay))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = EvalOutcome::default();
    for (a, e, p) in per_episode {
        out.alt_regret.push(a);
        out.ext_regret.push(e);
        out.partner_payoff.push(p);
    }
    Ok(out)
}

/// Self-play of population pairs, reported from `partner_seat`'s point of view.
pub fn population_partner_payoff(
    population: &Population,
    types: &TypeDistribution,
    game: &GameClass,
    partner_seat: Seat,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    let pays = (0..episodes)
        .into_par_iter()
        .map(|e| {
            let s = derive_seed(seed, e as u64);
            let mut p = sample_pairing(population, types, s);
            let rec = play_episode(&mut *p.strategy1, &mut *p.strategy2, p.joint_type, game, s)?;
            Ok(rec
                .history
                .total_payoff(game, p.joint_type.of(partner_seat), partner_seat)
                / game.horizon() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean(&pays))
}

fn tv_for_cell(
    ctx: &Context,
    policy: &EmpiricalPolicy,
    population: &Population,
    types: &TypeDistribution,
    game: &GameClass,
    imitation_horizon: usize,
    seed: u64,
) -> Result<(Option<f64>, String)> {
    let spec = ctx.config.tv;
    let leaves = (game.n_actions() as f64).powi(2 * imitation_horizon as i32);
    let deterministic = population.members().iter().all(|(f, _)| f.build().history_deterministic());
    let method = match spec.method {
        TvMethod::Auto if leaves <= MAX_EXACT_HISTORIES && deterministic => TvMethod::Exact,
        TvMethod::Auto => TvMethod::Mc,
        m => m,
    };
    match method {
        TvMethod::Exact => {
            let p = rollout_distribution_exact(RolloutSource::SelfPlay, population, types, game, imitation_horizon)?;
            let q = rollout_distribution_exact(
                RolloutSource::Imitation(policy),
                population,
                types,
                game,
                imitation_horizon,
            )?;
            Ok((Some(tv_distance(&p, &q)?), "exact".into()))
        }
        TvMethod::Mc => {
            let r = tv_distance_mc(policy, population, types, game, imitation_horizon, spec.mc_samples, seed)?;
            Ok((Some(r.estimate), "mc-biased-upward".into()))
        }
        _ => Ok((None, "none".into())),
    }
}

/// Bound parameters and, when certified, the certification that produced them.
pub fn bound_parameters(ctx: &Context) -> Result<(f64, f64, Option<SiClassReport>)> {
    match ctx.config.bound_source {
        BoundSource::Requested => Ok((ctx.config.requested.delta, ctx.config.requested.epsilon, None)),
        BoundSource::Certified => {
            let report = certify(ctx)?;
            let delta = report.summary.delta_upper.clamp(0.0, 1.0);
            Ok((delta, ctx.config.requested.epsilon, Some(report)))
        }
    }
}

/// Fits, evaluates and bounds every `(seed, T̃, K)` cell. With `dataset`, every
/// replicate subsamples that file instead of generating its own.
pub fn run_ic(ctx: &Context, dataset: Option<&Dataset>) -> Result<Vec<ResultRow>> {
    let (delta, epsilon, _) = bound_parameters(ctx)?;
    run_ic_with_bound(ctx, dataset, delta, epsilon)
}

pub fn run_ic_with_bound(
    ctx: &Context,
    dataset: Option<&Dataset>,
    delta: f64,
    epsilon: f64,
) -> Result<Vec<ResultRow>> {
    let cfg = &ctx.config;
    let game = ctx.game()?;
    let population = ctx.population(&game)?;
    let types = ctx.types(&game)?;
    let baseline = AltruisticBaseline::new(&game)?;
    if let Some(ds) = dataset {
        ds.check_game(&game)?;
        if ds.len() < cfg.max_k() {
            return Err(Error::Dataset(format!(
                "dataset has {} episodes but K up to {} was requested",
                ds.len(),
                cfg.max_k()
            )));
        }
    }
    let n = game.n_actions();
    let bound_source = match cfg.bound_source {
        BoundSource::Requested => "requested",
        BoundSource::Certified => "certified",
    };
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let generated;
        let full = match dataset {
            Some(ds) => ds,
            None => {
                generated = generate_dataset(&population, &types, cfg.max_k(), &game, ctx.dataset_seed(seed))?;
                &generated
            }
        };
        for &t_tilde in &cfg.imitation_horizons {
            let eval_seed = derive_seed(derive_seed(ctx.child(ROOT_EVAL), seed), t_tilde as u64);
            for &k in &cfg.k_list {
                let started = Instant::now();
                let ds = full.first(k)?;
                let policy = Arc::new(fit_imitation(&ds, t_tilde, cfg.ai_seat)?);
                let agent = ic_meta_strategy(
                    policy.clone(),
                    IcConfig {
                        imitation_horizon: t_tilde,
                        total_horizon: game.horizon(),
                        seat: cfg.ai_seat,
                    },
                )?;
                let out = evaluate_against_population(
                    &agent,
                    cfg.ai_seat,
                    &population,
                    &types,
                    &game,
                    &baseline,
                    cfg.eval_episodes,
                    eval_seed,
                )?;
                let tv_seed = derive_seed(derive_seed(ctx.child(ROOT_TV), seed), (t_tilde * 1_000_003 + k) as u64);
                let (tv, tv_method) = tv_for_cell(ctx, &policy, &population, &types, &game, t_tilde, tv_seed)?;
                let tv_bound = imitation_tv_bound(n, t_tilde, game.n_types(), k)?;
                let positive: Vec<f64> = out.alt_regret.iter().map(|r| r.max(0.0)).collect();
                let (ci_low, ci_high) = bootstrap_mean_ci(&out.alt_regret, BOOTSTRAP_RESAMPLES, 0.95, eval_seed);
                rows.push(ResultRow {
                    experiment: format!("{}/run-ic", cfg.name),
                    config_hash: ctx.config_hash.clone(),
                    master_seed: ctx.master_seed,
                    k,
                    imitation_horizon: t_tilde,
                    seed,
                    ai_seat: cfg.ai_seat,
                    episodes: cfg.eval_episodes,
                    alt_regret_mean: mean(&out.alt_regret),
                    alt_regret_pos_mean: mean(&positive),
                    alt_regret_q50: quantile(&out.alt_regret, 0.5),
                    alt_regret_q90: quantile(&out.alt_regret, 0.9),
                    alt_regret_ci_low: ci_low,
                    alt_regret_ci_high: ci_high,
                    ext_regret_mean: mean(&out.ext_regret),
                    partner_payoff_mean: mean(&out.partner_payoff),
                    tv,
                    tv_method,
                    tv_bound,
                    tv_bound_capped: tv_bound.min(1.0),
                    regret_bound: ic_regret_bound(delta, epsilon, k, n, t_tilde, game.horizon(), game.n_types())?,
                    bound_delta: delta,
                    bound_epsilon: epsilon,
                    bound_source: bound_source.into(),
                    wall_clock_s: cfg.record_wall_clock.then(|| started.elapsed().as_secs_f64()),
                });
            }
        }
    }
    Ok(rows)
}

/// Certifies the configured population as a socially intelligent class.
pub fn certify(ctx: &Context) -> Result<SiClassReport> {
    let cfg = &ctx.config;
    let spec = cfg
        .certification
        .as_ref()
        .ok_or_else(|| Error::Config("certify needs a `certification` section".into()))?;
    let game = ctx.game()?;
    let long = Arc::new(game.with_horizon(spec.consistency_horizon)?);
    let members = cfg.population.factories(&long)?;
    let adversaries = adversary_suite(spec.adversaries.as_deref(), &long)?;
    certify_si_class(
        &members,
        cfg.si_request(spec),
        &long,
        &ctx.types(&game)?,
        &adversaries,
        spec.trials,
        ctx.child(ROOT_CERTIFY),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOutput {
    pub config_hash: String,
    pub master_seed: u64,
    #[serde(flatten)]
    pub report: SiClassReport,
}

pub fn certify_output(ctx: &Context) -> Result<CertifyOutput> {
    Ok(CertifyOutput {
        config_hash: ctx.config_hash.clone(),
        master_seed: ctx.master_seed,
        report: certify(ctx)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrimAblationRow {
    pub experiment: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub k: usize,
    pub imitation_horizon: usize,
    pub ai_seat: Seat,
    pub episodes: usize,
    pub ic_partner_payoff: f64,
    pub reference_partner_payoff: f64,
    pub gap: f64,
    pub ic_alt_regret_mean: f64,
}

/// Imitate-then-commit among grim-trigger agents, against the reference
/// population's self-play value for the same partner seat.
pub fn ablation_grim(ctx: &Context) -> Result<GrimAblationRow> {
    let cfg = &ctx.config;
    let spec = cfg
        .ablation
        .grim
        .as_ref()
        .ok_or_else(|| Error::Config("ablation A needs an `ablation.grim` section".into()))?;
    let game = ctx.game()?;
    let population = ctx.population(&game)?;
    let types = ctx.types(&game)?;
    let root = derive_seed(ctx.child(ROOT_ABLATION), 0);
    let ds = generate_dataset(&population, &types, spec.k, &game, derive_seed(root, 0))?;
    let policy = Arc::new(fit_imitation(&ds, spec.imitation_horizon, cfg.ai_seat)?);
    let agent = ic_meta_strategy(
        policy,
        IcConfig {
            imitation_horizon: spec.imitation_horizon,
            total_horizon: game.horizon(),
            seat: cfg.ai_seat,
        },
    )?;
    let eval_seed = derive_seed(root, 1);
    let baseline = AltruisticBaseline::new(&game)?;
    let out = evaluate_against_population(
        &agent,
        cfg.ai_seat,
        &population,
        &types,
        &game,
        &baseline,
        spec.episodes,
        eval_seed,
    )?;
    let reference = spec.reference.build(&game)?;
    let ref_value = population_partner_payoff(&reference, &types, &game, cfg.ai_seat.other(), spec.episodes, eval_seed)?;
    let ic_value = mean(&out.partner_payoff);
    Ok(GrimAblationRow {
        experiment: format!("{}/ablation-grim", cfg.name),
        config_hash: ctx.config_hash.clone(),
        master_seed: ctx.master_seed,
        k: spec.k,
        imitation_horizon: spec.imitation_horizon,
        ai_seat: cfg.ai_seat,
        episodes: spec.episodes,
        ic_partner_payoff: ic_value,
        reference_partner_payoff: ref_value,
        gap: ref_value - ic_value,
        ic_alt_regret_mean: mean(&out.alt_regret),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CceAblationRow {
    pub experiment: String,
    pub config_hash: String,
    pub master_seed: u64,
    /// `convergence` or `type_signal`.
    pub check: String,
    pub label: String,
    pub horizon: usize,
    pub samples: usize,
    pub tv: f64,
    pub watchdog_fired: usize,
}

/// Self-play convergence of CCE trackers to their target, and the absence of any
/// type signal in their histories.
pub fn ablation_cce(ctx: &Context) -> Result<Vec<CceAblationRow>> {
    let cfg = &ctx.config;
    let spec = cfg
        .ablation
        .cce
        .as_ref()
        .ok_or_else(|| Error::Config("ablation B needs an `ablation.cce` section".into()))?;
    let base = ctx.game()?;
    let root = derive_seed(ctx.child(ROOT_ABLATION), 1);
    let row = |check: &str, label: String, horizon: usize, samples: usize, tv: f64, fired: usize| CceAblationRow {
        experiment: format!("{}/ablation-cce", cfg.name),
        config_hash: ctx.config_hash.clone(),
        master_seed: ctx.master_seed,
        check: check.into(),
        label,
        horizon,
        samples,
        tv,
        watchdog_fired: fired,
    };
    let mut rows = Vec::new();

    let long = Arc::new(base.with_horizon(spec.convergence_horizon)?);
    let (target, supported) = spec.target.resolve(&long)?;
    let jt = match spec.target {
        CceTarget::MixedNash([a, b]) => JointType::new(a, b),
        CceTarget::Joint(_) => supported[0],
    };
    let shared = derive_seed(root, 0);
    let tracker = cce_tracker(target.clone(), long.clone(), spec.watchdog_slack, shared, &supported)?;
    let n = long.n_actions();
    let conv = (0..spec.convergence_seeds)
        .into_par_iter()
        .map(|s| {
            let mut a = tracker.clone();
            let mut b = tracker.clone();
            let rec = play_episode(&mut a, &mut b, jt, &long, derive_seed(root, 1 + s as u64))?;
            let z = empirical_joint_strategy(&rec.history, rec.history.len(), n)?;
            let fired = usize::from(a.fired()) + usize::from(b.fired());
            Ok((z.distribution.tv(&target), fired))
        })
        .collect::<Result<Vec<_>>>()?;
    for (s, (tv, fired)) in conv.into_iter().enumerate() {
        rows.push(row("convergence", format!("seed {s}"), spec.convergence_horizon, 1, tv, fired));
    }

    let short = Arc::new(base.with_horizon(spec.signal_history_length.max(1) + 1)?);
    let common = crate::equilibrium::JointDistribution::new(spec.signal_target.clone())?;
    let all: Vec<JointType> = short.joint_types().collect();
    let signal = cce_tracking_agent(common, short.clone(), spec.watchdog_slack, derive_seed(root, 1 << 20), &all)?;
    let population = Population::singleton("cce-tracking", signal);
    let dists = all
        .iter()
        .enumerate()
        .map(|(i, &jt)| {
            sample_history_distribution(
                RolloutSource::SelfPlay,
                &population,
                &TypeDistribution::point(short.n_types(), jt),
                &short,
                spec.signal_history_length,
                spec.signal_rollouts,
                derive_seed(root, (1 << 21) + i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            rows.push(row(
                "type_signal",
                format!("{} vs {}", all[i], all[j]),
                spec.signal_history_length,
                spec.signal_rollouts,
                tv_distance(&dists[i], &dists[j])?,
                0,
            ));
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub n_actions: usize,
    pub imitation_horizon: usize,
    pub horizon: usize,
    pub n_types: usize,
    pub k: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub tv_bound: f64,
    pub tv_bound_capped: f64,
    pub regret_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundArgs {
    pub n_actions: usize,
    pub imitation_horizon: usize,
    pub horizon: usize,
    pub n_types: usize,
    pub k_list: Vec<usize>,
    pub delta: f64,
    pub epsilon: f64,
}

pub fn bounds(args: &BoundArgs) -> Result<Vec<BoundRow>> {
    if args.k_list.is_empty() {
        return Err(Error::invalid("K list is empty"));
    }
    args.k_list
        .iter()
        .map(|&k| {
            let tv = imitation_tv_bound(args.n_actions, args.imitation_horizon, args.n_types, k)?;
            Ok(BoundRow {
                n_actions: args.n_actions,
                imitation_horizon: args.imitation_horizon,
                horizon: args.horizon,
                n_types: args.n_types,
                k,
                delta: args.delta,
                epsilon: args.epsilon,
                tv_bound: tv,
                tv_bound_capped: tv.min(1.0),
                regret_bound: ic_regret_bound(
                    args.delta,
                    args.epsilon,
                    k,
                    args.n_actions,
                    args.imitation_horizon,
                    args.horizon,
                    args.n_types,
                )?,
            })
        })
        .collect()
}

/// Regret-vs-K and TV-vs-K figures, one series per imitation horizon, averaged over
/// replicates.
pub fn plots(ctx: &Context, rows: &[ResultRow], data_file: &str) -> Vec<(String, PlotManifest)> {
    let series = |f: &dyn Fn(&ResultRow) -> Option<f64>| -> Vec<Series> {
        ctx.config
            .imitation_horizons
            .iter()
            .map(|&h| Series {
                name: format!("T̃ = {h}"),
                points: ctx
                    .config
                    .k_list
                    .iter()
                    .filter_map(|&k| {
                        let vals: Vec<f64> = rows
                            .iter()
                            .filter(|r| r.k == k && r.imitation_horizon == h)
                            .filter_map(f)
                            .collect();
                        (!vals.is_empty()).then(|| (k as f64, mean(&vals)))
                    })
                    .collect(),
            })
            .collect()
    };
    let k_axis = Axis {
        column: "k".into(),
        label: "dataset size K".into(),
        log_scale: true,
    };
    let manifest = |title: &str, column: &str, label: &str, series: Vec<Series>| PlotManifest {
        title: title.into(),
        data: data_file.into(),
        x: k_axis.clone(),
        y: Axis {
            column: column.into(),
            label: label.into(),
            log_scale: false,
        },
        series,
        config_hash: ctx.config_hash.clone(),
        master_seed: ctx.master_seed,
    };
    vec![
        (
            "regret_vs_k".into(),
            manifest(
                "Altruistic regret per step vs K",
                "alt_regret_mean",
                "mean altruistic regret per step",
                series(&|r| Some(r.alt_regret_mean)),
            ),
        ),
        (
            "tv_vs_k".into(),
            manifest("Imitation TV vs K", "tv", "TV distance", series(&|r| r.tv)),
        ),
    ]
}
