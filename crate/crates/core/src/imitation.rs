//! Population datasets, tabular behavioral cloning, and distances between
//! distributions over partial histories.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{sample_pairing, Population, TypeDistribution};
use crate::error::{Error, Result};
use crate::game::{
    play_prefix, Action, GameClass, History, JointAction, JointType, MetaStrategy, MixedStrategy, Seat,
    TypeId,
};
use crate::rng::derive_seed;

/// Largest number of length-`T̃` histories exact enumeration will visit.
pub const MAX_EXACT_HISTORIES: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n_actions: usize,
    pub horizon: usize,
    pub n_types: usize,
    pub master_seed: u64,
    pub population: String,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Episode {
    pub joint_type: JointType,
    pub history: History,
}

/// Full episodes played by pairs drawn from a population.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub episodes: Vec<Episode>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: DatasetMeta,
}

#[derive(Serialize, Deserialize)]
struct EpisodeLine {
    theta1: usize,
    theta2: usize,
    actions: Vec<[usize; 2]>,
}

/// Plays `k` episodes; episode `j` draws its pairing and actions from
/// `derive_seed(master_seed, j)`.
pub fn generate_dataset(
    population: &Population,
    types: &TypeDistribution,
    k: usize,
    game: &GameClass,
    master_seed: u64,
) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::invalid("dataset size K must be at least 1"));
    }
    if types.n_types() != game.n_types() {
        return Err(Error::invalid("type distribution does not match the game's type space"));
    }
    let episodes = (0..k)
        .into_par_iter()
        .map(|j| {
            let seed = derive_seed(master_seed, j as u64);
            let mut pairing = sample_pairing(population, types, seed);
            let history = play_prefix(
                &mut *pairing.strategy1,
                &mut *pairing.strategy2,
                pairing.joint_type,
                game,
                game.horizon(),
                seed,
            )?;
            Ok(Episode {
                joint_type: pairing.joint_type,
                history,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        meta: DatasetMeta {
            n_actions: game.n_actions(),
            horizon: game.horizon(),
            n_types: game.n_types(),
            master_seed,
            population: population.name().to_string(),
            k,
        },
        episodes,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// The first `k` episodes, which are themselves an i.i.d. dataset of size `k`.
    pub fn first(&self, k: usize) -> Result<Dataset> {
        if k > self.len() {
            return Err(Error::Dataset(format!("requested {k} episodes from a dataset of {}", self.len())));
        }
        Ok(Dataset {
            meta: DatasetMeta { k, ..self.meta.clone() },
            episodes: self.episodes[..k].to_vec(),
        })
    }

    /// Errors unless the header describes `game`.
    pub fn check_game(&self, game: &GameClass) -> Result<()> {
        let m = &self.meta;
        if m.n_actions != game.n_actions() || m.n_types != game.n_types() || m.horizon != game.horizon() {
            return Err(Error::Dataset(format!(
                "dataset header (N = {}, |Θ| = {}, T = {}) does not match game (N = {}, |Θ| = {}, T = {})",
                m.n_actions,
                m.n_types,
                m.horizon,
                game.n_actions(),
                game.n_types(),
                game.horizon()
            )));
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let to_err = |e: std::io::Error| Error::Dataset(e.to_string());
        let header = serde_json::to_string(&Header { meta: self.meta.clone() }).expect("header serializes");
        writeln!(out, "{header}").map_err(to_err)?;
        for ep in &self.episodes {
            let line = EpisodeLine {
                theta1: ep.joint_type.theta1,
                theta2: ep.joint_type.theta2,
                actions: ep.history.steps().iter().map(|s| [s.0, s.1]).collect(),
            };
            writeln!(out, "{}", serde_json::to_string(&line).expect("episode serializes")).map_err(to_err)?;
        }
        out.flush().map_err(to_err)
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        buf
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_jsonl(BufWriter::new(file))
            .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Dataset> {
        let mut lines = input.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| Error::Dataset("empty dataset file".into()))?;
        let first = first.map_err(|e| Error::Dataset(e.to_string()))?;
        let meta = serde_json::from_str::<Header>(&first)
            .map_err(|e| Error::Dataset(format!("line 1: bad header: {e}")))?
            .meta;
        let mut episodes = Vec::with_capacity(meta.k);
        for (i, line) in lines {
            let line = line.map_err(|e| Error::Dataset(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let ep: EpisodeLine = serde_json::from_str(&line)
                .map_err(|e| Error::Dataset(format!("line {}: {e}", i + 1)))?;
            let bad = |what: &str| Error::Dataset(format!("line {}: {what}", i + 1));
            if ep.theta1 >= meta.n_types || ep.theta2 >= meta.n_types {
                return Err(bad("type index out of range"));
            }
            if ep.actions.len() != meta.horizon {
                return Err(bad("history length differs from the header horizon"));
            }
            if ep.actions.iter().flatten().any(|&a| a >= meta.n_actions) {
                return Err(bad("action index out of range"));
            }
            episodes.push(Episode {
                joint_type: JointType::new(ep.theta1, ep.theta2),
                history: History::from_pairs(&ep.actions.iter().map(|a| (a[0], a[1])).collect::<Vec<_>>()),
            });
        }
        if episodes.len() != meta.k {
            return Err(Error::Dataset(format!(
                "header announces {} episodes, file has {}",
                meta.k,
                episodes.len()
            )));
        }
        Ok(Dataset { meta, episodes })
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(BufReader::new(file)).map_err(|e| match e {
            Error::Dataset(msg) => Error::Dataset(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

fn encode_prefix(steps: &[JointAction], n: usize) -> Vec<u32> {
    steps.iter().map(|s| (s.0 * n + s.1) as u32).collect()
}

/// Tabular behavioral clone of one seat: empirical next-action frequencies keyed by
/// the seat's own type and the joint-action prefix, uniform on unseen keys.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalPolicy {
    table: HashMap<(TypeId, Vec<u32>), MixedStrategy>,
    imitation_horizon: usize,
    n_actions: usize,
    seat: Seat,
    source_episodes: usize,
}

impl EmpiricalPolicy {
    pub fn imitation_horizon(&self) -> usize {
        self.imitation_horizon
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn seat(&self) -> Seat {
        self.seat
    }

    /// Number of episodes the policy was fit on; zero means uniform everywhere.
    pub fn source_episodes(&self) -> usize {
        self.source_episodes
    }

    pub fn n_keys(&self) -> usize {
        self.table.len()
    }

    pub fn get(&self, theta: TypeId, prefix: &[JointAction]) -> MixedStrategy {
        self.table
            .get(&(theta, encode_prefix(prefix, self.n_actions)))
            .cloned()
            .unwrap_or_else(|| MixedStrategy::uniform(self.n_actions))
    }

    pub fn contains(&self, theta: TypeId, prefix: &[JointAction]) -> bool {
        self.table.contains_key(&(theta, encode_prefix(prefix, self.n_actions)))
    }
}

/// Fits the empirical policy of `seat` on prefixes shorter than `imitation_horizon`.
pub fn fit_imitation(dataset: &Dataset, imitation_horizon: usize, seat: Seat) -> Result<EmpiricalPolicy> {
    let n = dataset.meta.n_actions;
    if imitation_horizon == 0 || imitation_horizon >= dataset.meta.horizon {
        return Err(Error::invalid(format!(
            "imitation horizon {imitation_horizon} must lie in [1, {})",
            dataset.meta.horizon
        )));
    }
    let mut counts: HashMap<(TypeId, Vec<u32>), Vec<u64>> = HashMap::new();
    for ep in &dataset.episodes {
        let theta = ep.joint_type.of(seat);
        let steps = ep.history.steps();
        for t in 0..imitation_horizon.min(steps.len()) {
            let key = (theta, encode_prefix(&steps[..t], n));
            counts.entry(key).or_insert_with(|| vec![0; n])[steps[t].of(seat)] += 1;
        }
    }
    let table = counts
        .into_iter()
        .map(|(k, c)| {
            let w: Vec<f64> = c.iter().map(|&x| x as f64).collect();
            (k, MixedStrategy::from_weights(&w))
        })
        .collect();
    Ok(EmpiricalPolicy {
        table,
        imitation_horizon,
        n_actions: n,
        seat,
        source_episodes: dataset.len(),
    })
}

/// Plays an [`EmpiricalPolicy`] from its own seat.
#[derive(Clone, Debug)]
pub struct ImitationAgent {
    policy: Arc<EmpiricalPolicy>,
}

impl ImitationAgent {
    pub fn new(policy: Arc<EmpiricalPolicy>) -> Self {
        Self { policy }
    }
}

impl MetaStrategy for ImitationAgent {
    fn name(&self) -> &str {
        "imitation"
    }

    fn reset(&mut self, _: u64) {}

    fn act(&mut self, theta: TypeId, seat: Seat, history: &History) -> Result<MixedStrategy> {
        if seat != self.policy.seat {
            return Err(Error::invalid(format!(
                "policy imitates seat {} but was seated at {seat}",
                self.policy.seat
            )));
        }
        Ok(self.policy.get(theta, history.steps()))
    }

    fn box_clone(&self) -> Box<dyn MetaStrategy> {
        Box::new(self.clone())
    }
}

/// Distribution over joint-action histories of a fixed length. Keys encode stage `t`
/// as `a₁·N + a₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryDistribution {
    n_actions: usize,
    length: usize,
    probs: BTreeMap<Vec<u32>, f64>,
}

impl HistoryDistribution {
    pub fn new(n_actions: usize, length: usize) -> Self {
        Self {
            n_actions,
            length,
            probs: BTreeMap::new(),
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn add(&mut self, history: &History, mass: f64) {
        debug_assert_eq!(history.len(), self.length);
        *self.probs.entry(encode_prefix(history.steps(), self.n_actions)).or_insert(0.0) += mass;
    }

    pub fn prob(&self, history: &History) -> f64 {
        self.probs
            .get(&encode_prefix(history.steps(), self.n_actions))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn support_len(&self) -> usize {
        self.probs.values().filter(|p| **p > 0.0).count()
    }

    /// `(history, probability)` pairs in key order.
    pub fn iter(&self) -> impl Iterator<Item = (History, f64)> + '_ {
        let n = self.n_actions;
        self.probs.iter().map(move |(k, p)| {
            let pairs: Vec<(Action, Action)> =
                k.iter().map(|&c| (c as usize / n, c as usize % n)).collect();
            (History::from_pairs(&pairs), *p)
        })
    }

    fn scale(&mut self, factor: f64) {
        self.probs.values_mut().for_each(|p| *p *= factor);
    }
}

/// Half the L1 distance over the union support.
pub fn tv_distance(p: &HistoryDistribution, q: &HistoryDistribution) -> Result<f64> {
    if p.n_actions != q.n_actions || p.length != q.length {
        return Err(Error::invalid("history distributions differ in action count or length"));
    }
    let mut l1 = 0.0;
    for (k, a) in &p.probs {
        l1 += (a - q.probs.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, b) in &q.probs {
        if !p.probs.contains_key(k) {
            l1 += b.abs();
        }
    }
    Ok((0.5 * l1).clamp(0.0, 1.0))
}

/// Who fills the seats when rolling out partial histories.
#[derive(Clone, Copy, Debug)]
pub enum RolloutSource<'a> {
    /// Both seats drawn independently from the population.
    SelfPlay,
    /// The policy's seat plays the policy; the other seat is drawn from the population.
    Imitation(&'a EmpiricalPolicy),
}

type Weighted = Vec<(Box<dyn MetaStrategy>, f64)>;

fn seat_candidates(source: RolloutSource<'_>, population: &Population) -> [Weighted; 2] {
    let members = || -> Weighted {
        population
            .members()
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(f, w)| (f.build(), *w))
            .collect()
    };
    match source {
        RolloutSource::SelfPlay => [members(), members()],
        RolloutSource::Imitation(policy) => {
            let agent: Weighted = vec![(Box::new(ImitationAgent::new(Arc::new(policy.clone()))), 1.0)];
            match policy.seat {
                Seat::One => [agent, members()],
                Seat::Two => [members(), agent],
            }
        }
    }
}

/// Exact distribution of length-`imitation_horizon` histories, marginalizing the type
/// distribution and the population draw of each seat.
pub fn rollout_distribution_exact(
    source: RolloutSource<'_>,
    population: &Population,
    types: &TypeDistribution,
    game: &GameClass,
    imitation_horizon: usize,
) -> Result<HistoryDistribution> {
    let n = game.n_actions();
    let leaves = (n as f64).powi(2 * imitation_horizon as i32);
    if leaves > MAX_EXACT_HISTORIES {
        return Err(Error::UnsupportedSize(format!(
            "{n}^(2·{imitation_horizon}) histories exceed the exact-enumeration limit; use the Monte Carlo estimator"
        )));
    }
    if let RolloutSource::Imitation(p) = source {
        if p.n_actions != n {
            return Err(Error::invalid("policy and game differ in action count"));
        }
    }
    let [seat1, seat2] = seat_candidates(source, population);
    if let Some((s, _)) = seat1.iter().chain(&seat2).find(|(s, _)| !s.history_deterministic()) {
        return Err(Error::InvalidPopulation(format!(
            "{} does not expose a history-determined action distribution",
            s.name()
        )));
    }
    let mut out = HistoryDistribution::new(n, imitation_horizon);
    for (jt, mu) in types.support() {
        jt.validate(game)?;
        for (s1, w1) in &seat1 {
            for (s2, w2) in &seat2 {
                let mut s1 = s1.clone();
                let mut s2 = s2.clone();
                s1.reset(0);
                s2.reset(0);
                let mut history = History::with_capacity(imitation_horizon);
                enumerate(s1, s2, jt, n, imitation_horizon, &mut history, mu * w1 * w2, &mut out)?;
            }
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    mut s1: Box<dyn MetaStrategy>,
    mut s2: Box<dyn MetaStrategy>,
    jt: JointType,
    n: usize,
    length: usize,
    history: &mut History,
    mass: f64,
    out: &mut HistoryDistribution,
) -> Result<()> {
    if history.len() == length {
        out.add(history, mass);
        return Ok(());
    }
    let d1 = s1.act(jt.theta1, Seat::One, history)?;
    let d2 = s2.act(jt.theta2, Seat::Two, history)?;
    for (seat, d) in [(Seat::One, &d1), (Seat::Two, &d2)] {
        d.check(n).map_err(|reason| Error::ProtocolViolation {
            stage: history.len() + 1,
            seat,
            reason,
        })?;
    }
    for (a1, p) in d1.probs().iter().enumerate().filter(|(_, p)| **p > 0.0) {
        for (a2, q) in d2.probs().iter().enumerate().filter(|(_, q)| **q > 0.0) {
            history.push(JointAction(a1, a2));
            enumerate(s1.clone(), s2.clone(), jt, n, length, history, mass * p * q, out)?;
            history.pop();
        }
    }
    Ok(())
}

/// Empirical histogram of `n_samples` sampled partial histories.
pub fn sample_history_distribution(
    source: RolloutSource<'_>,
    population: &Population,
    types: &TypeDistribution,
    game: &GameClass,
    length: usize,
    n_samples: usize,
    seed: u64,
) -> Result<HistoryDistribution> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    let policy = match source {
        RolloutSource::Imitation(p) => Some(Arc::new(p.clone())),
        RolloutSource::SelfPlay => None,
    };
    let histories = (0..n_samples)
        .into_par_iter()
        .map(|r| {
            let s = derive_seed(seed, r as u64);
            let mut pairing = sample_pairing(population, types, s);
            if let Some(p) = &policy {
                let agent: Box<dyn MetaStrategy> = Box::new(ImitationAgent::new(p.clone()));
                match p.seat {
                    Seat::One => pairing.strategy1 = agent,
                    Seat::Two => pairing.strategy2 = agent,
                }
            }
            play_prefix(
                &mut *pairing.strategy1,
                &mut *pairing.strategy2,
                pairing.joint_type,
                game,
                length,
                s,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = HistoryDistribution::new(game.n_actions(), length);
    for h in &histories {
        out.add(h, 1.0);
    }
    out.scale(1.0 / n_samples as f64);
    Ok(out)
}

/// Plug-in TV estimate between sampled histories.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McTv {
    pub estimate: f64,
    /// Always true: the plug-in estimator is biased upward.
    pub biased_upward: bool,
}

/// Plug-in TV between the self-play and imitation history histograms.
pub fn tv_distance_mc(
    policy: &EmpiricalPolicy,
    population: &Population,
    types: &TypeDistribution,
    game: &GameClass,
    imitation_horizon: usize,
    n_samples: usize,
    seed: u64,
) -> Result<McTv> {
    let p = sample_history_distribution(
        RolloutSource::SelfPlay,
        population,
        types,
        game,
        imitation_horizon,
        n_samples,
        derive_seed(seed, 0),
    )?;
    let q = sample_history_distribution(
        RolloutSource::Imitation(policy),
        population,
        types,
        game,
        imitation_horizon,
        n_samples,
        derive_seed(seed, 1),
    )?;
    Ok(McTv {
        estimate: tv_distance(&p, &q)?,
        biased_upward: true,
    })
}

/// `min{T̃, N^{2(T̃+1)}·|Θ|·T̃²·ln K / K}` with the natural logarithm.
pub fn imitation_tv_bound(n_actions: usize, imitation_horizon: usize, n_types: usize, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid("imitation TV bound needs K ≥ 2"));
    }
    if n_actions == 0 || n_types == 0 || imitation_horizon == 0 {
        return Err(Error::invalid("N, T̃ and |Θ| must be positive"));
    }
    let t = imitation_horizon as f64;
    let k = k as f64;
    let second = (n_actions as f64).powi(2 * (imitation_horizon as i32 + 1)) * n_types as f64 * t * t * k.ln() / k;
    Ok(t.min(second))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{handshake_si_agent, ConstantAgent, HandshakeCodebook, UniformAgent};
    use crate::game::{make_coordpref_game, StrategyFactory};
    use proptest::prelude::*;

    fn coord(h: usize) -> GameClass {
        make_coordpref_game(2, 0.6, h).unwrap()
    }

    fn constant(n: usize, a: Action) -> Population {
        Population::singleton(
            format!("constant-{a}"),
            StrategyFactory::new(format!("constant-{a}"), move || Box::new(ConstantAgent::new(n, a))),
        )
    }

    fn uniform(n: usize) -> Population {
        Population::singleton("uniform", StrategyFactory::new("uniform", move || Box::new(UniformAgent::new(n))))
    }

    fn handshake(g: &GameClass) -> Population {
        let g = Arc::new(g.clone());
        let cb = HandshakeCodebook::for_game(&g).unwrap();
        Population::singleton("handshake", handshake_si_agent(cb, g, 0.1).unwrap())
    }

    fn one_episode(theta1: TypeId, pairs: &[(Action, Action)]) -> Dataset {
        Dataset {
            meta: DatasetMeta {
                n_actions: 2,
                horizon: pairs.len(),
                n_types: 2,
                master_seed: 0,
                population: "manual".into(),
                k: 1,
            },
            episodes: vec![Episode {
                joint_type: JointType::new(theta1, 0),
                history: History::from_pairs(pairs),
            }],
        }
    }

    #[test]
    fn dataset_cardinality_and_determinism() {
        let g = coord(6);
        let pop = handshake(&g);
        let types = TypeDistribution::uniform(2);
        let a = generate_dataset(&pop, &types, 5, &g, 11).unwrap();
        assert_eq!(a.len(), 5);
        assert!(a.episodes.iter().all(|e| e.history.len() == 6));
        let b = generate_dataset(&pop, &types, 5, &g, 11).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert!(generate_dataset(&pop, &types, 0, &g, 11).is_err());
    }

    #[test]
    fn deterministic_population_records_constant_histories() {
        let g = coord(4);
        let types = TypeDistribution::point(2, JointType::new(0, 0));
        let ds = generate_dataset(&constant(2, 0), &types, 3, &g, 1).unwrap();
        for ep in &ds.episodes {
            assert_eq!(ep.history, History::from_pairs(&[(0, 0); 4]));
        }
    }

    #[test]
    fn jsonl_round_trip_and_format() {
        let g = coord(3);
        let ds = generate_dataset(&uniform(2), &TypeDistribution::uniform(2), 4, &g, 5).unwrap();
        let bytes = ds.to_jsonl();
        let text = String::from_utf8(bytes.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with(r#"{"meta":{"n_actions":2,"horizon":3,"n_types":2,"master_seed":5,"population":"uniform","k":4}}"#));
        assert!(lines[1].starts_with(r#"{"theta1":"#));
        let back = Dataset::read_jsonl(&bytes[..]).unwrap();
        assert_eq!(back, ds);
        let truncated = &bytes[..bytes.len() - lines[4].len() - 1];
        assert!(Dataset::read_jsonl(truncated).is_err());
    }

    #[test]
    fn single_episode_fit() {
        let ds = one_episode(0, &[(0, 0), (0, 0)]);
        let p = fit_imitation(&ds, 1, Seat::One).unwrap();
        assert_eq!(p.get(0, &[]), MixedStrategy::pure(2, 0));
        let ds = one_episode(0, &[(0, 0), (0, 0), (1, 1)]);
        let p = fit_imitation(&ds, 2, Seat::One).unwrap();
        assert_eq!(p.n_keys(), 2);
        assert_eq!(p.get(0, &[]), MixedStrategy::pure(2, 0));
        assert_eq!(p.get(0, &[JointAction(0, 0)]), MixedStrategy::pure(2, 0));
        assert_eq!(p.get(1, &[]), MixedStrategy::uniform(2));
        assert!(fit_imitation(&ds, 3, Seat::One).is_err());
        assert!(fit_imitation(&ds, 0, Seat::One).is_err());
    }

    #[test]
    fn empirical_frequencies() {
        let mut ds = one_episode(0, &[(0, 0), (0, 0)]);
        ds.episodes.push(Episode {
            joint_type: JointType::new(0, 1),
            history: History::from_pairs(&[(1, 0), (0, 0)]),
        });
        ds.meta.k = 2;
        let p = fit_imitation(&ds, 1, Seat::One).unwrap();
        assert_eq!(p.get(0, &[]), MixedStrategy::uniform(2));
        // Seat 2 keys on its own type.
        let p2 = fit_imitation(&ds, 1, Seat::Two).unwrap();
        assert_eq!(p2.get(0, &[]), MixedStrategy::pure(2, 0));
        assert_eq!(p2.get(1, &[]), MixedStrategy::pure(2, 0));
    }

    #[test]
    fn empty_dataset_is_uniform() {
        let mut ds = one_episode(0, &[(0, 0), (0, 0)]);
        ds.episodes.clear();
        ds.meta.k = 0;
        let p = fit_imitation(&ds, 1, Seat::One).unwrap();
        assert_eq!(p.source_episodes(), 0);
        assert_eq!(p.get(0, &[]), MixedStrategy::uniform(2));
    }

    #[test]
    fn exact_rollouts() {
        let g = coord(4);
        let types = TypeDistribution::point(2, JointType::new(1, 0));
        let d = rollout_distribution_exact(RolloutSource::SelfPlay, &constant(2, 1), &types, &g, 2).unwrap();
        assert_eq!(d.support_len(), 1);
        assert_eq!(d.prob(&History::from_pairs(&[(1, 1), (1, 1)])), 1.0);

        let d = rollout_distribution_exact(RolloutSource::SelfPlay, &uniform(2), &types, &g, 1).unwrap();
        assert_eq!(d.support_len(), 4);
        for (_, p) in d.iter() {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn imitation_of_deterministic_population_is_exact() {
        let g = coord(4);
        let types = TypeDistribution::point(2, JointType::new(0, 0));
        let pop = constant(2, 0);
        let ds = generate_dataset(&pop, &types, 1, &g, 3).unwrap();
        let policy = fit_imitation(&ds, 2, Seat::One).unwrap();
        let p = rollout_distribution_exact(RolloutSource::SelfPlay, &pop, &types, &g, 2).unwrap();
        let q = rollout_distribution_exact(RolloutSource::Imitation(&policy), &pop, &types, &g, 2).unwrap();
        assert_eq!(tv_distance(&p, &q).unwrap(), 0.0);
    }

    #[test]
    fn handshake_imitation_with_full_coverage_is_exact() {
        let g = coord(6);
        let pop = handshake(&g);
        let types = TypeDistribution::uniform(2);
        let ds = generate_dataset(&pop, &types, 200, &g, 3).unwrap();
        let policy = fit_imitation(&ds, 3, Seat::One).unwrap();
        let p = rollout_distribution_exact(RolloutSource::SelfPlay, &pop, &types, &g, 3).unwrap();
        let q = rollout_distribution_exact(RolloutSource::Imitation(&policy), &pop, &types, &g, 3).unwrap();
        assert!((p.total() - 1.0).abs() < 1e-9);
        assert!(tv_distance(&p, &q).unwrap() < 1e-12);
    }

    #[test]
    fn enumeration_guard() {
        let g = coord(20);
        let err = rollout_distribution_exact(RolloutSource::SelfPlay, &uniform(2), &TypeDistribution::uniform(2), &g, 10);
        assert!(matches!(err, Err(Error::UnsupportedSize(_))));
    }

    #[test]
    fn tv_examples() {
        let mk = |ps: &[f64]| {
            let mut d = HistoryDistribution::new(2, 1);
            for (c, p) in ps.iter().enumerate() {
                d.add(&History::from_pairs(&[(c / 2, c % 2)]), *p);
            }
            d
        };
        let p = mk(&[0.5, 0.5, 0.0, 0.0]);
        let q = mk(&[0.25; 4]);
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert!((tv_distance(&p, &q).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(tv_distance(&mk(&[1.0]), &mk(&[0.0, 1.0])).unwrap(), 1.0);
        assert!(tv_distance(&p, &HistoryDistribution::new(2, 2)).is_err());
    }

    #[test]
    fn mc_tv_examples() {
        let g = coord(4);
        let types = TypeDistribution::point(2, JointType::new(0, 0));
        let pop = constant(2, 0);
        let ds = generate_dataset(&pop, &types, 1, &g, 3).unwrap();
        let policy = fit_imitation(&ds, 2, Seat::One).unwrap();
        let r = tv_distance_mc(&policy, &pop, &types, &g, 2, 50, 1).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert!(r.biased_upward);
        // A policy fit on always-1 play, evaluated against always-0 partners.
        let other = generate_dataset(&constant(2, 1), &types, 1, &g, 3).unwrap();
        let policy = fit_imitation(&other, 2, Seat::One).unwrap();
        assert_eq!(tv_distance_mc(&policy, &pop, &types, &g, 2, 1, 1).unwrap().estimate, 1.0);
    }

    #[test]
    fn mc_tv_tracks_exact() {
        let g = coord(6);
        let pop = handshake(&g);
        let types = TypeDistribution::uniform(2);
        let ds = generate_dataset(&pop, &types, 3, &g, 8).unwrap();
        let policy = fit_imitation(&ds, 2, Seat::One).unwrap();
        let p = rollout_distribution_exact(RolloutSource::SelfPlay, &pop, &types, &g, 2).unwrap();
        let q = rollout_distribution_exact(RolloutSource::Imitation(&policy), &pop, &types, &g, 2).unwrap();
        let exact = tv_distance(&p, &q).unwrap();
        for seed in 0..5 {
            let mc = tv_distance_mc(&policy, &pop, &types, &g, 2, 100_000, seed).unwrap();
            assert!((mc.estimate - exact).abs() <= 0.03, "{} vs {exact}", mc.estimate);
        }
    }

    #[test]
    fn tv_bound_examples() {
        assert_eq!(imitation_tv_bound(2, 2, 2, 10).unwrap(), 2.0);
        let b = imitation_tv_bound(2, 2, 2, 100_000).unwrap();
        assert!((b - 512.0 * (1e5f64).ln() / 1e5).abs() < 1e-15);
        assert!((b - 0.0590).abs() < 1e-4);
        assert_eq!(imitation_tv_bound(5, 4, 9, 1000).unwrap(), 4.0);
        assert!(imitation_tv_bound(2, 2, 2, 1).is_err());
    }

    proptest! {
        #[test]
        fn policy_lookups_are_distributions(
            theta in 0usize..4,
            prefix in proptest::collection::vec((0usize..2, 0usize..2), 0..4),
            seed in 0u64..50,
        ) {
            let g = coord(5);
            let ds = generate_dataset(&uniform(2), &TypeDistribution::uniform(2), 20, &g, seed).unwrap();
            let p = fit_imitation(&ds, 3, Seat::One).unwrap();
            let steps: Vec<JointAction> = prefix.iter().map(|&(a, b)| JointAction(a, b)).collect();
            let d = p.get(theta, &steps);
            prop_assert_eq!(d.n(), 2);
            prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(d.probs().iter().all(|x| *x >= 0.0));
        }

        #[test]
        fn tv_bound_never_exceeds_horizon(n in 2usize..5, t in 1usize..6, types in 1usize..5, k in 2usize..1_000_000) {
            let b = imitation_tv_bound(n, t, types, k).unwrap();
            prop_assert!(b <= t as f64 && b > 0.0);
        }
    }
}
