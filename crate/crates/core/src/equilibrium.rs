//! Exact equilibrium analysis of the stage game `G(θ₁, θ₂)`.
//!
//! Nash equilibria are found by support enumeration over equal-size support pairs,
//! solving the indifference system of each pair. Singular systems are skipped and
//! counted; every candidate is verified against all pure deviations before it is
//! accepted.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Action, GameClass, JointType, MixedStrategy, PayoffMatrix, Seat, TypeId, TOL};

/// Largest action count accepted by [`enumerate_nash`].
pub const MAX_ENUMERATION_ACTIONS: usize = 5;
/// Profiles closer than this in L-infinity distance are the same equilibrium.
pub const DEDUP_TOL: f64 = 1e-6;
/// Margin turning strict Pareto domination into a numeric test.
pub const DOMINATION_MARGIN: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumProfile {
    pub strategy1: MixedStrategy,
    pub strategy2: MixedStrategy,
    pub payoff1: f64,
    pub payoff2: f64,
}

impl EquilibriumProfile {
    pub fn strategy(&self, seat: Seat) -> &MixedStrategy {
        match seat {
            Seat::One => &self.strategy1,
            Seat::Two => &self.strategy2,
        }
    }

    pub fn payoff(&self, seat: Seat) -> f64 {
        match seat {
            Seat::One => self.payoff1,
            Seat::Two => self.payoff2,
        }
    }

    fn linf(&self, other: &Self) -> f64 {
        let a = self.strategy1.linf(&other.strategy1).unwrap_or(f64::INFINITY);
        let b = self.strategy2.linf(&other.strategy2).unwrap_or(f64::INFINITY);
        a.max(b)
    }
}

/// Orders profiles by their concatenated probability vectors, highest mass on
/// low-index actions first. `(e₀, e₀)` therefore precedes `(e₁, e₁)`.
pub fn profile_order(a: &EquilibriumProfile, b: &EquilibriumProfile) -> Ordering {
    let av = a.strategy1.probs().iter().chain(a.strategy2.probs());
    let bv = b.strategy1.probs().iter().chain(b.strategy2.probs());
    for (x, y) in av.zip(bv) {
        if (x - y).abs() > TOL {
            return y.total_cmp(x);
        }
    }
    Ordering::Equal
}

/// Probability distribution over joint actions, stored row-major as `[a₁ * N + a₂]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    n: usize,
    weights: Vec<f64>,
}

impl JointDistribution {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("joint distribution must be a non-empty square table"));
        }
        let weights: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_flat(n, weights)
    }

    pub fn from_flat(n: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n * n {
            return Err(Error::invalid("joint distribution has the wrong size"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("joint distribution has a negative weight"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > TOL {
            return Err(Error::invalid(format!("joint distribution sums to {total}")));
        }
        Ok(Self { n, weights })
    }

    pub fn product(p: &MixedStrategy, q: &MixedStrategy) -> Result<Self> {
        if p.n() != q.n() {
            return Err(Error::invalid("product of strategies with different dimensions"));
        }
        let n = p.n();
        let weights = (0..n * n).map(|i| p.prob(i / n) * q.prob(i % n)).collect();
        Ok(Self { n, weights })
    }

    pub fn point(n: usize, a1: Action, a2: Action) -> Self {
        let mut weights = vec![0.0; n * n];
        weights[a1 * n + a2] = 1.0;
        Self { n, weights }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a1: Action, a2: Action) -> f64 {
        self.weights[a1 * self.n + a2]
    }

    pub fn flat(&self) -> &[f64] {
        &self.weights
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Marginal distribution of `seat`'s action.
    pub fn marginal(&self, seat: Seat) -> MixedStrategy {
        let n = self.n;
        let m: Vec<f64> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| match seat {
                        Seat::One => self.get(a, b),
                        Seat::Two => self.get(b, a),
                    })
                    .sum()
            })
            .collect();
        MixedStrategy::from_weights(&m)
    }

    /// Expected payoff to `seat` holding `matrix` (own-row convention).
    pub fn expected_payoff(&self, seat: Seat, matrix: &PayoffMatrix) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for a1 in 0..n {
            for a2 in 0..n {
                let w = self.get(a1, a2);
                if w > 0.0 {
                    total += w * match seat {
                        Seat::One => matrix.get(a1, a2),
                        Seat::Two => matrix.get(a2, a1),
                    };
                }
            }
        }
        total
    }

    /// Half L1 distance.
    pub fn tv(&self, other: &JointDistribution) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Row and column payoff tables of the bimatrix game `G(θ₁, θ₂)`, both indexed
/// `[seat-1 action][seat-2 action]`.
#[derive(Clone, Debug)]
pub struct Bimatrix {
    n: usize,
    row: Vec<f64>,
    col: Vec<f64>,
}

impl Bimatrix {
    pub fn from_game(game: &GameClass, joint_type: JointType) -> Result<Self> {
        joint_type.validate(game)?;
        let n = game.n_actions();
        let g1 = game.matrix(joint_type.theta1);
        let g2 = game.matrix(joint_type.theta2);
        let mut row = vec![0.0; n * n];
        let mut col = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                row[i * n + j] = g1.get(i, j);
                col[i * n + j] = g2.get(j, i);
            }
        }
        Ok(Self { n, row, col })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.row[i * self.n + j]
    }

    #[inline]
    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.col[i * self.n + j]
    }

    pub fn payoffs(&self, p: &[f64], q: &[f64]) -> (f64, f64) {
        let mut u1 = 0.0;
        let mut u2 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let w = p[i] * q[j];
                u1 += w * self.a(i, j);
                u2 += w * self.b(i, j);
            }
        }
        (u1, u2)
    }

    /// Largest gain either seat can obtain from a pure deviation.
    pub fn nash_gap(&self, p: &[f64], q: &[f64]) -> f64 {
        let (u1, u2) = self.payoffs(p, q);
        let best1 = (0..self.n)
            .map(|i| (0..self.n).map(|j| q[j] * self.a(i, j)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        let best2 = (0..self.n)
            .map(|j| (0..self.n).map(|i| p[i] * self.b(i, j)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        (best1 - u1).max(best2 - u2)
    }
}

/// Best pure response to `opponent` for an agent of type `theta`; ties go to the
/// lowest action index.
///
/// Matrices use the owner's point of view, so the seat does not enter.
pub fn best_response(
    opponent: &MixedStrategy,
    theta: TypeId,
    game: &GameClass,
) -> Result<(Action, f64)> {
    game.check_type(theta)?;
    if opponent.n() != game.n_actions() {
        return Err(Error::invalid("opponent strategy has the wrong dimension"));
    }
    Ok(best_response_to(game.matrix(theta), opponent))
}

pub(crate) fn best_response_to(matrix: &PayoffMatrix, opponent: &MixedStrategy) -> (Action, f64) {
    let values: Vec<f64> = (0..matrix.n()).map(|a| matrix.action_value(a, opponent)).collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let action = values.iter().position(|v| *v >= max - 1e-12).unwrap_or(0);
    (action, values[action])
}

/// Output of support enumeration.
#[derive(Clone, Debug)]
pub struct NashEnumeration {
    pub profiles: Vec<EquilibriumProfile>,
    /// Support pairs whose indifference system was singular.
    pub degenerate_supports: usize,
}

/// All Nash equilibria of `G(joint_type)` found by support enumeration.
pub fn enumerate_nash(
    joint_type: JointType,
    game: &GameClass,
    tol: f64,
) -> Result<Vec<EquilibriumProfile>> {
    Ok(support_enumeration(&Bimatrix::from_game(game, joint_type)?, tol)?.profiles)
}

pub fn support_enumeration(game: &Bimatrix, tol: f64) -> Result<NashEnumeration> {
    let n = game.n();
    if n > MAX_ENUMERATION_ACTIONS {
        return Err(Error::UnsupportedSize(format!(
            "support enumeration is limited to N <= {MAX_ENUMERATION_ACTIONS}, got {n}"
        )));
    }
    let mut profiles: Vec<EquilibriumProfile> = Vec::new();
    let mut degenerate = 0;
    for k in 1..=n {
        let supports = subsets(n, k);
        for rows in &supports {
            for cols in &supports {
                // Column mix making the row player indifferent over `rows`, and
                // vice versa.
                let q = indifference(k, rows, cols, |i, j| game.a(i, j));
                let p = indifference(k, cols, rows, |j, i| game.b(i, j));
                let (Some(q_s), Some(p_s)) = (q, p) else {
                    degenerate += 1;
                    continue;
                };
                let Some(p) = expand(n, rows, &p_s) else { continue };
                let Some(q) = expand(n, cols, &q_s) else { continue };
                if game.nash_gap(&p, &q) > tol {
                    continue;
                }
                let (u1, u2) = game.payoffs(&p, &q);
                let candidate = EquilibriumProfile {
                    strategy1: MixedStrategy::from_weights(&p),
                    strategy2: MixedStrategy::from_weights(&q),
                    payoff1: u1,
                    payoff2: u2,
                };
                if !profiles.iter().any(|e| e.linf(&candidate) <= DEDUP_TOL) {
                    profiles.push(candidate);
                }
            }
        }
    }
    Ok(NashEnumeration {
        profiles,
        degenerate_supports: degenerate,
    })
}

/// Solves `Σ_{j∈others} m(i, j) x_j = v` for every `i ∈ own`, `Σ x_j = 1`.
/// Returns `x` restricted to `others`, or `None` if the system is singular.
fn indifference(
    k: usize,
    own: &[usize],
    others: &[usize],
    m: impl Fn(usize, usize) -> f64,
) -> Option<Vec<f64>> {
    let dim = k + 1;
    let mut a = vec![vec![0.0; dim + 1]; dim];
    for (r, &i) in own.iter().enumerate() {
        for (c, &j) in others.iter().enumerate() {
            a[r][c] = m(i, j);
        }
        a[r][k] = -1.0;
    }
    for c in 0..k {
        a[k][c] = 1.0;
    }
    a[k][dim] = 1.0;
    let x = solve(a)?;
    Some(x[..k].to_vec())
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let dim = a.len();
    for col in 0..dim {
        let pivot = (col..dim).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..dim {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=dim {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Some((0..dim).map(|r| a[r][dim] / a[r][r]).collect())
}

/// Embeds support weights into a full vector, rejecting clearly negative weights.
fn expand(n: usize, support: &[usize], weights: &[f64]) -> Option<Vec<f64>> {
    if weights.iter().any(|w| *w < -1e-9) {
        return None;
    }
    let mut full = vec![0.0; n];
    for (&i, &w) in support.iter().zip(weights) {
        full[i] = w.max(0.0);
    }
    let total: f64 = full.iter().sum();
    if total <= 0.0 {
        return None;
    }
    full.iter_mut().for_each(|w| *w /= total);
    Some(full)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

/// Drops every profile strongly Pareto-dominated by another profile in the set.
pub fn pareto_optimal_nash(ne_set: &[EquilibriumProfile]) -> Vec<EquilibriumProfile> {
    ne_set
        .iter()
        .filter(|e| {
            !ne_set.iter().any(|o| {
                o.payoff1 > e.payoff1 + DOMINATION_MARGIN && o.payoff2 > e.payoff2 + DOMINATION_MARGIN
            })
        })
        .cloned()
        .collect()
}

/// Pareto-optimal Nash equilibria of `G(joint_type)`.
pub fn pone_set(joint_type: JointType, game: &GameClass) -> Result<Vec<EquilibriumProfile>> {
    Ok(pareto_optimal_nash(&enumerate_nash(joint_type, game, TOL)?))
}

/// The PONE with the lowest payoff for `partner_seat`. Ties go to the lower payoff
/// of the other seat, then to [`profile_order`].
pub fn worst_pone_for(
    partner_seat: Seat,
    pone_set: &[EquilibriumProfile],
) -> Option<&EquilibriumProfile> {
    let other = partner_seat.other();
    pone_set.iter().min_by(|a, b| {
        cmp_tol(a.payoff(partner_seat), b.payoff(partner_seat))
            .then_with(|| cmp_tol(a.payoff(other), b.payoff(other)))
            .then_with(|| profile_order(a, b))
    })
}

/// The PONE maximizing the payoff sum, ties broken by [`profile_order`].
pub fn utilitarian_pone(pone_set: &[EquilibriumProfile]) -> Option<&EquilibriumProfile> {
    pone_set.iter().min_by(|a, b| {
        cmp_tol(b.payoff1 + b.payoff2, a.payoff1 + a.payoff2).then_with(|| profile_order(a, b))
    })
}

fn cmp_tol(x: f64, y: f64) -> Ordering {
    if (x - y).abs() <= TOL {
        Ordering::Equal
    } else {
        x.total_cmp(&y)
    }
}

/// Coarse correlated equilibrium test. Returns the verdict and the largest gain any
/// seat gets by committing to a fixed action before the draw.
pub fn is_cce(
    z: &JointDistribution,
    joint_type: JointType,
    game: &GameClass,
    tol: f64,
) -> Result<(bool, f64)> {
    let bm = Bimatrix::from_game(game, joint_type)?;
    let n = bm.n();
    if z.n() != n {
        return Err(Error::invalid("joint distribution dimension does not match the game"));
    }
    let mut u1 = 0.0;
    let mut u2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            u1 += z.get(i, j) * bm.a(i, j);
            u2 += z.get(i, j) * bm.b(i, j);
        }
    }
    let mut worst = f64::NEG_INFINITY;
    for d in 0..n {
        let dev1: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| z.get(i, j) * bm.a(d, j))
            .sum();
        let dev2: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| z.get(i, j) * bm.b(i, d))
            .sum();
        worst = worst.max(dev1 - u1).max(dev2 - u2);
    }
    Ok((worst <= tol, worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{make_coordpref_game, make_matching_pennies_game};

    fn coord() -> GameClass {
        make_coordpref_game(2, 0.6, 10).unwrap()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-6)
    }

    #[test]
    fn best_response_examples() {
        let g = coord();
        let e0 = MixedStrategy::pure(2, 0);
        let e1 = MixedStrategy::pure(2, 1);
        assert_eq!(best_response(&e0, 1, &g).unwrap(), (0, 0.6));
        assert_eq!(best_response(&e1, 1, &g).unwrap(), (1, 1.0));
        let ident = make_matching_pennies_game(1).unwrap();
        let (a, v) = best_response(&MixedStrategy::uniform(2), 0, &ident).unwrap();
        assert_eq!(a, 0);
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matching_pennies_unique_mixed() {
        let g = make_matching_pennies_game(1).unwrap();
        let ne = enumerate_nash(JointType::new(0, 1), &g, 1e-9).unwrap();
        assert_eq!(ne.len(), 1);
        assert!(close(ne[0].strategy1.probs(), &[0.5, 0.5]));
        assert!(close(ne[0].strategy2.probs(), &[0.5, 0.5]));
    }

    #[test]
    fn coordpref_mixed_types_three_equilibria() {
        let ne = enumerate_nash(JointType::new(0, 1), &coord(), 1e-9).unwrap();
        assert_eq!(ne.len(), 3);
        let find = |u1: f64, u2: f64| {
            ne.iter()
                .find(|e| (e.payoff1 - u1).abs() < 1e-6 && (e.payoff2 - u2).abs() < 1e-6)
                .unwrap_or_else(|| panic!("missing NE with payoffs ({u1}, {u2}): {ne:?}"))
        };
        assert_eq!(find(1.0, 0.6).strategy1.as_pure(), Some(0));
        assert_eq!(find(0.6, 1.0).strategy2.as_pure(), Some(1));
        let mixed = find(0.375, 0.375);
        assert!(close(mixed.strategy1.probs(), &[0.625, 0.375]));
        assert!(close(mixed.strategy2.probs(), &[0.375, 0.625]));
    }

    #[test]
    fn coordpref_same_types_contains_pure_zero() {
        let ne = enumerate_nash(JointType::new(0, 0), &coord(), 1e-9).unwrap();
        assert!(ne.iter().any(|e| e.strategy1.as_pure() == Some(0)
            && e.strategy2.as_pure() == Some(0)
            && (e.payoff1 - 1.0).abs() < 1e-12
            && (e.payoff2 - 1.0).abs() < 1e-12));
    }

    #[test]
    fn pareto_filter() {
        let ne = enumerate_nash(JointType::new(0, 1), &coord(), 1e-9).unwrap();
        let pone = pareto_optimal_nash(&ne);
        assert_eq!(pone.len(), 2);
        assert!(pone.iter().all(|e| e.strategy1.as_pure().is_some()));
        assert_eq!(pareto_optimal_nash(&pone[..1]), pone[..1].to_vec());
        assert!(pareto_optimal_nash(&[]).is_empty());

        let mk = |u1, u2| EquilibriumProfile {
            strategy1: MixedStrategy::uniform(2),
            strategy2: MixedStrategy::uniform(2),
            payoff1: u1,
            payoff2: u2,
        };
        assert_eq!(pareto_optimal_nash(&[mk(0.5, 0.7), mk(0.7, 0.5)]).len(), 2);
        // Weak domination keeps both.
        assert_eq!(pareto_optimal_nash(&[mk(0.5, 0.7), mk(0.5, 0.9)]).len(), 2);
    }

    #[test]
    fn worst_pone_selection() {
        let pone = pone_set(JointType::new(0, 1), &coord()).unwrap();
        let w2 = worst_pone_for(Seat::Two, &pone).unwrap();
        assert_eq!(w2.strategy1.as_pure(), Some(0));
        assert!((w2.payoff2 - 0.6).abs() < 1e-12);
        let w1 = worst_pone_for(Seat::One, &pone).unwrap();
        assert_eq!(w1.strategy1.as_pure(), Some(1));
        assert!((w1.payoff1 - 0.6).abs() < 1e-12);
        assert_eq!(worst_pone_for(Seat::One, &pone[..1]), Some(&pone[0]));
        assert!(worst_pone_for(Seat::One, &[]).is_none());
    }

    #[test]
    fn utilitarian_tie_prefers_low_actions() {
        let pone = pone_set(JointType::new(0, 1), &coord()).unwrap();
        let sel = utilitarian_pone(&pone).unwrap();
        assert_eq!(sel.strategy1.as_pure(), Some(0));
        assert_eq!(sel.strategy2.as_pure(), Some(0));
    }

    #[test]
    fn cce_examples() {
        let mp = make_matching_pennies_game(1).unwrap();
        let u = MixedStrategy::uniform(2);
        let z = JointDistribution::product(&u, &u).unwrap();
        let (ok, v) = is_cce(&z, JointType::new(0, 1), &mp, 1e-9).unwrap();
        assert!(ok && v <= 1e-12);

        let g = coord();
        let z = JointDistribution::new(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let (ok, v) = is_cce(&z, JointType::new(0, 1), &g, 1e-9).unwrap();
        // Payoff 0.8 each; best deviations pay 0.5.
        assert!(ok);
        assert!((v - (0.5 - 0.8)).abs() < 1e-12);

        let z = JointDistribution::point(2, 0, 1);
        let (ok, v) = is_cce(&z, JointType::new(0, 0), &g, 1e-9).unwrap();
        assert!(!ok);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_guard() {
        let g = make_coordpref_game(6, 0.5, 1).unwrap();
        assert!(matches!(
            enumerate_nash(JointType::new(0, 1), &g, 1e-9),
            Err(Error::UnsupportedSize(_))
        ));
    }

    #[test]
    fn nash_products_are_cce() {
        let g = make_coordpref_game(3, 0.5, 1).unwrap();
        for jt in g.joint_types() {
            for e in enumerate_nash(jt, &g, 1e-9).unwrap() {
                let z = JointDistribution::product(&e.strategy1, &e.strategy2).unwrap();
                assert!(is_cce(&z, jt, &g, 1e-9).unwrap().0, "{jt}: {e:?}");
            }
        }
    }
}
