//! Finite-MDP machinery: validated model and policy types, exact occupancy
//! measures via the Bellman-flow linear system, value iteration for expert
//! synthesis, and advantage evaluation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::types::{sa_index, PseudoReward, PseudoValue, SaTable};

/// Tolerance for probability rows and initial distributions.
pub const PROB_TOL: f64 = 1e-12;
/// Tolerance on the total mass of an occupancy measure.
pub const MASS_TOL: f64 = 1e-9;
/// Tolerance on the Bellman-flow residual of an exact occupancy solve.
pub const FLOW_TOL: f64 = 1e-8;
/// Value iteration stops once the sup-norm Bellman residual is below this.
pub const VALUE_ITERATION_TOL: f64 = 1e-10;

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    let mut sum = 0.0;
    for &v in p {
        if !v.is_finite() || v < 0.0 {
            return Err(CoreError::InvalidDistribution(format!(
                "{what} has entry {v}"
            )));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(CoreError::InvalidDistribution(format!(
            "{what} sums to {sum}"
        )));
    }
    Ok(())
}

/// A finite MDP with dense transition tensor `P[s][a][s']`.
///
/// The optional reward table is used only to synthesize ground-truth expert
/// policies and to evaluate returns; the imitation algorithms never read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMdp")]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<Vec<Vec<f64>>>,
    initial_dist: Vec<f64>,
    discount: f64,
    reward: Option<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
struct RawMdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<Vec<Vec<f64>>>,
    initial_dist: Vec<f64>,
    discount: f64,
    reward: Option<Vec<Vec<f64>>>,
}

impl TryFrom<RawMdp> for TabularMdp {
    type Error = CoreError;

    fn try_from(raw: RawMdp) -> Result<Self> {
        TabularMdp::new(
            raw.n_states,
            raw.n_actions,
            raw.transitions,
            raw.initial_dist,
            raw.discount,
            raw.reward,
        )
    }
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<Vec<Vec<f64>>>,
        initial_dist: Vec<f64>,
        discount: f64,
        reward: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(CoreError::InvalidArgument(
                "state and action spaces must be non-empty".into(),
            ));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(CoreError::InvalidArgument(format!(
                "discount must lie in [0, 1), got {discount}"
            )));
        }
        if transitions.len() != n_states {
            return Err(CoreError::DimensionMismatch(format!(
                "transition tensor has {} states, expected {n_states}",
                transitions.len()
            )));
        }
        for (s, per_action) in transitions.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(CoreError::DimensionMismatch(format!(
                    "state {s} has {} action rows, expected {n_actions}",
                    per_action.len()
                )));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != n_states {
                    return Err(CoreError::DimensionMismatch(format!(
                        "row P[{s}][{a}] has length {}, expected {n_states}",
                        row.len()
                    )));
                }
                check_distribution(row, &format!("P[{s}][{a}]"))?;
            }
        }
        if initial_dist.len() != n_states {
            return Err(CoreError::DimensionMismatch(format!(
                "initial distribution has {} entries, expected {n_states}",
                initial_dist.len()
            )));
        }
        check_distribution(&initial_dist, "initial distribution")?;
        if let Some(r) = &reward {
            if r.len() != n_states || r.iter().any(|row| row.len() != n_actions) {
                return Err(CoreError::DimensionMismatch(
                    "reward table shape does not match the MDP".into(),
                ));
            }
            if r.iter().flatten().any(|v| !v.is_finite()) {
                return Err(CoreError::InvalidArgument(
                    "reward table contains non-finite entries".into(),
                ));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            initial_dist,
            discount,
            reward,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn transition_row(&self, state: usize, action: usize) -> &[f64] {
        &self.transitions[state][action]
    }

    pub fn transitions(&self) -> &Vec<Vec<Vec<f64>>> {
        &self.transitions
    }

    pub fn reward(&self) -> Option<&Vec<Vec<f64>>> {
        self.reward.as_ref()
    }

    pub fn reward_at(&self, state: usize, action: usize) -> Option<f64> {
        self.reward.as_ref().map(|r| r[state][action])
    }
}

/// A stationary stochastic policy, one action distribution per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolicy")]
pub struct Policy {
    probs: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawPolicy {
    probs: Vec<Vec<f64>>,
}

impl TryFrom<RawPolicy> for Policy {
    type Error = CoreError;

    fn try_from(raw: RawPolicy) -> Result<Self> {
        Policy::new(raw.probs)
    }
}

impl Policy {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.is_empty() {
            return Err(CoreError::InvalidArgument("policy has no states".into()));
        }
        let n_actions = probs[0].len();
        for (s, row) in probs.iter().enumerate() {
            if row.len() != n_actions {
                return Err(CoreError::DimensionMismatch(format!(
                    "policy row {s} has length {}, expected {n_actions}",
                    row.len()
                )));
            }
            check_distribution(row, &format!("policy row {s}"))?;
        }
        Ok(Self { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            probs: vec![vec![1.0 / n_actions as f64; n_actions]; n_states],
        }
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let mut probs = vec![vec![0.0; n_actions]; actions.len()];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(CoreError::InvalidArgument(format!(
                    "action {a} out of bounds at state {s}"
                )));
            }
            probs[s][a] = 1.0;
        }
        Ok(Self { probs })
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn n_actions(&self) -> usize {
        self.probs[0].len()
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state][action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state]
    }

    /// Mixes with the uniform policy: (1 - eps) * pi + eps * uniform.
    pub fn soften(&self, eps: f64) -> Result<Policy> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(CoreError::InvalidArgument(format!(
                "softening factor must lie in [0, 1], got {eps}"
            )));
        }
        let u = eps / self.n_actions() as f64;
        Policy::new(
            self.probs
                .iter()
                .map(|row| row.iter().map(|p| (1.0 - eps) * p + u).collect())
                .collect(),
        )
    }

    /// Greedy action per state, lowest index on ties.
    pub fn greedy_actions(&self) -> Vec<usize> {
        self.probs
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                        if v > bv {
                            (i, v)
                        } else {
                            (bi, bv)
                        }
                    })
                    .0
            })
            .collect()
    }

    /// Average total-variation distance to `other` over the given states.
    pub fn tv_distance_on(&self, other: &Policy, states: &[usize]) -> f64 {
        if states.is_empty() {
            return 0.0;
        }
        let total: f64 = states
            .iter()
            .map(|&s| {
                0.5 * self.probs[s]
                    .iter()
                    .zip(&other.probs[s])
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
            })
            .sum();
        total / states.len() as f64
    }
}

/// A discounted state-action visitation distribution, total mass one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMeasure {
    n_states: usize,
    n_actions: usize,
    d: Vec<f64>,
}

impl OccupancyMeasure {
    pub fn new(n_states: usize, n_actions: usize, d: Vec<f64>) -> Result<Self> {
        if d.len() != n_states * n_actions {
            return Err(CoreError::DimensionMismatch(format!(
                "occupancy vector has {} entries, expected {}",
                d.len(),
                n_states * n_actions
            )));
        }
        let mut mass = 0.0;
        for &v in &d {
            if !v.is_finite() || v < 0.0 {
                return Err(CoreError::InvalidDistribution(format!(
                    "occupancy entry {v}"
                )));
            }
            mass += v;
        }
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(CoreError::InvalidDistribution(format!(
                "occupancy mass {mass}"
            )));
        }
        Ok(Self {
            n_states,
            n_actions,
            d,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.d
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.d[sa_index(state, action, self.n_actions)]
    }

    pub fn state_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states];
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                out[s] += self.get(s, a);
            }
        }
        out
    }

    /// Mask of strictly positive entries.
    pub fn support_mask(&self) -> Vec<bool> {
        self.d.iter().map(|&v| v > 0.0).collect()
    }

    /// States carrying strictly positive mass.
    pub fn visited_states(&self) -> Vec<usize> {
        self.state_marginal()
            .iter()
            .enumerate()
            .filter_map(|(s, &m)| (m > 0.0).then_some(s))
            .collect()
    }

    /// Max violation of the Bellman-flow equations under `mdp`.
    pub fn flow_residual(&self, mdp: &TabularMdp) -> f64 {
        let gamma = mdp.discount();
        let mut worst: f64 = 0.0;
        for s_next in 0..self.n_states {
            let lhs: f64 = (0..self.n_actions).map(|a| self.get(s_next, a)).sum();
            let mut inflow = 0.0;
            for s in 0..self.n_states {
                for a in 0..self.n_actions {
                    inflow += mdp.transition_row(s, a)[s_next] * self.get(s, a);
                }
            }
            let rhs = (1.0 - gamma) * mdp.initial_dist()[s_next] + gamma * inflow;
            worst = worst.max((lhs - rhs).abs());
        }
        worst
    }

    /// Total-variation distance to another occupancy over the same space.
    pub fn tv_distance(&self, other: &OccupancyMeasure) -> f64 {
        0.5 * self
            .d
            .iter()
            .zip(&other.d)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// View as a fully-supported table.
    pub fn as_table(&self) -> SaTable {
        SaTable::full(self.n_states, self.n_actions, self.d.clone())
            .expect("occupancy entries are finite")
    }
}

fn state_transition_matrix(mdp: &TabularMdp, policy: &Policy) -> DMatrix<f64> {
    let n = mdp.n_states();
    // M[s][s'] = sum_a pi(a|s) P(s'|s,a)
    DMatrix::from_fn(n, n, |s, s_next| {
        (0..mdp.n_actions())
            .map(|a| policy.prob(s, a) * mdp.transition_row(s, a)[s_next])
            .sum()
    })
}

fn check_policy_dims(mdp: &TabularMdp, policy: &Policy) -> Result<()> {
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(CoreError::DimensionMismatch(format!(
            "policy is {}x{}, MDP is {}x{}",
            policy.n_states(),
            policy.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    Ok(())
}

/// Exact occupancy measure of `policy` in `mdp`.
///
/// Solves the Bellman-flow system over state marginals with a dense LU
/// factorization, then expands by the policy. Falls back to fixed-point
/// iteration if the direct solve fails to reach a 1e-12 residual.
pub fn occupancy_measure(mdp: &TabularMdp, policy: &Policy) -> Result<OccupancyMeasure> {
    check_policy_dims(mdp, policy)?;
    let n = mdp.n_states();
    let gamma = mdp.discount();
    let m = state_transition_matrix(mdp, policy);
    // (I - gamma * M^T) rho = (1 - gamma) mu
    let a = DMatrix::identity(n, n) - gamma * m.transpose();
    let b = DVector::from_fn(n, |s, _| (1.0 - gamma) * mdp.initial_dist()[s]);

    let direct = a.clone().lu().solve(&b).and_then(|rho| {
        let residual = (&a * &rho - &b).amax();
        (residual <= 1e-12).then_some(rho)
    });
    let rho = match direct {
        Some(rho) => rho,
        None => power_iteration_marginal(&m, mdp)?,
    };

    let mut d = vec![0.0; n * mdp.n_actions()];
    let mut mass = 0.0;
    for s in 0..n {
        let r = rho[s];
        if r < -1e-12 {
            return Err(CoreError::SolverFailure(format!(
                "negative state marginal {r} at state {s}"
            )));
        }
        let r = r.max(0.0);
        for a_idx in 0..mdp.n_actions() {
            let v = r * policy.prob(s, a_idx);
            d[sa_index(s, a_idx, mdp.n_actions())] = v;
            mass += v;
        }
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(CoreError::SolverFailure(format!(
            "occupancy mass {mass} after solve"
        )));
    }
    for v in &mut d {
        *v /= mass;
    }
    OccupancyMeasure::new(n, mdp.n_actions(), d)
}

fn power_iteration_marginal(m: &DMatrix<f64>, mdp: &TabularMdp) -> Result<DVector<f64>> {
    let n = mdp.n_states();
    let gamma = mdp.discount();
    let mt = m.transpose();
    let base = DVector::from_fn(n, |s, _| (1.0 - gamma) * mdp.initial_dist()[s]);
    let mut rho = base.clone();
    for _ in 0..10_000_000 {
        let next = &base + gamma * (&mt * &rho);
        let delta = (&next - &rho).amax();
        rho = next;
        if delta < 1e-14 {
            return Ok(rho);
        }
    }
    Err(CoreError::SolverFailure(
        "occupancy fixed-point iteration did not converge".into(),
    ))
}

/// Optimal state values and the greedy policy for `mdp.reward`.
///
/// Iterates the Bellman optimality operator until the sup-norm residual
/// drops below 1e-10; ties in the greedy extraction break toward the
/// lowest action index.
pub fn value_iteration(mdp: &TabularMdp) -> Result<(Vec<f64>, Policy)> {
    let reward = mdp.reward().ok_or(CoreError::MissingReward)?;
    let n = mdp.n_states();
    let gamma = mdp.discount();
    let mut values = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0usize;
    while residual > VALUE_ITERATION_TOL {
        let mut next = vec![f64::NEG_INFINITY; n];
        for s in 0..n {
            for a in 0..mdp.n_actions() {
                let q: f64 = reward[s][a]
                    + gamma
                        * mdp
                            .transition_row(s, a)
                            .iter()
                            .zip(&values)
                            .map(|(p, v)| p * v)
                            .sum::<f64>();
                if q > next[s] {
                    next[s] = q;
                }
            }
        }
        residual = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        iterations += 1;
        if iterations > 10_000_000 {
            return Err(CoreError::SolverFailure(
                "value iteration did not converge".into(),
            ));
        }
    }
    let mut actions = vec![0usize; n];
    for s in 0..n {
        let mut best = f64::NEG_INFINITY;
        for a in 0..mdp.n_actions() {
            let q: f64 = reward[s][a]
                + gamma
                    * mdp
                        .transition_row(s, a)
                        .iter()
                        .zip(&values)
                        .map(|(p, v)| p * v)
                        .sum::<f64>();
            if q > best {
                best = q;
                actions[s] = a;
            }
        }
    }
    let policy = Policy::deterministic(&actions, mdp.n_actions())?;
    Ok((values, policy))
}

/// Greedy optimal policy for the MDP's own reward table.
pub fn expert_policy(mdp: &TabularMdp) -> Result<Policy> {
    value_iteration(mdp).map(|(_, policy)| policy)
}

/// Advantage A(s, a) = r(s, a) + gamma * E_{s'}[nu(s')] - nu(s), evaluated
/// exactly over the transition tensor on the support of `reward`.
pub fn advantage(nu: &PseudoValue, reward: &PseudoReward, mdp: &TabularMdp) -> Result<SaTable> {
    let table = reward.table();
    if nu.len() != mdp.n_states()
        || table.n_states() != mdp.n_states()
        || table.n_actions() != mdp.n_actions()
    {
        return Err(CoreError::DimensionMismatch(format!(
            "advantage inputs: nu has {} states, reward is {}x{}, MDP is {}x{}",
            nu.len(),
            table.n_states(),
            table.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    let gamma = mdp.discount();
    let mut values = vec![0.0; mdp.n_states() * mdp.n_actions()];
    for (s, a, r) in table.iter_supported() {
        let expected: f64 = mdp
            .transition_row(s, a)
            .iter()
            .zip(nu.values())
            .map(|(p, v)| p * v)
            .sum();
        values[sa_index(s, a, mdp.n_actions())] = r + gamma * expected - nu.get(s);
    }
    SaTable::with_support(
        mdp.n_states(),
        mdp.n_actions(),
        values,
        table.support().to_vec(),
    )
}

/// Exact discounted return of an occupancy under the MDP's reward,
/// normalized as an infinite-horizon sum: <d, R> / (1 - gamma).
pub fn discounted_return(mdp: &TabularMdp, occupancy: &OccupancyMeasure) -> Result<f64> {
    let reward = mdp.reward().ok_or(CoreError::MissingReward)?;
    let mut total = 0.0;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            total += occupancy.get(s, a) * reward[s][a];
        }
    }
    Ok(total / (1.0 - mdp.discount()))
}
