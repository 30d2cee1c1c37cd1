//! Learning discrete cross-domain maps by minimizing Bellman inconsistency
//! of the mapped source pseudo Q-function over target transitions.

use crate::dataset::Dataset;
use crate::dice::DiceConfig;
use crate::error::{CoreError, Result};
use crate::mdp::{OccupancyMeasure, Policy, TabularMdp};
use crate::types::{PseudoReward, PseudoValue, SaTable};

use super::MappingPair;

/// Pseudo Q-function Q(s,a) = r(s,a) + gamma * E_{s'~P}[nu(s')], on the
/// reward's support. Note Q = A_nu + nu(s), an identity tests lean on.
pub fn q_from_nu(
    nu: &PseudoValue,
    reward: &PseudoReward,
    mdp: &TabularMdp,
    cfg: &DiceConfig,
) -> Result<SaTable> {
    let table = reward.table();
    if nu.len() != mdp.n_states()
        || table.n_states() != mdp.n_states()
        || table.n_actions() != mdp.n_actions()
    {
        return Err(CoreError::DimensionMismatch(
            "pseudo Q inputs do not match the MDP".into(),
        ));
    }
    let gamma = cfg.gamma;
    let mut values = vec![0.0; mdp.n_states() * mdp.n_actions()];
    for (s, a, r) in table.iter_supported() {
        let expected: f64 = mdp
            .transition_row(s, a)
            .iter()
            .zip(nu.values())
            .map(|(p, v)| p * v)
            .sum();
        values[crate::types::sa_index(s, a, mdp.n_actions())] = r + gamma * expected;
    }
    SaTable::with_support(
        mdp.n_states(),
        mdp.n_actions(),
        values,
        table.support().to_vec(),
    )
}

/// Mean absolute Bellman residual of the mapped pseudo Q over the dataset:
/// E_D | r_tar(s,a) + gamma * E_{a'~pi(s')} Q(G(s'), H(s',a')) - Q(G(s), H(s,a)) |.
/// The inner expectation over a' is an exact sum.
pub fn map_loss(
    map: &MappingPair,
    reward_tar: &PseudoReward,
    q_src: &SaTable,
    policy: &Policy,
    dataset: &Dataset,
    gamma: f64,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(CoreError::EmptyDataset("mapping loss input".into()));
    }
    let mut total = 0.0;
    for rec in dataset.records() {
        let s = rec.state as usize;
        let a = rec.action as usize;
        let s_next = rec.next_state as usize;
        let r = reward_tar.table().require(s, a)?;
        let (gs, ga) = map.map_pair(s, a);
        let q_here = q_src.require(gs, ga)?;
        let mut boot = 0.0;
        if gamma != 0.0 {
            for a_next in 0..policy.n_actions() {
                let p = policy.prob(s_next, a_next);
                if p > 0.0 {
                    let (gs2, ga2) = map.map_pair(s_next, a_next);
                    boot += p * q_src.require(gs2, ga2)?;
                }
            }
        }
        total += (r + gamma * boot - q_here).abs();
    }
    Ok(total / dataset.len() as f64)
}

/// Outcome of a mapping optimization, including which coordinates the data
/// never constrained.
#[derive(Debug, Clone)]
pub struct MappingFit {
    pub mapping: MappingPair,
    pub loss: f64,
    pub sweeps: usize,
    pub unconstrained_states: Vec<usize>,
    pub unconstrained_pairs: Vec<(usize, usize)>,
}

/// Which coordinates the loss actually reads: G at every state occurring
/// in the data, H at every dataset pair plus every (next-state, action)
/// the policy expectation touches.
fn constrained_coords(
    dataset: &Dataset,
    policy: &Policy,
    n_states: usize,
    n_actions: usize,
    gamma: f64,
) -> (Vec<bool>, Vec<Vec<bool>>) {
    let mut g = vec![false; n_states];
    let mut h = vec![vec![false; n_actions]; n_states];
    for rec in dataset.records() {
        let s = rec.state as usize;
        let s_next = rec.next_state as usize;
        g[s] = true;
        h[s][rec.action as usize] = true;
        if gamma != 0.0 {
            g[s_next] = true;
            for a_next in 0..n_actions {
                if policy.prob(s_next, a_next) > 0.0 {
                    h[s_next][a_next] = true;
                }
            }
        }
    }
    (g, h)
}

/// Coordinate descent over G then H, repeated until a full sweep changes
/// nothing or the budget is exhausted. Ties break toward the lowest source
/// index; the loss never increases. Coordinates the data never constrains
/// are skipped and finally assigned to the most-visited source state or
/// action (when `src_occ` is given), recorded in the fit.
#[allow(clippy::too_many_arguments)]
pub fn optimize_mappings(
    init: &MappingPair,
    reward_tar: &PseudoReward,
    q_src: &SaTable,
    policy: &Policy,
    dataset: &Dataset,
    gamma: f64,
    budget: usize,
    src_occ: Option<&OccupancyMeasure>,
) -> Result<MappingFit> {
    let n_states = init.n_tar_states();
    let n_actions = init.n_tar_actions();
    let (g_mask, h_mask) = constrained_coords(dataset, policy, n_states, n_actions, gamma);
    let unconstrained_states: Vec<usize> =
        (0..n_states).filter(|&s| !g_mask[s]).collect();
    let unconstrained_pairs: Vec<(usize, usize)> = (0..n_states)
        .flat_map(|s| (0..n_actions).map(move |a| (s, a)))
        .filter(|&(s, a)| !h_mask[s][a])
        .collect();

    let mut mapping = init.clone();
    if budget == 0 {
        let loss = map_loss(&mapping, reward_tar, q_src, policy, dataset, gamma)?;
        return Ok(MappingFit {
            mapping,
            loss,
            sweeps: 0,
            unconstrained_states,
            unconstrained_pairs,
        });
    }

    let mut loss = map_loss(&mapping, reward_tar, q_src, policy, dataset, gamma)?;
    let mut sweeps = 0usize;
    while sweeps < budget {
        let mut changed = false;
        for s in (0..n_states).filter(|&s| g_mask[s]) {
            let current = mapping.map_state(s);
            let mut best = (current, loss);
            for candidate in 0..mapping.src_states() {
                if candidate == current {
                    continue;
                }
                mapping.set_state(s, candidate);
                let l = map_loss(&mapping, reward_tar, q_src, policy, dataset, gamma)?;
                if l < best.1 || (l == best.1 && candidate < best.0) {
                    best = (candidate, l);
                }
            }
            mapping.set_state(s, best.0);
            if best.0 != current {
                changed = true;
            }
            loss = best.1;
        }
        for s in 0..n_states {
            for a in (0..n_actions).filter(|&a| h_mask[s][a]) {
                let current = mapping.map_action(s, a);
                let mut best = (current, loss);
                for candidate in 0..mapping.src_actions() {
                    if candidate == current {
                        continue;
                    }
                    mapping.set_action(s, a, candidate);
                    let l = map_loss(&mapping, reward_tar, q_src, policy, dataset, gamma)?;
                    if l < best.1 || (l == best.1 && candidate < best.0) {
                        best = (candidate, l);
                    }
                }
                mapping.set_action(s, a, best.0);
                if best.0 != current {
                    changed = true;
                }
                loss = best.1;
            }
        }
        sweeps += 1;
        if !changed {
            break;
        }
    }

    if let Some(occ) = src_occ {
        apply_defaults(&mut mapping, occ, &unconstrained_states, &unconstrained_pairs);
        loss = map_loss(&mapping, reward_tar, q_src, policy, dataset, gamma)?;
    }
    Ok(MappingFit {
        mapping,
        loss,
        sweeps,
        unconstrained_states,
        unconstrained_pairs,
    })
}

/// Unconstrained coordinates default to the most-visited source state and
/// the most-visited source action under the source data occupancy.
fn apply_defaults(
    mapping: &mut MappingPair,
    src_occ: &OccupancyMeasure,
    states: &[usize],
    pairs: &[(usize, usize)],
) {
    let marginal = src_occ.state_marginal();
    let top_state = argmax(&marginal);
    let mut action_mass = vec![0.0; src_occ.n_actions()];
    for s in 0..src_occ.n_states() {
        for a in 0..src_occ.n_actions() {
            action_mass[a] += src_occ.get(s, a);
        }
    }
    let top_action = argmax(&action_mass);
    for &s in states {
        mapping.set_state(s, top_state);
    }
    for &(s, a) in pairs {
        mapping.set_action(s, a, top_action);
    }
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// Runs coordinate descent from `init` plus `restarts` random starting
/// points, returning the best fit (first winner on ties).
#[allow(clippy::too_many_arguments)]
pub fn optimize_mappings_restarts(
    init: &MappingPair,
    reward_tar: &PseudoReward,
    q_src: &SaTable,
    policy: &Policy,
    dataset: &Dataset,
    gamma: f64,
    budget: usize,
    src_occ: Option<&OccupancyMeasure>,
    restarts: usize,
    rng: &mut impl rand::Rng,
) -> Result<MappingFit> {
    let mut best = optimize_mappings(
        init, reward_tar, q_src, policy, dataset, gamma, budget, src_occ,
    )?;
    for _ in 0..restarts {
        let start = MappingPair::random(
            init.n_tar_states(),
            init.n_tar_actions(),
            init.src_states(),
            init.src_actions(),
            rng,
        );
        let fit = optimize_mappings(
            &start, reward_tar, q_src, policy, dataset, gamma, budget, src_occ,
        )?;
        if fit.loss < best.loss {
            best = fit;
        }
    }
    Ok(best)
}

/// A permuted-isomorphic pair with exact pseudo-rewards, ready for
/// mapping-recovery checks: exact source training, exact target log
/// ratios, and a behavior dataset covering the target space.
#[derive(Debug, Clone)]
pub struct RecoveryInstance {
    pub src: TabularMdp,
    pub tar: TabularMdp,
    pub ground_truth: MappingPair,
    pub reward_tar: PseudoReward,
    pub q_src: SaTable,
    pub dataset: Dataset,
    pub gamma: f64,
}

/// Builds a chain-family permuted pair whose expert occupancy is softened
/// (bounded log ratios) and whose data occupancy is the uniform policy's
/// (full support), then solves the source dual exactly. A moderate
/// discount keeps reward alignment the dominant term of the mapping loss.
pub fn recovery_instance(
    seed: u64,
    n_states: usize,
    n_actions: usize,
    data_seed: u64,
) -> Result<RecoveryInstance> {
    let gamma = 0.2;
    let spec = crate::envs::PairSpec {
        family: crate::envs::Family::Random,
        n_states,
        n_actions,
        discrepancy: crate::envs::Discrepancy::Permutation { extra_actions: 0 },
        gamma,
        seed,
    };
    let (src, tar, gt) = crate::envs::make_pair(&spec)?;
    let gt = gt.expect("permutation records ground truth");
    let cfg = DiceConfig::new(0.05, gamma, None, 1)?;

    let exact_parts = |mdp: &TabularMdp| -> Result<(crate::mdp::OccupancyMeasure, crate::mdp::OccupancyMeasure)> {
        let expert = crate::mdp::expert_policy(mdp)?.soften(0.1)?;
        let behavior = Policy::uniform(mdp.n_states(), mdp.n_actions());
        Ok((
            crate::mdp::occupancy_measure(mdp, &expert)?,
            crate::mdp::occupancy_measure(mdp, &behavior)?,
        ))
    };

    let (d_e_src, d_u_src) = exact_parts(&src)?;
    let src_problem = crate::dice::DiceProblem::exact(&d_e_src, d_u_src, src.clone(), cfg)?;
    let (nu_src, _) = src_problem.optimize_until(
        &PseudoValue::zeros(src.n_states()),
        500_000,
        1e-12,
    )?;
    let q_src = q_from_nu(&nu_src, src_problem.reward(), &src, &cfg)?;

    let (d_e_tar, d_u_tar) = exact_parts(&tar)?;
    let reward_tar = crate::dice::pseudo_reward_exact(&d_e_tar, &d_u_tar)?;

    let dataset = crate::dataset::sample_trajectories(
        &tar,
        &Policy::uniform(tar.n_states(), tar.n_actions()),
        40,
        15,
        data_seed,
        false,
        crate::dataset::DatasetMeta {
            mdp_id: "tar".into(),
            policy: "uniform".into(),
            seed: data_seed,
        },
    )?;
    Ok(RecoveryInstance {
        src,
        tar,
        ground_truth: gt,
        reward_tar,
        q_src,
        dataset,
        gamma,
    })
}

/// Joint exhaustive search over every data-constrained coordinate, with
/// the remaining coordinates frozen at the template's values. Errors if
/// the assignment count exceeds `cap`. Ties resolve to the
/// lexicographically smallest assignment.
pub fn exhaustive_mappings(
    template: &MappingPair,
    reward_tar: &PseudoReward,
    q_src: &SaTable,
    policy: &Policy,
    dataset: &Dataset,
    gamma: f64,
    cap: usize,
) -> Result<MappingFit> {
    let n_states = template.n_tar_states();
    let n_actions = template.n_tar_actions();
    let (g_mask, h_mask) = constrained_coords(dataset, policy, n_states, n_actions, gamma);
    let g_coords: Vec<usize> = (0..n_states).filter(|&s| g_mask[s]).collect();
    let h_coords: Vec<(usize, usize)> = (0..n_states)
        .flat_map(|s| (0..n_actions).map(move |a| (s, a)))
        .filter(|&(s, a)| h_mask[s][a])
        .collect();

    let mut combos: u128 = 1;
    for _ in &g_coords {
        combos = combos.saturating_mul(template.src_states() as u128);
    }
    for _ in &h_coords {
        combos = combos.saturating_mul(template.src_actions() as u128);
    }
    if combos > cap as u128 {
        return Err(CoreError::InvalidArgument(format!(
            "exhaustive search needs {combos} assignments, cap is {cap}"
        )));
    }

    let radix: Vec<usize> = g_coords
        .iter()
        .map(|_| template.src_states())
        .chain(h_coords.iter().map(|_| template.src_actions()))
        .collect();
    let mut digits = vec![0usize; radix.len()];
    let mut mapping = template.clone();
    let mut best: Option<(MappingPair, f64)> = None;
    loop {
        for (i, &s) in g_coords.iter().enumerate() {
            mapping.set_state(s, digits[i]);
        }
        for (i, &(s, a)) in h_coords.iter().enumerate() {
            mapping.set_action(s, a, digits[g_coords.len() + i]);
        }
        let loss = map_loss(&mapping, reward_tar, q_src, policy, dataset, gamma)?;
        if best.as_ref().map_or(true, |(_, b)| loss < *b) {
            best = Some((mapping.clone(), loss));
        }
        // Odometer increment, most significant digit first so assignments
        // enumerate in lexicographic order.
        let mut pos = radix.len();
        loop {
            if pos == 0 {
                let (mapping, loss) = best.expect("at least one assignment evaluated");
                return Ok(MappingFit {
                    mapping,
                    loss,
                    sweeps: 0,
                    unconstrained_states: (0..n_states).filter(|&s| !g_mask[s]).collect(),
                    unconstrained_pairs: (0..n_states)
                        .flat_map(|s| (0..n_actions).map(move |a| (s, a)))
                        .filter(|&(s, a)| !h_mask[s][a])
                        .collect(),
                });
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < radix[pos] {
                break;
            }
            digits[pos] = 0;
        }
    }
}
