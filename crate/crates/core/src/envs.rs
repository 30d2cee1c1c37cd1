//! Synthetic source/target benchmark pairs with controlled discrepancy and
//! known ground-truth mappings, plus dataset builders that mirror the
//! expert/sub-optimal mixture regime at desk scale.

use serde::{Deserialize, Serialize};

use crate::crossdomain::MappingPair;
use crate::dataset::{sample_trajectories, Dataset, DatasetMeta};
use crate::error::{CoreError, Result};
use crate::mdp::{expert_policy, occupancy_measure, OccupancyMeasure, Policy, TabularMdp};
use crate::rng::{derive_rng, derive_seed};
use rand::seq::SliceRandom;
use rand::Rng;

/// Base environment family of a benchmark pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Chain,
    Gridworld,
    Random,
}

/// How the target domain is derived from the source domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discrepancy {
    /// Relabel states and actions; optionally append duplicated actions.
    /// Exactly isomorphic, ground truth recorded.
    Permutation { extra_actions: usize },
    /// Keep labels, append target actions duplicating existing ones.
    ActionAugmentation { extra: usize },
    /// Duplicate some states; incoming probability splits between copies.
    StateAugmentation { duplicates: usize },
    /// Mix uniform noise into the target transitions. No ground truth.
    DynamicsPerturbation { eps: f64 },
    /// Same dynamics, shifted reward. Identity ground truth.
    RewardShift { delta: f64 },
}

/// Specification of a source/target pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub family: Family,
    pub n_states: usize,
    pub n_actions: usize,
    pub discrepancy: Discrepancy,
    pub gamma: f64,
    pub seed: u64,
}

/// Dataset composition: flagged expert trajectories plus a sub-optimal
/// mixture of unflagged expert and random rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSpec {
    pub n_expert: usize,
    pub n_expert_in_mix: usize,
    pub n_random_in_mix: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl DataSpec {
    pub fn new(
        n_expert: usize,
        n_expert_in_mix: usize,
        n_random_in_mix: usize,
        horizon: usize,
        seed: u64,
    ) -> Self {
        Self {
            n_expert,
            n_expert_in_mix,
            n_random_in_mix,
            horizon,
            seed,
        }
    }

    /// Total sub-optimal trajectory count.
    pub fn n_suboptimal(&self) -> usize {
        self.n_expert_in_mix + self.n_random_in_mix
    }
}

/// A fully-materialized benchmark scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioBundle {
    pub label: String,
    pub seed: u64,
    pub src: TabularMdp,
    pub tar: TabularMdp,
    pub ground_truth: Option<MappingPair>,
    pub data_src: Dataset,
    pub expert_tar: Dataset,
    pub union_tar: Dataset,
    pub expert_policy_src: Policy,
    pub expert_policy_tar: Policy,
    pub occ_expert_src: OccupancyMeasure,
    pub occ_expert_tar: OccupancyMeasure,
}

/// Slip probability of the chain and gridworld families.
const SLIP: f64 = 0.1;

/// An n-state chain. Action 0 moves left, action 1 moves right, any extra
/// action stays put; every move slips (stays) with probability `slip`.
/// Reward 1 for any action taken at the right end; uniform start.
pub fn chain_mdp(n_states: usize, n_actions: usize, gamma: f64, slip: f64) -> Result<TabularMdp> {
    if n_states < 2 || n_actions < 2 {
        return Err(CoreError::InvalidArgument(
            "chain needs >= 2 states and >= 2 actions".into(),
        ));
    }
    let mut transitions = vec![vec![vec![0.0; n_states]; n_actions]; n_states];
    for s in 0..n_states {
        for a in 0..n_actions {
            let dest = match a {
                0 => s.saturating_sub(1),
                1 => (s + 1).min(n_states - 1),
                _ => s,
            };
            transitions[s][a][dest] += 1.0 - slip;
            transitions[s][a][s] += slip;
        }
    }
    let mut reward = vec![vec![0.0; n_actions]; n_states];
    reward[n_states - 1] = vec![1.0; n_actions];
    TabularMdp::new(
        n_states,
        n_actions,
        transitions,
        vec![1.0 / n_states as f64; n_states],
        gamma,
        Some(reward),
    )
}

/// A k x k gridworld with 4 actions (up, right, down, left), slip-in-place
/// noise, reward 1 at the far corner, uniform start.
pub fn gridworld_mdp(side: usize, gamma: f64, slip: f64) -> Result<TabularMdp> {
    if side < 2 {
        return Err(CoreError::InvalidArgument(
            "gridworld needs side >= 2".into(),
        ));
    }
    let n_states = side * side;
    let n_actions = 4;
    let mut transitions = vec![vec![vec![0.0; n_states]; n_actions]; n_states];
    for s in 0..n_states {
        let (row, col) = (s / side, s % side);
        for a in 0..n_actions {
            let (r2, c2) = match a {
                0 => (row.saturating_sub(1), col),
                1 => (row, (col + 1).min(side - 1)),
                2 => ((row + 1).min(side - 1), col),
                _ => (row, col.saturating_sub(1)),
            };
            let dest = r2 * side + c2;
            transitions[s][a][dest] += 1.0 - slip;
            transitions[s][a][s] += slip;
        }
    }
    let mut reward = vec![vec![0.0; n_actions]; n_states];
    reward[n_states - 1] = vec![1.0; n_actions];
    TabularMdp::new(
        n_states,
        n_actions,
        transitions,
        vec![1.0 / n_states as f64; n_states],
        gamma,
        Some(reward),
    )
}

/// A dense random MDP with Dirichlet-like rows and uniform(0,1) rewards.
pub fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> Result<TabularMdp> {
    let mut rng = derive_rng(seed, "envs", "random-mdp", 0);
    let mut sample_simplex = |n: usize| -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).map(|_| -f64::ln(1.0 - rng.gen::<f64>())).collect();
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    };
    let mut transitions = vec![vec![Vec::new(); n_actions]; n_states];
    for s in 0..n_states {
        for a in 0..n_actions {
            transitions[s][a] = sample_simplex(n_states);
        }
    }
    let mu = sample_simplex(n_states);
    let reward = (0..n_states)
        .map(|_| (0..n_actions).map(|_| rng.gen::<f64>()).collect())
        .collect();
    TabularMdp::new(n_states, n_actions, transitions, mu, gamma, Some(reward))
}

fn base_mdp(spec: &PairSpec) -> Result<TabularMdp> {
    match spec.family {
        Family::Chain => chain_mdp(spec.n_states, spec.n_actions, spec.gamma, SLIP),
        Family::Gridworld => {
            let side = (spec.n_states as f64).sqrt().round() as usize;
            if side * side != spec.n_states {
                return Err(CoreError::InvalidArgument(format!(
                    "gridworld needs a square state count, got {}",
                    spec.n_states
                )));
            }
            if spec.n_actions != 4 {
                return Err(CoreError::InvalidArgument(
                    "gridworld has exactly 4 actions".into(),
                ));
            }
            gridworld_mdp(side, spec.gamma, SLIP)
        }
        Family::Random => random_mdp(spec.n_states, spec.n_actions, spec.gamma, spec.seed),
    }
}

/// Builds a source/target pair per the spec. Ground truth is returned for
/// structure-preserving discrepancies (permutation, augmentation, reward
/// shift) and absent for dynamics perturbation.
pub fn make_pair(spec: &PairSpec) -> Result<(TabularMdp, TabularMdp, Option<MappingPair>)> {
    let src = base_mdp(spec)?;
    let n = src.n_states();
    let k = src.n_actions();
    let mut rng = derive_rng(spec.seed, "envs", "discrepancy", 0);
    match spec.discrepancy {
        Discrepancy::Permutation { extra_actions } => {
            // Target state j behaves like source state g[j]; target action b
            // at state j behaves like source action h[j][b].
            let mut g: Vec<usize> = (0..n).collect();
            g.shuffle(&mut rng);
            let mut h: Vec<Vec<usize>> = Vec::with_capacity(n);
            for _ in 0..n {
                let mut row: Vec<usize> = (0..k).collect();
                row.shuffle(&mut rng);
                for _ in 0..extra_actions {
                    let dup = rng.gen_range(0..k);
                    row.push(dup);
                }
                h.push(row);
            }
            let tar = pullback_mdp(&src, &g, &h, spec.gamma)?;
            let ground_truth = MappingPair::new(g, h, n, k)?;
            Ok((src, tar, Some(ground_truth)))
        }
        Discrepancy::ActionAugmentation { extra } => {
            let g: Vec<usize> = (0..n).collect();
            let mut h: Vec<Vec<usize>> = Vec::with_capacity(n);
            for _ in 0..n {
                let mut row: Vec<usize> = (0..k).collect();
                for _ in 0..extra {
                    row.push(rng.gen_range(0..k));
                }
                h.push(row);
            }
            let tar = pullback_mdp(&src, &g, &h, spec.gamma)?;
            let ground_truth = MappingPair::new(g, h, n, k)?;
            Ok((src, tar, Some(ground_truth)))
        }
        Discrepancy::StateAugmentation { duplicates } => {
            if duplicates == 0 {
                let tar = src.clone();
                let gt = MappingPair::identity(n, k);
                return Ok((src, tar, Some(gt)));
            }
            // Target states 0..n are the originals; each extra state copies
            // a random source state. Probability into a duplicated source
            // state splits evenly among its copies.
            let n_tar = n + duplicates;
            let mut g: Vec<usize> = (0..n).collect();
            for _ in 0..duplicates {
                g.push(rng.gen_range(0..n));
            }
            let mut copies = vec![0usize; n];
            for &gs in &g {
                copies[gs] += 1;
            }
            let mut transitions = vec![vec![vec![0.0; n_tar]; k]; n_tar];
            for j in 0..n_tar {
                for a in 0..k {
                    let src_row = src.transition_row(g[j], a);
                    for j2 in 0..n_tar {
                        transitions[j][a][j2] = src_row[g[j2]] / copies[g[j2]] as f64;
                    }
                }
            }
            let mu: Vec<f64> = (0..n_tar)
                .map(|j| src.initial_dist()[g[j]] / copies[g[j]] as f64)
                .collect();
            let reward = src.reward().map(|r| {
                (0..n_tar).map(|j| r[g[j]].clone()).collect::<Vec<_>>()
            });
            let tar = TabularMdp::new(n_tar, k, transitions, mu, spec.gamma, reward)?;
            let h = vec![(0..k).collect::<Vec<usize>>(); n_tar];
            let ground_truth = MappingPair::new(g, h, n, k)?;
            Ok((src, tar, Some(ground_truth)))
        }
        Discrepancy::DynamicsPerturbation { eps } => {
            if !(0.0..=1.0).contains(&eps) {
                return Err(CoreError::InvalidArgument(format!(
                    "perturbation strength must lie in [0, 1], got {eps}"
                )));
            }
            let uniform = 1.0 / n as f64;
            let transitions: Vec<Vec<Vec<f64>>> = (0..n)
                .map(|s| {
                    (0..k)
                        .map(|a| {
                            src.transition_row(s, a)
                                .iter()
                                .map(|p| (1.0 - eps) * p + eps * uniform)
                                .collect()
                        })
                        .collect()
                })
                .collect();
            let tar = TabularMdp::new(
                n,
                k,
                transitions,
                src.initial_dist().to_vec(),
                spec.gamma,
                src.reward().cloned(),
            )?;
            let ground_truth = (eps == 0.0).then(|| MappingPair::identity(n, k));
            Ok((src, tar, ground_truth))
        }
        Discrepancy::RewardShift { delta } => {
            let reward = src
                .reward()
                .map(|r| {
                    r.iter()
                        .map(|row| row.iter().map(|v| v + delta).collect())
                        .collect::<Vec<Vec<f64>>>()
                })
                .ok_or(CoreError::MissingReward)?;
            let tar = TabularMdp::new(
                n,
                k,
                src.transitions().clone(),
                src.initial_dist().to_vec(),
                spec.gamma,
                Some(reward),
            )?;
            Ok((src, tar, Some(MappingPair::identity(n, k))))
        }
    }
}

/// Builds a target MDP whose state j and action b behave exactly like
/// source state g[j] under source action h[j][b].
fn pullback_mdp(
    src: &TabularMdp,
    g: &[usize],
    h: &[Vec<usize>],
    gamma: f64,
) -> Result<TabularMdp> {
    let n = src.n_states();
    let k_tar = h[0].len();
    // Permutations only: g must be a bijection for state relabeling.
    let mut inverse = vec![usize::MAX; n];
    for (j, &gs) in g.iter().enumerate() {
        inverse[gs] = j;
    }
    if inverse.iter().any(|&v| v == usize::MAX) {
        return Err(CoreError::InvalidArgument(
            "state map must be a bijection for relabeling".into(),
        ));
    }
    let mut transitions = vec![vec![vec![0.0; n]; k_tar]; n];
    for j in 0..n {
        for b in 0..k_tar {
            let row = src.transition_row(g[j], h[j][b]);
            for j2 in 0..n {
                transitions[j][b][j2] = row[g[j2]];
            }
        }
    }
    let mu: Vec<f64> = (0..n).map(|j| src.initial_dist()[g[j]]).collect();
    let reward = src.reward().map(|r| {
        (0..n)
            .map(|j| (0..k_tar).map(|b| r[g[j]][h[j][b]]).collect())
            .collect::<Vec<Vec<f64>>>()
    });
    TabularMdp::new(n, k_tar, transitions, mu, gamma, reward)
}

/// Samples the three datasets of a scenario: the source mixture and the
/// target expert/union pair. Expert trajectories are flagged and included
/// in the union.
pub fn build_datasets(
    src: &TabularMdp,
    tar: &TabularMdp,
    spec_src: &DataSpec,
    spec_tar: &DataSpec,
) -> Result<(Dataset, Dataset, Dataset)> {
    let src_expert = expert_policy(src)?;
    let tar_expert = expert_policy(tar)?;
    let src_random = Policy::uniform(src.n_states(), src.n_actions());
    let tar_random = Policy::uniform(tar.n_states(), tar.n_actions());

    let meta = |id: &str, policy: &str, seed: u64| DatasetMeta {
        mdp_id: id.into(),
        policy: policy.into(),
        seed,
    };

    let s = spec_src.seed;
    let src_e = sample_trajectories(
        src,
        &src_expert,
        spec_src.n_expert,
        spec_src.horizon,
        derive_seed(s, "envs", "src-expert", 0),
        true,
        meta("src", "expert(vi)", s),
    )?;
    let src_me = sample_trajectories(
        src,
        &src_expert,
        spec_src.n_expert_in_mix,
        spec_src.horizon,
        derive_seed(s, "envs", "src-mix-expert", 0),
        false,
        meta("src", "expert(vi)", s),
    )?;
    let src_mr = sample_trajectories(
        src,
        &src_random,
        spec_src.n_random_in_mix,
        spec_src.horizon,
        derive_seed(s, "envs", "src-mix-random", 0),
        false,
        meta("src", "uniform", s),
    )?;
    let data_src = Dataset::concat(meta("src", "mixture", s), &[&src_e, &src_me, &src_mr])?;

    let t = spec_tar.seed;
    let tar_e = sample_trajectories(
        tar,
        &tar_expert,
        spec_tar.n_expert,
        spec_tar.horizon,
        derive_seed(t, "envs", "tar-expert", 0),
        true,
        meta("tar", "expert(vi)", t),
    )?;
    let tar_me = sample_trajectories(
        tar,
        &tar_expert,
        spec_tar.n_expert_in_mix,
        spec_tar.horizon,
        derive_seed(t, "envs", "tar-mix-expert", 0),
        false,
        meta("tar", "expert(vi)", t),
    )?;
    let tar_mr = sample_trajectories(
        tar,
        &tar_random,
        spec_tar.n_random_in_mix,
        spec_tar.horizon,
        derive_seed(t, "envs", "tar-mix-random", 0),
        false,
        meta("tar", "uniform", t),
    )?;
    let union_tar = Dataset::concat(meta("tar", "mixture", t), &[&tar_e, &tar_me, &tar_mr])?;
    let expert_tar = union_tar.expert_subset()?;
    Ok((data_src, expert_tar, union_tar))
}

/// Assembles a full scenario bundle from a pair spec and data specs.
pub fn make_scenario(
    label: &str,
    pair_spec: &PairSpec,
    spec_src: &DataSpec,
    spec_tar: &DataSpec,
) -> Result<ScenarioBundle> {
    let (src, tar, ground_truth) = make_pair(pair_spec)?;
    let (data_src, expert_tar, union_tar) = build_datasets(&src, &tar, spec_src, spec_tar)?;
    let expert_policy_src = expert_policy(&src)?;
    let expert_policy_tar = expert_policy(&tar)?;
    let occ_expert_src = occupancy_measure(&src, &expert_policy_src)?;
    let occ_expert_tar = occupancy_measure(&tar, &expert_policy_tar)?;
    Ok(ScenarioBundle {
        label: label.to_string(),
        seed: pair_spec.seed,
        src,
        tar,
        ground_truth,
        data_src,
        expert_tar,
        union_tar,
        expert_policy_src,
        expert_policy_tar,
        occ_expert_src,
        occ_expert_tar,
    })
}

/// The canonical transfer scenario: an 8-state chain source, a permuted
/// target with one duplicated extra action (2 -> 3), rich source data
/// (50 expert + 200 random rollouts) and scarce target data (1 expert
/// trajectory, union of 1 unlabeled expert + 30 random), horizon 50.
pub fn transfer_favorable_pair(seed: u64) -> Result<ScenarioBundle> {
    let pair_spec = PairSpec {
        family: Family::Chain,
        n_states: 8,
        n_actions: 2,
        discrepancy: Discrepancy::Permutation { extra_actions: 1 },
        gamma: 0.95,
        seed,
    };
    let spec_src = DataSpec::new(50, 0, 200, 50, derive_seed(seed, "envs", "src-data", 0));
    let spec_tar = DataSpec::new(1, 1, 30, 50, derive_seed(seed, "envs", "tar-data", 0));
    make_scenario("transfer_favorable", &pair_spec, &spec_src, &spec_tar)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(discrepancy: Discrepancy, seed: u64) -> PairSpec {
        PairSpec {
            family: Family::Chain,
            n_states: 4,
            n_actions: 2,
            discrepancy,
            gamma: 0.9,
            seed,
        }
    }

    #[test]
    fn zero_perturbation_preserves_the_source() {
        let (src, tar, gt) =
            make_pair(&spec(Discrepancy::DynamicsPerturbation { eps: 0.0 }, 1)).unwrap();
        assert_eq!(src.transitions(), tar.transitions());
        assert!(gt.is_some());
        let (_, tar2, gt2) =
            make_pair(&spec(Discrepancy::DynamicsPerturbation { eps: 0.3 }, 1)).unwrap();
        assert_ne!(src.transitions(), tar2.transitions());
        assert!(gt2.is_none());
    }

    #[test]
    fn permuted_chain_pulls_back_exactly() {
        let (src, tar, gt) =
            make_pair(&spec(Discrepancy::Permutation { extra_actions: 0 }, 7)).unwrap();
        let gt = gt.unwrap();
        for j in 0..4 {
            for b in 0..2 {
                let (gs, ga) = gt.map_pair(j, b);
                for j2 in 0..4 {
                    let got = tar.transition_row(j, b)[j2];
                    let want = src.transition_row(gs, ga)[gt.map_state(j2)];
                    assert_eq!(got, want, "transition mismatch at ({j},{b},{j2})");
                }
                assert_eq!(
                    tar.reward_at(j, b).unwrap(),
                    src.reward_at(gs, ga).unwrap()
                );
            }
        }
    }

    #[test]
    fn action_augmentation_duplicates_rows() {
        let (src, tar, gt) =
            make_pair(&spec(Discrepancy::ActionAugmentation { extra: 2 }, 3)).unwrap();
        let gt = gt.unwrap();
        assert_eq!(tar.n_actions(), 4);
        for j in 0..4 {
            for b in 0..4 {
                let (gs, ga) = gt.map_pair(j, b);
                assert_eq!(gs, j);
                assert_eq!(tar.transition_row(j, b), src.transition_row(j, ga));
            }
        }
    }

    #[test]
    fn state_augmentation_splits_mass_rowwise() {
        let (src, tar, gt) =
            make_pair(&spec(Discrepancy::StateAugmentation { duplicates: 2 }, 5)).unwrap();
        let gt = gt.unwrap();
        assert_eq!(tar.n_states(), 6);
        for j in 0..6 {
            for b in 0..2 {
                // Rowwise pullback: mass into the copies of s' sums to the
                // source probability of s'.
                let mut pulled = vec![0.0; 4];
                for j2 in 0..6 {
                    pulled[gt.map_state(j2)] += tar.transition_row(j, b)[j2];
                }
                for s2 in 0..4 {
                    let want = src.transition_row(gt.map_state(j), b)[s2];
                    assert!((pulled[s2] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pairs_are_deterministic_in_the_seed() {
        let s = spec(Discrepancy::Permutation { extra_actions: 1 }, 11);
        let (a_src, a_tar, a_gt) = make_pair(&s).unwrap();
        let (b_src, b_tar, b_gt) = make_pair(&s).unwrap();
        assert_eq!(a_src, b_src);
        assert_eq!(a_tar, b_tar);
        assert_eq!(a_gt, b_gt);
    }

    #[test]
    fn dataset_composition_matches_spec() {
        let (src, tar, _) =
            make_pair(&spec(Discrepancy::Permutation { extra_actions: 0 }, 13)).unwrap();
        let d_src = DataSpec::new(3, 2, 4, 5, 17);
        let d_tar = DataSpec::new(1, 1, 2, 5, 19);
        let (data_src, expert_tar, union_tar) =
            build_datasets(&src, &tar, &d_src, &d_tar).unwrap();
        assert_eq!(data_src.n_trajectories(), 9);
        assert_eq!(
            data_src.records().iter().filter(|r| r.is_expert).count(),
            3 * 5
        );
        assert_eq!(union_tar.n_trajectories(), 4);
        assert_eq!(expert_tar.n_trajectories(), 1);
        assert_eq!(expert_tar.len(), 5);
        // Expert records appear in the union with identical content.
        assert!(union_tar.records().iter().filter(|r| r.is_expert).eq(expert_tar.records().iter()));
    }

    #[test]
    fn zero_random_means_union_equals_expert() {
        let (src, tar, _) =
            make_pair(&spec(Discrepancy::Permutation { extra_actions: 0 }, 23)).unwrap();
        let d = DataSpec::new(2, 0, 0, 4, 29);
        let (_, expert_tar, union_tar) = build_datasets(&src, &tar, &d, &d).unwrap();
        assert_eq!(expert_tar, union_tar);
    }

    #[test]
    fn transfer_bundle_is_valid_and_sparse() {
        let bundle = transfer_favorable_pair(0).unwrap();
        assert_eq!(bundle.src.n_states(), 8);
        assert_eq!(bundle.tar.n_states(), 8);
        assert_eq!(bundle.src.n_actions(), 2);
        assert_eq!(bundle.tar.n_actions(), 3);
        assert_eq!(bundle.union_tar.n_trajectories(), 32);
        assert_eq!(bundle.expert_tar.n_trajectories(), 1);
        bundle.data_src.validate_bounds(&bundle.src).unwrap();
        bundle.union_tar.validate_bounds(&bundle.tar).unwrap();
        // One target expert trajectory cannot cover the full pair space.
        let covered = bundle.union_tar.distinct_pairs().len();
        assert!(covered <= bundle.tar.n_states() * bundle.tar.n_actions());
        let expert_covered = bundle.expert_tar.distinct_pairs().len();
        assert!(expert_covered < covered);
        // Determinism.
        let again = transfer_favorable_pair(0).unwrap();
        assert_eq!(bundle.union_tar, again.union_tar);
        assert_eq!(bundle.data_src, again.data_src);
    }

    #[test]
    fn gridworld_and_random_families_build() {
        let grid = PairSpec {
            family: Family::Gridworld,
            n_states: 9,
            n_actions: 4,
            discrepancy: Discrepancy::Permutation { extra_actions: 0 },
            gamma: 0.9,
            seed: 31,
        };
        let (src, tar, gt) = make_pair(&grid).unwrap();
        assert_eq!(src.n_states(), 9);
        assert_eq!(tar.n_states(), 9);
        assert!(gt.is_some());

        let rand_spec = PairSpec {
            family: Family::Random,
            n_states: 5,
            n_actions: 3,
            discrepancy: Discrepancy::DynamicsPerturbation { eps: 0.1 },
            gamma: 0.9,
            seed: 37,
        };
        let (src, tar, gt) = make_pair(&rand_spec).unwrap();
        assert_eq!(src.n_actions(), 3);
        assert!(gt.is_none());
        assert_ne!(src.transitions(), tar.transitions());
    }
}
