//! Cross-domain transfer: discrete state/action mappings into a source
//! domain, hybrid density ratios, adaptive source/target weighting, and
//! the full training loop that combines them.

mod beta;
mod mapping;
mod run;

pub use beta::{beta_adaptive, beta_theoretical, moving_average_update, BetaMode, BetaState};
pub use mapping::{
    exhaustive_mappings, map_loss, optimize_mappings, optimize_mappings_restarts, q_from_nu,
    recovery_instance, MappingFit, RecoveryInstance,
};
pub use run::{
    adaptdice_run, ratio_errors, w_cross, weighted_mean_abs_diff, write_adapt_trace,
    AdaptDiceParams, AdaptDiceResult, IterRecord, PairSnapshot, TraceRow,
};

use serde::{Deserialize, Serialize};

use crate::dataset::{empirical_occupancy, DataFilter, Dataset, Weighting};
use crate::dice::{build_empirical_problem, DiceConfig, DiceProblem, DiscrimMethod};
use crate::error::{CoreError, Result};
use crate::mdp::{OccupancyMeasure, TabularMdp};
use crate::types::{DensityRatio, PseudoReward, PseudoValue, SaTable};

/// Discrete cross-domain maps: G sends target states to source states and
/// H sends (target state, target action) to source actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingPair {
    g: Vec<usize>,
    h: Vec<Vec<usize>>,
    src_states: usize,
    src_actions: usize,
}

impl MappingPair {
    pub fn new(
        g: Vec<usize>,
        h: Vec<Vec<usize>>,
        src_states: usize,
        src_actions: usize,
    ) -> Result<Self> {
        if g.len() != h.len() {
            return Err(CoreError::DimensionMismatch(format!(
                "G covers {} states, H covers {}",
                g.len(),
                h.len()
            )));
        }
        if let Some(&bad) = g.iter().find(|&&s| s >= src_states) {
            return Err(CoreError::InvalidArgument(format!(
                "G image {bad} outside the source state space"
            )));
        }
        let width = h.first().map_or(0, Vec::len);
        for row in &h {
            if row.len() != width {
                return Err(CoreError::DimensionMismatch(
                    "H rows differ in length".into(),
                ));
            }
            if let Some(&bad) = row.iter().find(|&&a| a >= src_actions) {
                return Err(CoreError::InvalidArgument(format!(
                    "H image {bad} outside the source action space"
                )));
            }
        }
        Ok(Self {
            g,
            h,
            src_states,
            src_actions,
        })
    }

    pub fn identity(n_states: usize, n_actions: usize) -> Self {
        Self {
            g: (0..n_states).collect(),
            h: vec![(0..n_actions).collect(); n_states],
            src_states: n_states,
            src_actions: n_actions,
        }
    }

    /// A uniformly random mapping, used as the loop's initial guess.
    pub fn random(
        tar_states: usize,
        tar_actions: usize,
        src_states: usize,
        src_actions: usize,
        rng: &mut impl rand::Rng,
    ) -> Self {
        let g = (0..tar_states).map(|_| rng.gen_range(0..src_states)).collect();
        let h = (0..tar_states)
            .map(|_| (0..tar_actions).map(|_| rng.gen_range(0..src_actions)).collect())
            .collect();
        Self {
            g,
            h,
            src_states,
            src_actions,
        }
    }

    pub fn n_tar_states(&self) -> usize {
        self.g.len()
    }

    pub fn n_tar_actions(&self) -> usize {
        self.h.first().map_or(0, Vec::len)
    }

    pub fn src_states(&self) -> usize {
        self.src_states
    }

    pub fn src_actions(&self) -> usize {
        self.src_actions
    }

    pub fn map_state(&self, tar_state: usize) -> usize {
        self.g[tar_state]
    }

    pub fn map_action(&self, tar_state: usize, tar_action: usize) -> usize {
        self.h[tar_state][tar_action]
    }

    /// (G(s), H(s, a)) in one call.
    pub fn map_pair(&self, tar_state: usize, tar_action: usize) -> (usize, usize) {
        (self.g[tar_state], self.h[tar_state][tar_action])
    }

    pub fn g(&self) -> &[usize] {
        &self.g
    }

    pub fn h(&self) -> &[Vec<usize>] {
        &self.h
    }

    pub(crate) fn set_state(&mut self, tar_state: usize, src_state: usize) {
        self.g[tar_state] = src_state;
    }

    pub(crate) fn set_action(&mut self, tar_state: usize, tar_action: usize, src_action: usize) {
        self.h[tar_state][tar_action] = src_action;
    }

    /// Pulls a source-side table back through (G, H):
    /// out(s, a) = table(G(s), H(s, a)).
    pub fn pullback(&self, table: &SaTable) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_tar_states() * self.n_tar_actions()];
        for s in 0..self.n_tar_states() {
            for a in 0..self.n_tar_actions() {
                let (gs, ga) = self.map_pair(s, a);
                out[s * self.n_tar_actions() + a] = table.require(gs, ga)?;
            }
        }
        Ok(out)
    }
}

/// Source-domain artifacts produced by pretraining and consumed by the
/// cross-domain loop: the pseudo value, full-space pseudo reward and
/// density ratio, the pseudo Q-function, and the data occupancy used for
/// default assignments of unconstrained mapping coordinates.
///
/// The reward (and hence Q and w) is extended off the source data support
/// via the clipped discriminator, giving unvisited source pairs a strongly
/// negative reward and a near-zero ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceArtifacts {
    pub nu: PseudoValue,
    pub reward: PseudoReward,
    pub ratio: DensityRatio,
    pub q: SaTable,
    pub mdp: TabularMdp,
    pub data_occ: OccupancyMeasure,
}

impl SourceArtifacts {
    /// Pretrains on a flagged source dataset (expert subset vs. the whole
    /// mixture) and assembles full-space transfer surfaces.
    pub fn pretrain(
        data_src: &Dataset,
        mdp: &TabularMdp,
        cfg: DiceConfig,
        weighting: Weighting,
    ) -> Result<Self> {
        let expert = data_src.expert_subset()?;
        let (problem, discriminator) = build_empirical_problem(
            &expert,
            data_src,
            mdp,
            cfg,
            weighting,
            DiscrimMethod::CountBased,
        )?;
        let trace = problem.optimize_nu(&PseudoValue::zeros(mdp.n_states()), cfg.iterations)?;
        let nu = trace.final_nu().clone();
        Self::from_parts(nu, discriminator.pseudo_reward_unmasked(), &problem, weighting, data_src)
    }

    fn from_parts(
        nu: PseudoValue,
        reward_full: PseudoReward,
        problem: &DiceProblem,
        weighting: Weighting,
        data_src: &Dataset,
    ) -> Result<Self> {
        let mdp = problem.mdp().clone();
        let full_problem = DiceProblem::new(
            reward_full.clone(),
            problem.initial_dist().to_vec(),
            problem.data_occ().clone(),
            mdp.clone(),
            *problem.cfg(),
        )?;
        let ratio = full_problem.density_ratio(&nu)?;
        let q = q_from_nu(&nu, &reward_full, &mdp, problem.cfg())?;
        let data_occ = empirical_occupancy(data_src, &mdp, DataFilter::All, weighting)?;
        Ok(Self {
            nu,
            reward: reward_full,
            ratio,
            q,
            mdp,
            data_occ,
        })
    }

    /// Max violation of q(s,a) = r(s,a) + gamma * E_{s'}[nu(s')].
    pub fn q_identity_residual(&self) -> f64 {
        let gamma = self.mdp.discount();
        let mut worst: f64 = 0.0;
        for (s, a, q) in self.q.iter_supported() {
            let r = self.reward.table().get(s, a).unwrap();
            let expected: f64 = self
                .mdp
                .transition_row(s, a)
                .iter()
                .zip(self.nu.values())
                .map(|(p, v)| p * v)
                .sum();
            worst = worst.max((q - (r + gamma * expected)).abs());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mapping_bounds_are_validated() {
        assert!(MappingPair::new(vec![0, 2], vec![vec![0], vec![0]], 2, 1).is_err());
        assert!(MappingPair::new(vec![0, 1], vec![vec![0], vec![1]], 2, 1).is_err());
        let ok = MappingPair::new(vec![1, 0], vec![vec![0, 1], vec![1, 0]], 2, 2).unwrap();
        assert_eq!(ok.map_pair(0, 1), (1, 1));
        assert_eq!(ok.map_pair(1, 0), (0, 1));
    }

    #[test]
    fn identity_maps_to_self() {
        let id = MappingPair::identity(3, 2);
        for s in 0..3 {
            assert_eq!(id.map_state(s), s);
            for a in 0..2 {
                assert_eq!(id.map_action(s, a), a);
            }
        }
    }

    #[test]
    fn pullback_reads_through_the_maps() {
        let map = MappingPair::new(vec![1, 0], vec![vec![1, 0], vec![0, 1]], 2, 2).unwrap();
        let table = SaTable::full(2, 2, vec![10.0, 20.0, 30.0, 40.0]).unwrap();
        let pulled = map.pullback(&table).unwrap();
        // (0,0) -> (1,1)=40, (0,1) -> (1,0)=30, (1,0) -> (0,0)=10, (1,1) -> (0,1)=20
        assert_eq!(pulled, vec![40.0, 30.0, 10.0, 20.0]);
    }
}
