//! Randomized dual-problem instances for the certificate suites.

use rand::Rng;

use crate::dice::{DiceConfig, DiceProblem};
use crate::error::Result;
use crate::mdp::{OccupancyMeasure, TabularMdp};
use crate::rng::derive_rng;
use crate::types::{PseudoReward, SaTable};

/// Shape and coefficients of a randomized instance.
#[derive(Debug, Clone, Copy)]
pub struct InstanceParams {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub alpha: f64,
}

impl InstanceParams {
    pub fn describe(&self, seed: u64) -> String {
        format!(
            "seed={seed} states={} actions={} gamma={} alpha={}",
            self.n_states, self.n_actions, self.gamma, self.alpha
        )
    }
}

/// A random dense MDP, a strictly positive random data occupancy, and a
/// random pseudo reward in [-2, 2]. Deterministic in the seed.
pub fn random_instance(seed: u64, params: InstanceParams) -> Result<DiceProblem> {
    let InstanceParams {
        n_states,
        n_actions,
        gamma,
        alpha,
    } = params;
    let mut rng = derive_rng(seed, "theory", "instance", 0);
    let mut simplex = |n: usize| -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).map(|_| -f64::ln(1.0 - rng.gen::<f64>())).collect();
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= total);
        v
    };
    let mut transitions = vec![vec![Vec::new(); n_actions]; n_states];
    for s in 0..n_states {
        for a in 0..n_actions {
            transitions[s][a] = simplex(n_states);
        }
    }
    let mu = simplex(n_states);
    let data = simplex(n_states * n_actions);
    let mdp = TabularMdp::new(n_states, n_actions, transitions, mu, gamma, None)?;
    let data_occ = OccupancyMeasure::new(n_states, n_actions, data)?;
    let reward_values: Vec<f64> = (0..n_states * n_actions)
        .map(|_| rng.gen::<f64>() * 4.0 - 2.0)
        .collect();
    let reward = PseudoReward::new(SaTable::full(n_states, n_actions, reward_values)?);
    let cfg = DiceConfig::new(alpha, gamma, None, 100)?;
    DiceProblem::new(reward, mdp.initial_dist().to_vec(), data_occ, mdp, cfg)
}
