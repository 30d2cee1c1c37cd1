//! End-to-end single-domain training: discriminator, pseudo reward, dual
//! descent, density ratio, weighted behavior cloning.

use crate::dataset::{empirical_occupancy, DataFilter, Dataset, Weighting};
use crate::dice::{
    extract_policy_bc, fit_discriminator, DiceConfig, DiceProblem, DiscrimMethod, Discriminator,
    OptTrace,
};
use crate::error::Result;
use crate::mdp::{Policy, TabularMdp};
use crate::types::{DensityRatio, PseudoValue};

/// Everything a finished run produces, including the problem instance the
/// optimizer actually saw (useful for oracles and diagnostics).
#[derive(Debug, Clone)]
pub struct DemodiceOutput {
    pub nu: PseudoValue,
    pub ratio: DensityRatio,
    pub policy: Policy,
    pub trace: OptTrace,
    pub problem: DiceProblem,
    pub discriminator: Discriminator,
}

/// Assembles the empirical dual problem from datasets: discriminator
/// pseudo-reward, dataset-induced initial distribution (first state of
/// each trajectory), and the empirical data occupancy.
pub fn build_empirical_problem(
    expert: &Dataset,
    union: &Dataset,
    mdp: &TabularMdp,
    cfg: DiceConfig,
    weighting: Weighting,
    method: DiscrimMethod,
) -> Result<(DiceProblem, Discriminator)> {
    let discriminator = fit_discriminator(expert, union, mdp, method, weighting)?;
    let reward = discriminator.pseudo_reward();
    let initial_dist = union.initial_distribution(mdp.n_states())?;
    let data_occ = empirical_occupancy(union, mdp, DataFilter::All, weighting)?;
    let problem = DiceProblem::new(reward, initial_dist, data_occ, mdp.clone(), cfg)?;
    Ok((problem, discriminator))
}

/// Trains DemoDICE on an expert/union dataset pair: fits the discriminator,
/// runs `cfg.iterations` gradient steps from nu = 0, and extracts the
/// policy by density-ratio-weighted behavior cloning.
pub fn demodice_train(
    expert: &Dataset,
    union: &Dataset,
    mdp: &TabularMdp,
    cfg: DiceConfig,
    weighting: Weighting,
) -> Result<DemodiceOutput> {
    let (problem, discriminator) =
        build_empirical_problem(expert, union, mdp, cfg, weighting, DiscrimMethod::CountBased)?;
    let record_every = (cfg.iterations / 200).max(1);
    let trace = problem.optimize_nu(&PseudoValue::zeros(mdp.n_states()), record_every)?;
    let nu = trace.final_nu().clone();
    let ratio = problem.density_ratio(&nu)?;
    let policy = extract_policy_bc(&ratio, union, mdp, weighting)?;
    Ok(DemodiceOutput {
        nu,
        ratio,
        policy,
        trace,
        problem,
        discriminator,
    })
}
