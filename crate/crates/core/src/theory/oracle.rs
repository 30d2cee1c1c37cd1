//! Ground-truth optima for the dual problem, the projection onto the
//! optimal set, and empirical quadratic-growth estimation.
//!
//! The optimal set is the line {nu* + C 1}: the loss is shift invariant,
//! so nu* is only determined up to a constant while the density ratio at
//! the optimum is unique. The oracle runs long gradient descent from
//! several starts and insists their ratios agree.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dice::DiceProblem;
use crate::error::{CoreError, Result};
use crate::rng::derive_rng;
use crate::types::{DensityRatio, PseudoValue};

/// Iteration cap of the long descent.
pub const ORACLE_MAX_ITERS: usize = 1_000_000;
/// Gradient-norm stopping tolerance.
pub const ORACLE_GRAD_TOL: f64 = 1e-12;
/// Required elementwise agreement of the ratios across starts.
pub const ORACLE_AGREEMENT: f64 = 1e-8;

/// A certified optimum: the mean-zero representative of the optimal line
/// (the limit of a zero-started run, since gradient descent never moves
/// the all-ones component) plus the spread observed across starts.
#[derive(Debug, Clone)]
pub struct OracleOptimum {
    pub nu: PseudoValue,
    pub ratio: DensityRatio,
    pub iterations: usize,
    pub spread: f64,
}

/// Shifts a solution to its mean-zero representative on the optimal line.
/// The raw ratio is not constant along the line (a shift by C rescales it
/// by exp((gamma - 1) C / (1 + alpha))), so solutions from different
/// starts are only comparable after this canonicalization.
fn canonicalize(nu: &PseudoValue) -> PseudoValue {
    let mean: f64 = nu.values().iter().sum::<f64>() / nu.len() as f64;
    nu.shifted(-mean)
}

/// Long multi-start gradient descent. Start 0 is the zero vector (so any
/// shorter zero-started run of the same problem follows the same path),
/// the others are a deterministic ramp and a seeded random point. Each
/// solution is canonicalized to mean zero; the run errors if the
/// canonical ratios disagree beyond 1e-8 anywhere.
pub fn oracle_optimum(problem: &DiceProblem) -> Result<OracleOptimum> {
    let n = problem.n_states();
    let mut rng = derive_rng(0xD1CE, "theory", "oracle-start", 0);
    let ramp =
        PseudoValue::new((0..n).map(|i| 4.0 * (i as f64 / n as f64) - 2.0).collect())?;
    let random =
        PseudoValue::new((0..n).map(|_| rng.gen::<f64>() * 10.0 - 5.0).collect())?;
    let starts = [PseudoValue::zeros(n), ramp, random];

    let mut solutions = Vec::with_capacity(starts.len());
    for start in &starts {
        let (nu, iters) = problem.optimize_until(start, ORACLE_MAX_ITERS, ORACLE_GRAD_TOL)?;
        let canonical = canonicalize(&nu);
        let ratio = problem.density_ratio(&canonical)?;
        solutions.push((canonical, ratio, iters));
    }
    let mut spread = 0.0f64;
    for i in 1..solutions.len() {
        spread = spread.max(solutions[0].1.linf_distance(&solutions[i].1));
    }
    if spread > ORACLE_AGREEMENT {
        return Err(CoreError::OracleDisagreement(format!(
            "ratio spread {spread} across canonicalized starts exceeds {ORACLE_AGREEMENT}"
        )));
    }
    let (nu, ratio, iterations) = solutions.swap_remove(0);
    Ok(OracleOptimum {
        nu,
        ratio,
        iterations,
        spread,
    })
}

/// Orthogonal projection onto the optimal line {nu* + C 1}:
/// Pi(nu) = nu* + mean(nu - nu*) 1.
pub fn project_to_optimal_set(nu: &PseudoValue, nu_star: &PseudoValue) -> PseudoValue {
    debug_assert_eq!(nu.len(), nu_star.len());
    let mean_diff: f64 = nu
        .values()
        .iter()
        .zip(nu_star.values())
        .map(|(a, b)| a - b)
        .sum::<f64>()
        / nu.len() as f64;
    nu_star.shifted(mean_diff)
}

/// Empirical quadratic-growth constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthEstimate {
    pub c_hat: f64,
    pub samples: usize,
    /// Distance of each probe to the optimal line.
    pub residuals: Vec<f64>,
}

/// Estimates the quadratic-growth constant of an arbitrary shift-invariant
/// loss around `nu_star`:
/// c_hat = min over probes of 2 (L(nu) - L*) / ||nu - Pi(nu)||^2,
/// probing random directions at logarithmic radii 10^-2 .. 10^0.
pub fn estimate_growth_on<F: Fn(&PseudoValue) -> Result<f64>>(
    loss: F,
    nu_star: &PseudoValue,
    n_probes: usize,
    seed: u64,
) -> Result<GrowthEstimate> {
    let n = nu_star.len();
    let loss_star = loss(nu_star)?;
    let radii: Vec<f64> = (0..5).map(|k| 10f64.powf(-2.0 + 0.5 * k as f64)).collect();
    let mut rng = derive_rng(seed, "theory", "growth-probe", 0);
    let mut c_hat = f64::INFINITY;
    let mut residuals = Vec::new();
    let per_radius = n_probes.div_ceil(radii.len()).max(1);
    for &radius in &radii {
        for _ in 0..per_radius {
            let mut dir: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            dir.iter_mut().for_each(|v| *v *= radius / norm);
            let probe = PseudoValue::new(
                nu_star
                    .values()
                    .iter()
                    .zip(&dir)
                    .map(|(a, b)| a + b)
                    .collect(),
            )?;
            let projected = project_to_optimal_set(&probe, nu_star);
            let dist = probe.l2_distance(&projected);
            if dist < 1e-12 {
                continue;
            }
            residuals.push(dist);
            let gap = loss(&probe)? - loss_star;
            c_hat = c_hat.min(2.0 * gap / (dist * dist));
        }
    }
    if residuals.is_empty() {
        return Err(CoreError::DegenerateGrowth(
            "all probes fell on the optimal line".into(),
        ));
    }
    Ok(GrowthEstimate {
        c_hat,
        samples: residuals.len(),
        residuals,
    })
}

/// Growth estimate for a dual-problem instance at its oracle optimum.
pub fn estimate_growth(
    problem: &DiceProblem,
    nu_star: &PseudoValue,
    n_probes: usize,
    seed: u64,
) -> Result<GrowthEstimate> {
    estimate_growth_on(|nu| problem.loss(nu), nu_star, n_probes, seed)
}
