//! The full cross-domain training loop: pseudo-reward once, then per
//! iteration a mapping refresh, one dual gradient step, adaptive weighting,
//! and policy extraction from the hybrid density ratio.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Weighting};
use crate::dice::{
    build_empirical_problem, extract_policy_bc, DiceConfig, DiceProblem, DiscrimMethod,
};
use crate::error::{CoreError, Result};
use crate::mdp::{Policy, TabularMdp};
use crate::rng::derive_rng;
use crate::types::{DensityRatio, PseudoValue, SaTable};

use super::{
    beta_theoretical, optimize_mappings_restarts, BetaMode, BetaState, MappingPair,
    SourceArtifacts,
};

/// Hybrid density ratio over target pairs:
/// w_cross(s,a) = beta * w_src(G(s), H(s,a)) + (1 - beta) * w_tar(s,a).
/// Supported wherever the target ratio is.
pub fn w_cross(
    beta: f64,
    map: &MappingPair,
    w_src: &DensityRatio,
    w_tar: &DensityRatio,
) -> Result<DensityRatio> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(CoreError::InvalidArgument(format!(
            "beta must lie in [0, 1], got {beta}"
        )));
    }
    let table = w_tar.table();
    let mut values = vec![0.0; table.n_states() * table.n_actions()];
    for (s, a, wt) in table.iter_supported() {
        let (gs, ga) = map.map_pair(s, a);
        let ws = w_src.table().require(gs, ga)?;
        values[crate::types::sa_index(s, a, table.n_actions())] = beta * ws + (1.0 - beta) * wt;
    }
    let combined = SaTable::with_support(
        table.n_states(),
        table.n_actions(),
        values,
        table.support().to_vec(),
    )?;
    DensityRatio::new(combined, w_src.clip_count + w_tar.clip_count)
}

/// Distinct dataset pairs with their plain-mean weights (record counts over
/// total); expectations over the dataset reduce to weighted sums here.
pub fn pair_weights(dataset: &Dataset) -> (Vec<(usize, usize)>, Vec<f64>) {
    let pairs = dataset.distinct_pairs();
    let mut weights = vec![0.0; pairs.len()];
    for rec in dataset.records() {
        let key = (rec.state as usize, rec.action as usize);
        let idx = pairs.binary_search(&key).expect("pair is present");
        weights[idx] += 1.0;
    }
    let total: f64 = dataset.len() as f64;
    weights.iter_mut().for_each(|w| *w /= total);
    (pairs, weights)
}

/// Weighted mean of |a_i - b_i|; the canonical dataset expectation used by
/// both the training loop and the certificates, so both see identical
/// floating-point results.
pub fn weighted_mean_abs_diff(a: &[f64], b: &[f64], weights: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    debug_assert_eq!(a.len(), weights.len());
    let mut total = 0.0;
    for i in 0..a.len() {
        total += weights[i] * (a[i] - b[i]).abs();
    }
    total
}

/// Empirical density-ratio error estimates over the dataset:
/// delta_src = E_D |w_src(G(s), H(s,a)) - w_ref|,
/// delta_tar = E_D |w_prev - w_ref|,
/// where `w_ref` stands in for the unknown optimum (the current iterate in
/// practice, the oracle ratio when verifying the theory).
pub fn ratio_errors(
    map: &MappingPair,
    w_src: &DensityRatio,
    w_tar_prev: &DensityRatio,
    w_tar_ref: &DensityRatio,
    dataset: &Dataset,
) -> Result<(f64, f64)> {
    if dataset.is_empty() {
        return Err(CoreError::EmptyDataset("ratio error input".into()));
    }
    let (pairs, weights) = pair_weights(dataset);
    let mut src_vals = Vec::with_capacity(pairs.len());
    let mut prev_vals = Vec::with_capacity(pairs.len());
    let mut ref_vals = Vec::with_capacity(pairs.len());
    for &(s, a) in &pairs {
        let (gs, ga) = map.map_pair(s, a);
        src_vals.push(w_src.table().require(gs, ga)?);
        prev_vals.push(w_tar_prev.table().require(s, a)?);
        ref_vals.push(w_tar_ref.table().require(s, a)?);
    }
    let delta_src = weighted_mean_abs_diff(&src_vals, &ref_vals, &weights);
    let delta_tar = weighted_mean_abs_diff(&prev_vals, &ref_vals, &weights);
    Ok((delta_src, delta_tar))
}

/// Everything one training invocation needs.
#[derive(Debug, Clone, Copy)]
pub struct AdaptDiceParams<'a> {
    pub src: &'a SourceArtifacts,
    pub expert: &'a Dataset,
    pub union: &'a Dataset,
    pub tar_mdp: &'a TabularMdp,
    pub cfg: DiceConfig,
    pub beta_mode: BetaMode,
    /// Moving-average smoothing factor for the adaptive weight.
    pub psi: f64,
    /// Coordinate-descent sweeps per mapping refresh.
    pub map_budget: usize,
    /// Extra random starts per mapping refresh.
    pub map_restarts: usize,
    pub weighting: Weighting,
    pub seed: u64,
    /// Optimal target ratio, when known; enables oracle diagnostics and
    /// drives the indicator mode.
    pub oracle: Option<&'a DensityRatio>,
}

/// Per-pair ratio values recorded when oracle checks are on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSnapshot {
    pub w_src_mapped: Vec<f64>,
    pub w_tar: Vec<f64>,
    pub w_cross: Vec<f64>,
}

/// One iteration of the training trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub t: usize,
    pub beta: f64,
    pub delta_src: f64,
    pub delta_tar: f64,
    pub delta_ma: f64,
    pub map_loss: f64,
    pub dice_loss: f64,
    pub delta_src_oracle: Option<f64>,
    pub delta_tar_oracle: Option<f64>,
    pub oracle_ratio_error: Option<f64>,
    pub pair_values: Option<PairSnapshot>,
}

/// Output of a training run. The trace has exactly `cfg.iterations`
/// entries; `pairs`/`pair_weights` fix the dataset expectation all
/// downstream certificates reuse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaptDiceResult {
    pub policy: Policy,
    pub mapping: MappingPair,
    pub trace: Vec<IterRecord>,
    pub pairs: Vec<(usize, usize)>,
    pub pair_weights: Vec<f64>,
    pub problem: DiceProblem,
}

/// One line of the exported JSONL trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_src: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_tar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_ma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_loss: Option<f64>,
    pub dice_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_ratio_error: Option<f64>,
}

/// Writes the per-iteration trace as JSON lines.
pub fn write_adapt_trace<W: std::io::Write>(mut w: W, result: &AdaptDiceResult) -> Result<()> {
    for rec in &result.trace {
        let row = TraceRow {
            t: rec.t,
            beta: Some(rec.beta),
            delta_src: Some(rec.delta_src),
            delta_tar: Some(rec.delta_tar),
            delta_ma: Some(rec.delta_ma),
            map_loss: Some(rec.map_loss),
            dice_loss: rec.dice_loss,
            grad_norm: None,
            oracle_ratio_error: rec.oracle_ratio_error,
        };
        serde_json::to_writer(&mut w, &row)?;
        writeln!(w)?;
    }
    Ok(())
}

fn validate_expert_subset(expert: &Dataset, union: &Dataset) -> Result<()> {
    let flagged: Vec<_> = union.records().iter().filter(|r| r.is_expert).collect();
    if flagged.len() != expert.len()
        || !flagged.iter().zip(expert.records()).all(|(a, b)| **a == *b)
    {
        return Err(CoreError::InvalidArgument(
            "expert dataset must be exactly the flagged subset of the union".into(),
        ));
    }
    Ok(())
}

/// Runs the cross-domain loop.
///
/// Per iteration t: refresh the mappings by coordinate descent against the
/// previous policy, take one gradient step on the dual loss, estimate the
/// source/target ratio errors against the fresh iterate (the previous
/// iterate stands in for the target-side error, the mapped source ratio
/// for the source side), update the moving average, pick beta, and extract
/// the policy from the hybrid ratio.
pub fn adaptdice_run(params: &AdaptDiceParams) -> Result<AdaptDiceResult> {
    let AdaptDiceParams {
        src,
        expert,
        union,
        tar_mdp,
        cfg,
        beta_mode,
        psi,
        map_budget,
        map_restarts,
        weighting,
        seed,
        oracle,
    } = *params;
    beta_mode.validate()?;
    validate_expert_subset(expert, union)?;

    let (problem, _disc) = build_empirical_problem(
        expert,
        union,
        tar_mdp,
        cfg,
        weighting,
        DiscrimMethod::CountBased,
    )?;
    let eta = cfg.effective_step_size();
    let (pairs, weights) = pair_weights(union);

    let mut map_rng = derive_rng(seed, "adaptdice", "mapping", 0);
    let mut mapping = MappingPair::random(
        tar_mdp.n_states(),
        tar_mdp.n_actions(),
        src.mdp.n_states(),
        src.mdp.n_actions(),
        &mut map_rng,
    );
    let mut nu = PseudoValue::zeros(tar_mdp.n_states());
    let mut policy = Policy::uniform(tar_mdp.n_states(), tar_mdp.n_actions());
    let mut w_prev = problem.density_ratio(&nu)?;
    let mut beta_state = BetaState::new(psi, beta_mode)?;

    let oracle_vals: Option<Vec<f64>> = oracle
        .map(|w_star| {
            pairs
                .iter()
                .map(|&(s, a)| w_star.table().require(s, a))
                .collect::<Result<Vec<f64>>>()
        })
        .transpose()?;

    let mut trace = Vec::with_capacity(cfg.iterations);
    for t in 1..=cfg.iterations {
        // Mapping refresh against the previous policy.
        let fit = optimize_mappings_restarts(
            &mapping,
            problem.reward(),
            &src.q,
            &policy,
            union,
            cfg.gamma,
            map_budget,
            Some(&src.data_occ),
            map_restarts,
            &mut map_rng,
        )?;
        mapping = fit.mapping;

        // One dual gradient step.
        let step = problem.gd_step(&nu, eta).map_err(|e| match e {
            CoreError::NonFinite { .. } => CoreError::DivergedAt {
                what: "dice loss/gradient".into(),
                iteration: t,
            },
            other => other,
        })?;
        nu = step.next;
        let w_now = problem.density_ratio(&nu)?;

        // Error estimates; the fresh iterate approximates the optimum.
        let (delta_src, delta_tar) = ratio_errors(&mapping, &src.ratio, &w_prev, &w_now, union)?;
        beta_state.observe(delta_src, delta_tar);

        let w_now_vals: Vec<f64> = pairs
            .iter()
            .map(|&(s, a)| w_now.table().require(s, a))
            .collect::<Result<Vec<f64>>>()?;
        let w_src_vals: Vec<f64> = pairs
            .iter()
            .map(|&(s, a)| {
                let (gs, ga) = mapping.map_pair(s, a);
                src.ratio.table().require(gs, ga)
            })
            .collect::<Result<Vec<f64>>>()?;

        let (delta_src_oracle, delta_tar_oracle) = match &oracle_vals {
            Some(star) => (
                Some(weighted_mean_abs_diff(&w_src_vals, star, &weights)),
                Some(weighted_mean_abs_diff(&w_now_vals, star, &weights)),
            ),
            None => (None, None),
        };

        let beta = match beta_mode {
            BetaMode::Fixed(v) => v,
            BetaMode::HarmonicAdaptive => beta_state.beta(),
            BetaMode::TheoreticalIndicator => match (delta_src_oracle, delta_tar_oracle) {
                (Some(ds), Some(dt)) => beta_theoretical(ds, dt),
                _ => beta_theoretical(delta_src, delta_tar),
            },
        };

        let combined = w_cross(beta, &mapping, &src.ratio, &w_now)?;
        policy = extract_policy_bc(&combined, union, tar_mdp, weighting)?;

        let (oracle_ratio_error, pair_values) = match &oracle_vals {
            Some(star) => {
                let w_cross_vals: Vec<f64> = pairs
                    .iter()
                    .map(|&(s, a)| combined.table().require(s, a))
                    .collect::<Result<Vec<f64>>>()?;
                let err = weighted_mean_abs_diff(&w_cross_vals, star, &weights);
                (
                    Some(err),
                    Some(PairSnapshot {
                        w_src_mapped: w_src_vals,
                        w_tar: w_now_vals,
                        w_cross: w_cross_vals,
                    }),
                )
            }
            None => (None, None),
        };

        let record = IterRecord {
            t,
            beta,
            delta_src,
            delta_tar,
            delta_ma: beta_state.delta_ma.unwrap_or(delta_tar),
            map_loss: fit.loss,
            dice_loss: step.loss,
            delta_src_oracle,
            delta_tar_oracle,
            oracle_ratio_error,
            pair_values,
        };
        if !(record.beta.is_finite()
            && record.delta_src.is_finite()
            && record.delta_tar.is_finite()
            && record.map_loss.is_finite()
            && record.dice_loss.is_finite())
        {
            return Err(CoreError::DivergedAt {
                what: "training diagnostics".into(),
                iteration: t,
            });
        }
        trace.push(record);
        w_prev = w_now;
    }

    Ok(AdaptDiceResult {
        policy,
        mapping,
        trace,
        pairs,
        pair_weights: weights,
        problem,
    })
}
