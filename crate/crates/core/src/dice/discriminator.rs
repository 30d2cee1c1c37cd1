//! Expert-vs-data discriminators and the pseudo rewards they induce.
//!
//! A discriminator c(s,a) separates expert pairs from union-dataset pairs
//! under the binary cross-entropy objective. Its logit recovers the log
//! density ratio: r(s,a) = -log(1/c - 1), which equals log(dE/dU) at the
//! exact optimum c* = dE / (dE + dU).

use serde::{Deserialize, Serialize};

use crate::dataset::{empirical_occupancy, DataFilter, Dataset, Weighting};
use crate::error::{CoreError, Result};
use crate::mdp::{OccupancyMeasure, TabularMdp};
use crate::types::{sa_index, PseudoReward, SaTable};

/// Discriminator outputs are clipped into [CLIP, 1 - CLIP].
pub const DISCRIMINATOR_CLIP: f64 = 1e-6;
/// Floor applied to a zero expert mass inside an exact log ratio.
pub const RATIO_FLOOR: f64 = 1e-12;

/// How the discriminator is fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscrimMethod {
    /// Per-pair closed-form minimizer c = mE / (mE + mU).
    CountBased,
    /// Gradient descent on the same objective with one-hot features and
    /// l2 regularization on the logits.
    Logistic { l2: f64 },
}

/// A tabular discriminator over (state, action) pairs.
///
/// `c` is defined on the whole space: on the union support it carries the
/// fitted value, elsewhere the clipped zero (no expert evidence).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    n_states: usize,
    n_actions: usize,
    c: Vec<f64>,
    support: Vec<bool>,
    pub method: DiscrimMethod,
}

impl Discriminator {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn value(&self, state: usize, action: usize) -> f64 {
        self.c[sa_index(state, action, self.n_actions)]
    }

    /// Union-dataset support on which the discriminator was trained.
    pub fn support(&self) -> &[bool] {
        &self.support
    }

    /// Pseudo reward r = -log(1/c - 1), masked to the union support.
    pub fn pseudo_reward(&self) -> PseudoReward {
        let values: Vec<f64> = self.c.iter().map(|&c| -f64::ln(1.0 / c - 1.0)).collect();
        PseudoReward::new(
            SaTable::with_support(self.n_states, self.n_actions, values, self.support.clone())
                .expect("clipped discriminator values are finite"),
        )
    }

    /// Pseudo reward over the whole space; off-support pairs inherit the
    /// clipped zero, i.e. a strongly negative reward.
    pub fn pseudo_reward_unmasked(&self) -> PseudoReward {
        let values: Vec<f64> = self.c.iter().map(|&c| -f64::ln(1.0 / c - 1.0)).collect();
        PseudoReward::new(
            SaTable::full(self.n_states, self.n_actions, values)
                .expect("clipped discriminator values are finite"),
        )
    }
}

/// Pseudo reward from a fitted discriminator (union support).
pub fn pseudo_reward_from_disc(disc: &Discriminator) -> PseudoReward {
    disc.pseudo_reward()
}

/// Closed-form count-based discriminator from expert and union masses.
///
/// Both masses must be normalized distributions; every pair with expert
/// mass must also carry union mass.
pub fn discriminator_from_masses(
    expert: &OccupancyMeasure,
    union: &OccupancyMeasure,
) -> Result<Discriminator> {
    if expert.n_states() != union.n_states() || expert.n_actions() != union.n_actions() {
        return Err(CoreError::DimensionMismatch(
            "expert and union masses differ in shape".into(),
        ));
    }
    let n_states = union.n_states();
    let n_actions = union.n_actions();
    let mut c = vec![DISCRIMINATOR_CLIP; n_states * n_actions];
    let support = union.support_mask();
    for s in 0..n_states {
        for a in 0..n_actions {
            let me = expert.get(s, a);
            let mu = union.get(s, a);
            if me > 0.0 && mu == 0.0 {
                return Err(CoreError::SupportViolation(format!(
                    "pair ({s}, {a}) has expert mass but no union mass"
                )));
            }
            if mu > 0.0 {
                c[sa_index(s, a, n_actions)] =
                    (me / (me + mu)).clamp(DISCRIMINATOR_CLIP, 1.0 - DISCRIMINATOR_CLIP);
            }
        }
    }
    Ok(Discriminator {
        n_states,
        n_actions,
        c,
        support,
        method: DiscrimMethod::CountBased,
    })
}

/// Fits a discriminator on empirical (possibly discounted) masses.
pub fn fit_discriminator(
    expert: &Dataset,
    union: &Dataset,
    mdp: &TabularMdp,
    method: DiscrimMethod,
    weighting: Weighting,
) -> Result<Discriminator> {
    if expert.is_empty() || union.is_empty() {
        return Err(CoreError::EmptyDataset(
            "discriminator needs both datasets".into(),
        ));
    }
    let m_expert = empirical_occupancy(expert, mdp, DataFilter::All, weighting)?;
    let m_union = empirical_occupancy(union, mdp, DataFilter::All, weighting)?;
    match method {
        DiscrimMethod::CountBased => discriminator_from_masses(&m_expert, &m_union),
        DiscrimMethod::Logistic { l2 } => fit_logistic(&m_expert, &m_union, l2),
    }
}

/// Full-batch gradient descent on the binary cross-entropy over per-pair
/// logits theta, with (l2/2)||theta||^2 regularization.
fn fit_logistic(
    expert: &OccupancyMeasure,
    union: &OccupancyMeasure,
    l2: f64,
) -> Result<Discriminator> {
    if l2 < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "l2 strength must be >= 0, got {l2}"
        )));
    }
    // Reuse the count-based path for shape/support validation.
    let mut disc = discriminator_from_masses(expert, union)?;
    let n_actions = union.n_actions();
    let pairs: Vec<(usize, usize)> = (0..union.n_states())
        .flat_map(|s| (0..n_actions).map(move |a| (s, a)))
        .filter(|&(s, a)| union.get(s, a) > 0.0)
        .collect();

    let max_curvature = pairs
        .iter()
        .map(|&(s, a)| (expert.get(s, a) + union.get(s, a)) / 4.0 + l2)
        .fold(0.0f64, f64::max);
    let lr = 1.0 / max_curvature;
    let mut theta = vec![0.0f64; pairs.len()];
    for _ in 0..200_000 {
        let mut max_grad = 0.0f64;
        for (i, &(s, a)) in pairs.iter().enumerate() {
            let sigma = 1.0 / (1.0 + f64::exp(-theta[i]));
            let grad = -expert.get(s, a) * (1.0 - sigma) + union.get(s, a) * sigma + l2 * theta[i];
            theta[i] -= lr * grad;
            max_grad = max_grad.max(grad.abs());
        }
        if max_grad < 1e-14 {
            break;
        }
    }
    for (i, &(s, a)) in pairs.iter().enumerate() {
        let sigma = 1.0 / (1.0 + f64::exp(-theta[i]));
        disc.c[sa_index(s, a, n_actions)] =
            sigma.clamp(DISCRIMINATOR_CLIP, 1.0 - DISCRIMINATOR_CLIP);
    }
    disc.method = DiscrimMethod::Logistic { l2 };
    Ok(disc)
}

/// Exact log density ratio r = log(dE / dU) on the support of dU.
///
/// Pairs inside supp(dU) where dE vanishes get the floored value
/// log(RATIO_FLOOR / dU); expert mass outside supp(dU) is rejected.
pub fn pseudo_reward_exact(
    expert: &OccupancyMeasure,
    union: &OccupancyMeasure,
) -> Result<PseudoReward> {
    if expert.n_states() != union.n_states() || expert.n_actions() != union.n_actions() {
        return Err(CoreError::DimensionMismatch(
            "occupancies differ in shape".into(),
        ));
    }
    let n_states = union.n_states();
    let n_actions = union.n_actions();
    let mut values = vec![0.0; n_states * n_actions];
    let support = union.support_mask();
    let mut floored = 0usize;
    for s in 0..n_states {
        for a in 0..n_actions {
            let de = expert.get(s, a);
            let du = union.get(s, a);
            if du <= 0.0 {
                if de > 0.0 {
                    return Err(CoreError::SupportViolation(format!(
                        "expert occupancy positive at ({s}, {a}) where data occupancy is zero"
                    )));
                }
                continue;
            }
            let numerator = if de > 0.0 {
                de
            } else {
                floored += 1;
                RATIO_FLOOR
            };
            values[sa_index(s, a, n_actions)] = f64::ln(numerator / du);
        }
    }
    if floored > 0 {
        log::debug!("exact pseudo reward floored {floored} zero expert entries");
    }
    Ok(PseudoReward::new(SaTable::with_support(
        n_states, n_actions, values, support,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetMeta, Transition};

    fn occ(n_states: usize, n_actions: usize, values: Vec<f64>) -> OccupancyMeasure {
        OccupancyMeasure::new(n_states, n_actions, values).unwrap()
    }

    #[test]
    fn equal_masses_give_half() {
        let e = occ(1, 2, vec![0.5, 0.5]);
        let u = occ(1, 2, vec![0.5, 0.5]);
        let disc = discriminator_from_masses(&e, &u).unwrap();
        assert_eq!(disc.value(0, 0), 0.5);
        assert_eq!(disc.value(0, 1), 0.5);
    }

    #[test]
    fn union_only_pair_clips_to_zero() {
        let e = occ(1, 2, vec![1.0, 0.0]);
        let u = occ(1, 2, vec![0.5, 0.5]);
        let disc = discriminator_from_masses(&e, &u).unwrap();
        assert_eq!(disc.value(0, 1), DISCRIMINATOR_CLIP);
    }

    #[test]
    fn expert_outside_union_rejected() {
        let e = occ(1, 2, vec![0.5, 0.5]);
        let u = occ(1, 2, vec![1.0, 0.0]);
        assert!(matches!(
            discriminator_from_masses(&e, &u),
            Err(CoreError::SupportViolation(_))
        ));
    }

    #[test]
    fn count_based_matches_grid_search() {
        // Per-pair brute force over c in (0, 1) on the empirical objective
        // -(mE log c + mU log(1 - c)).
        let e = occ(2, 2, vec![0.4, 0.1, 0.3, 0.2]);
        let u = occ(2, 2, vec![0.25, 0.25, 0.25, 0.25]);
        let disc = discriminator_from_masses(&e, &u).unwrap();
        for s in 0..2 {
            for a in 0..2 {
                let me = e.get(s, a);
                let mu = u.get(s, a);
                let mut best_c = 0.0;
                let mut best = f64::INFINITY;
                let mut lo = 1e-9;
                let mut hi = 1.0 - 1e-9;
                for _ in 0..6 {
                    let step = (hi - lo) / 400.0;
                    for k in 0..=400 {
                        let c = lo + step * k as f64;
                        let obj = -(me * c.ln() + mu * (1.0 - c).ln());
                        if obj < best {
                            best = obj;
                            best_c = c;
                        }
                    }
                    lo = (best_c - 2.0 * step).max(1e-12);
                    hi = (best_c + 2.0 * step).min(1.0 - 1e-12);
                }
                assert!(
                    (disc.value(s, a) - best_c).abs() < 1e-6,
                    "pair ({s},{a}): closed form {} vs grid {best_c}",
                    disc.value(s, a)
                );
            }
        }
    }

    #[test]
    fn logistic_approaches_count_based_without_regularization() {
        let e = occ(2, 2, vec![0.4, 0.1, 0.3, 0.2]);
        let u = occ(2, 2, vec![0.25, 0.25, 0.25, 0.25]);
        let counted = discriminator_from_masses(&e, &u).unwrap();
        let logistic = fit_logistic(&e, &u, 0.0).unwrap();
        for s in 0..2 {
            for a in 0..2 {
                assert!(
                    (counted.value(s, a) - logistic.value(s, a)).abs() < 1e-8,
                    "pair ({s},{a})"
                );
            }
        }
        // Regularization pulls logits toward zero, i.e. c toward 1/2.
        let ridge = fit_logistic(&e, &u, 0.5).unwrap();
        assert!((ridge.value(0, 0) - 0.5).abs() < (counted.value(0, 0) - 0.5).abs());
    }

    #[test]
    fn reward_transform_of_known_values() {
        let e = occ(1, 2, vec![0.5, 0.5]);
        let u = occ(1, 2, vec![0.5, 0.5]);
        let mut disc = discriminator_from_masses(&e, &u).unwrap();
        disc.c = vec![0.5, std::f64::consts::E / (1.0 + std::f64::consts::E)];
        let r = pseudo_reward_from_disc(&disc);
        assert!(r.table().get(0, 0).unwrap().abs() < 1e-12);
        assert!((r.table().get(0, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn count_based_reward_recovers_exact_log_ratio() {
        // With exact occupancies, -log(1/c - 1) = log(dE/dU) identically.
        let e = occ(2, 2, vec![0.4, 0.1, 0.3, 0.2]);
        let u = occ(2, 2, vec![0.25, 0.25, 0.25, 0.25]);
        let disc = discriminator_from_masses(&e, &u).unwrap();
        let from_disc = pseudo_reward_from_disc(&disc);
        let exact = pseudo_reward_exact(&e, &u).unwrap();
        for s in 0..2 {
            for a in 0..2 {
                let got = from_disc.table().get(s, a).unwrap();
                let want = exact.table().get(s, a).unwrap();
                assert!((got - want).abs() < 1e-10, "({s},{a}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn exact_ratio_of_known_masses() {
        let e = occ(1, 2, vec![2.0 / 3.0, 1.0 / 3.0]);
        let u = occ(1, 2, vec![0.5, 0.5]);
        let r = pseudo_reward_exact(&e, &u).unwrap();
        assert!((r.table().get(0, 0).unwrap() - f64::ln(4.0 / 3.0)).abs() < 1e-15);
        assert!((r.table().get(0, 1).unwrap() - f64::ln(2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn exact_ratio_identity_when_equal() {
        let u = occ(2, 2, vec![0.3, 0.2, 0.1, 0.4]);
        let r = pseudo_reward_exact(&u, &u).unwrap();
        for (_, _, v) in r.table().iter_supported() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn exact_ratio_floors_zero_expert_mass() {
        let e = occ(1, 2, vec![1.0, 0.0]);
        let u = occ(1, 2, vec![0.5, 0.5]);
        let r = pseudo_reward_exact(&e, &u).unwrap();
        assert!((r.table().get(0, 1).unwrap() - f64::ln(RATIO_FLOOR / 0.5)).abs() < 1e-12);
    }

    #[test]
    fn fit_from_datasets_respects_weighting() {
        let meta = DatasetMeta {
            mdp_id: "m".into(),
            policy: "p".into(),
            seed: 0,
        };
        let rec = |traj, step, s, a, expert| Transition {
            traj_id: traj,
            step,
            state: s,
            action: a,
            next_state: 0,
            is_expert: expert,
        };
        let expert = Dataset::new(meta.clone(), vec![rec(0, 0, 0, 0, true)]).unwrap();
        let union = Dataset::new(
            meta,
            vec![
                rec(0, 0, 0, 0, true),
                rec(1, 0, 0, 1, false),
                rec(1, 1, 0, 1, false),
            ],
        )
        .unwrap();
        let mdp = TabularMdp::new(
            1,
            2,
            vec![vec![vec![1.0], vec![1.0]]],
            vec![1.0],
            0.5,
            None,
        )
        .unwrap();
        let disc = fit_discriminator(
            &expert,
            &union,
            &mdp,
            DiscrimMethod::CountBased,
            Weighting::Discounted,
        )
        .unwrap();
        // Union masses: pair (0,0) weight 1, pair (0,1) weight 1 + 0.5,
        // normalized by 2.5. Expert mass on (0,0) is 1.
        let m00 = 1.0 / 2.5;
        assert!((disc.value(0, 0) - 1.0 / (1.0 + m00)).abs() < 1e-12);
    }
}
