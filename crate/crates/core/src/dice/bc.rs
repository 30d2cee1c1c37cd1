//! Weighted behavior cloning: the closed-form tabular minimizer of
//! -E_D[w(s,a) log pi(a|s)].

use crate::dataset::{Dataset, Weighting};
use crate::error::{CoreError, Result};
use crate::mdp::{Policy, TabularMdp};
use crate::types::{sa_index, DensityRatio};

/// Extracts pi(a|s) proportional to w(s,a) * n(s,a), where n are dataset
/// visit counts (or discounted weights). States absent from the dataset
/// get the uniform row, as does any visited state whose weighted counts
/// all vanish.
pub fn extract_policy_bc(
    ratio: &DensityRatio,
    dataset: &Dataset,
    mdp: &TabularMdp,
    weighting: Weighting,
) -> Result<Policy> {
    if dataset.is_empty() {
        return Err(CoreError::EmptyDataset("behavior cloning input".into()));
    }
    dataset.validate_bounds(mdp)?;
    let n_states = mdp.n_states();
    let n_actions = mdp.n_actions();
    let gamma = mdp.discount();
    let mut counts = vec![0.0; n_states * n_actions];
    for r in dataset.records() {
        let w = match weighting {
            Weighting::Discounted => gamma.powi(r.step as i32),
            Weighting::Uniform => 1.0,
        };
        counts[sa_index(r.state as usize, r.action as usize, n_actions)] += w;
    }

    let mut probs = vec![vec![0.0; n_actions]; n_states];
    let mut degenerate = 0usize;
    for s in 0..n_states {
        let mut row = vec![0.0; n_actions];
        let mut visited = false;
        let mut total = 0.0;
        for a in 0..n_actions {
            let n = counts[sa_index(s, a, n_actions)];
            if n <= 0.0 {
                continue;
            }
            visited = true;
            let w = ratio.table().require(s, a)?;
            row[a] = w * n;
            total += row[a];
        }
        if !visited {
            probs[s] = vec![1.0 / n_actions as f64; n_actions];
        } else if total <= 0.0 {
            degenerate += 1;
            probs[s] = vec![1.0 / n_actions as f64; n_actions];
        } else {
            row.iter_mut().for_each(|p| *p /= total);
            probs[s] = row;
        }
    }
    if degenerate > 0 {
        log::warn!("behavior cloning: {degenerate} visited states had all-zero weights; using uniform rows");
    }
    Policy::new(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetMeta, Transition};
    use crate::types::SaTable;

    fn meta() -> DatasetMeta {
        DatasetMeta {
            mdp_id: "m".into(),
            policy: "p".into(),
            seed: 0,
        }
    }

    fn mdp(n_states: usize, n_actions: usize) -> TabularMdp {
        let row = vec![1.0 / n_states as f64; n_states];
        let transitions = vec![vec![row; n_actions]; n_states];
        let mu = vec![1.0 / n_states as f64; n_states];
        TabularMdp::new(n_states, n_actions, transitions, mu, 0.9, None).unwrap()
    }

    fn one_state_dataset(counts: &[usize]) -> Dataset {
        let mut records = Vec::new();
        let mut traj = 0u32;
        for (a, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                records.push(Transition {
                    traj_id: traj,
                    step: 0,
                    state: 0,
                    action: a as u32,
                    next_state: 0,
                    is_expert: false,
                });
                traj += 1;
            }
        }
        Dataset::new(meta(), records).unwrap()
    }

    fn ratio(n_states: usize, n_actions: usize, values: Vec<f64>) -> DensityRatio {
        DensityRatio::new(SaTable::full(n_states, n_actions, values).unwrap(), 0).unwrap()
    }

    #[test]
    fn unit_weights_reduce_to_plain_counts() {
        let ds = one_state_dataset(&[3, 1]);
        let w = ratio(1, 2, vec![1.0, 1.0]);
        let pi = extract_policy_bc(&w, &ds, &mdp(1, 2), Weighting::Uniform).unwrap();
        assert!((pi.prob(0, 0) - 0.75).abs() < 1e-15);
        assert!((pi.prob(0, 1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn concentrated_weight_gives_deterministic_policy() {
        let ds = one_state_dataset(&[5, 5]);
        let w = ratio(1, 2, vec![0.0, 3.0]);
        let pi = extract_policy_bc(&w, &ds, &mdp(1, 2), Weighting::Uniform).unwrap();
        assert_eq!(pi.prob(0, 0), 0.0);
        assert_eq!(pi.prob(0, 1), 1.0);
    }

    #[test]
    fn counts_times_weights_normalize() {
        let ds = one_state_dataset(&[3, 1]);
        let w = ratio(1, 2, vec![1.0, 2.0]);
        let pi = extract_policy_bc(&w, &ds, &mdp(1, 2), Weighting::Uniform).unwrap();
        assert!((pi.prob(0, 0) - 0.6).abs() < 1e-15);
        assert!((pi.prob(0, 1) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn unvisited_and_degenerate_states_fall_back_to_uniform() {
        let ds = one_state_dataset(&[2, 0]);
        let w = ratio(2, 2, vec![0.0, 0.0, 1.0, 1.0]);
        let pi = extract_policy_bc(&w, &ds, &mdp(2, 2), Weighting::Uniform).unwrap();
        // State 0 visited with zero weight, state 1 never visited.
        assert_eq!(pi.row(0), &[0.5, 0.5]);
        assert_eq!(pi.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let ds = Dataset::new(meta(), vec![]).unwrap();
        let w = ratio(1, 2, vec![1.0, 1.0]);
        assert!(matches!(
            extract_policy_bc(&w, &ds, &mdp(1, 2), Weighting::Uniform),
            Err(CoreError::EmptyDataset(_))
        ));
    }
}
