//! Transition datasets: trajectory storage, sampling, empirical occupancy
//! estimation, and the line-delimited on-disk format.
//!
//! A dataset is a list of `(s, a, s')` records grouped into contiguous
//! trajectories. The first record of each trajectory doubles as an
//! initial-state sample. Expert-generated trajectories carry a flag so a
//! labeled expert subset can be pulled out of a mixed dataset.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::mdp::{OccupancyMeasure, Policy, TabularMdp};
use crate::rng::{derive_rng, sample_categorical};
use crate::types::sa_index;

/// Provenance carried in the dataset header line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub mdp_id: String,
    pub policy: String,
    pub seed: u64,
}

/// One step of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub traj_id: u32,
    pub step: u32,
    pub state: u32,
    pub action: u32,
    pub next_state: u32,
    pub is_expert: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub meta: DatasetMeta,
    records: Vec<Transition>,
}

/// Which records participate in an empirical estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFilter {
    ExpertOnly,
    All,
}

/// How dataset expectations weight individual records.
///
/// `Discounted` matches the occupancy-measure definition (step t carries
/// weight gamma^t); `Uniform` is a plain sample average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    Discounted,
    Uniform,
}

impl Dataset {
    /// Validates trajectory structure: ids partition the records into
    /// contiguous runs, steps count up from zero, and the expert flag is
    /// uniform within each trajectory.
    pub fn new(meta: DatasetMeta, records: Vec<Transition>) -> Result<Self> {
        let mut seen: Vec<u32> = Vec::new();
        let mut i = 0;
        while i < records.len() {
            let id = records[i].traj_id;
            if seen.contains(&id) {
                return Err(CoreError::InvalidArgument(format!(
                    "trajectory {id} is not contiguous"
                )));
            }
            seen.push(id);
            let flag = records[i].is_expert;
            let mut step = 0u32;
            while i < records.len() && records[i].traj_id == id {
                if records[i].step != step {
                    return Err(CoreError::InvalidArgument(format!(
                        "trajectory {id} has step {} at position {step}",
                        records[i].step
                    )));
                }
                if records[i].is_expert != flag {
                    return Err(CoreError::InvalidArgument(format!(
                        "trajectory {id} mixes expert flags"
                    )));
                }
                step += 1;
                i += 1;
            }
        }
        Ok(Self { meta, records })
    }

    pub fn records(&self) -> &[Transition] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_trajectories(&self) -> usize {
        self.records.iter().filter(|r| r.step == 0).count()
    }

    /// All indices must lie inside the owning MDP's bounds.
    pub fn validate_bounds(&self, mdp: &TabularMdp) -> Result<()> {
        for r in &self.records {
            if r.state as usize >= mdp.n_states()
                || r.next_state as usize >= mdp.n_states()
                || r.action as usize >= mdp.n_actions()
            {
                return Err(CoreError::DimensionMismatch(format!(
                    "record ({}, {}, {}) out of bounds for a {}x{} MDP",
                    r.state,
                    r.action,
                    r.next_state,
                    mdp.n_states(),
                    mdp.n_actions()
                )));
            }
        }
        Ok(())
    }

    /// The expert-flagged trajectories as their own dataset.
    pub fn expert_subset(&self) -> Result<Dataset> {
        let records: Vec<Transition> = self
            .records
            .iter()
            .copied()
            .filter(|r| r.is_expert)
            .collect();
        if records.is_empty() {
            return Err(CoreError::EmptyDataset(
                "no expert-flagged records".into(),
            ));
        }
        Dataset::new(self.meta.clone(), records)
    }

    /// Concatenates datasets, remapping trajectory ids to stay unique.
    pub fn concat(meta: DatasetMeta, parts: &[&Dataset]) -> Result<Dataset> {
        let mut records = Vec::new();
        let mut next_id = 0u32;
        for part in parts {
            let mut remap: Option<(u32, u32)> = None;
            for r in &part.records {
                let mapped = match remap {
                    Some((from, to)) if from == r.traj_id => to,
                    _ => {
                        let to = next_id;
                        next_id += 1;
                        remap = Some((r.traj_id, to));
                        to
                    }
                };
                records.push(Transition {
                    traj_id: mapped,
                    ..*r
                });
            }
        }
        Dataset::new(meta, records)
    }

    /// Distinct (state, action) pairs, ascending.
    pub fn distinct_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self
            .records
            .iter()
            .map(|r| (r.state as usize, r.action as usize))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    /// States appearing as either a state or a next state.
    pub fn touched_states(&self) -> Vec<usize> {
        let mut states: Vec<usize> = self
            .records
            .iter()
            .flat_map(|r| [r.state as usize, r.next_state as usize])
            .collect();
        states.sort_unstable();
        states.dedup();
        states
    }

    /// Empirical initial-state distribution from each trajectory's first
    /// record.
    pub fn initial_distribution(&self, n_states: usize) -> Result<Vec<f64>> {
        let mut counts = vec![0.0; n_states];
        let mut total = 0.0;
        for r in self.records.iter().filter(|r| r.step == 0) {
            counts[r.state as usize] += 1.0;
            total += 1.0;
        }
        if total == 0.0 {
            return Err(CoreError::EmptyDataset(
                "no trajectory starts in dataset".into(),
            ));
        }
        counts.iter_mut().for_each(|c| *c /= total);
        Ok(counts)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.meta)?;
        writeln!(w)?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.traj_id,
                r.step,
                r.state,
                r.action,
                r.next_state,
                u8::from(r.is_expert)
            )?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Dataset> {
        let mut lines = BufReader::new(r).lines();
        let header = lines
            .next()
            .ok_or_else(|| CoreError::Parse("empty dataset file".into()))??;
        let meta: DatasetMeta = serde_json::from_str(&header)?;
        let mut records = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(CoreError::Parse(format!(
                    "expected 6 fields, got {}: {line}",
                    fields.len()
                )));
            }
            let parse = |i: usize| -> Result<u32> {
                fields[i]
                    .trim()
                    .parse::<u32>()
                    .map_err(|e| CoreError::Parse(format!("field {i} of '{line}': {e}")))
            };
            records.push(Transition {
                traj_id: parse(0)?,
                step: parse(1)?,
                state: parse(2)?,
                action: parse(3)?,
                next_state: parse(4)?,
                is_expert: parse(5)? != 0,
            });
        }
        Dataset::new(meta, records)
    }

    pub fn write_to_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_to(std::fs::File::create(path)?)
    }

    pub fn read_from_path<P: AsRef<Path>>(path: P) -> Result<Dataset> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

/// Rolls out `n_traj` trajectories of length `horizon` under `policy`.
/// Deterministic in `seed`; the expert flag records caller intent.
pub fn sample_trajectories(
    mdp: &TabularMdp,
    policy: &Policy,
    n_traj: usize,
    horizon: usize,
    seed: u64,
    is_expert: bool,
    meta: DatasetMeta,
) -> Result<Dataset> {
    if horizon == 0 {
        return Err(CoreError::InvalidArgument("horizon must be >= 1".into()));
    }
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(CoreError::DimensionMismatch(
            "policy does not match MDP".into(),
        ));
    }
    let mut records = Vec::with_capacity(n_traj * horizon);
    for traj in 0..n_traj {
        let mut rng = derive_rng(seed, "dataset", "trajectory", traj as u64);
        let mut state = sample_categorical(&mut rng, mdp.initial_dist());
        for step in 0..horizon {
            let action = sample_categorical(&mut rng, policy.row(state));
            let next_state = sample_categorical(&mut rng, mdp.transition_row(state, action));
            records.push(Transition {
                traj_id: traj as u32,
                step: step as u32,
                state: state as u32,
                action: action as u32,
                next_state: next_state as u32,
                is_expert,
            });
            state = next_state;
        }
    }
    Dataset::new(meta, records)
}

/// Discounted (or plain) empirical visitation distribution of a dataset,
/// normalized to total mass one.
pub fn empirical_occupancy(
    dataset: &Dataset,
    mdp: &TabularMdp,
    filter: DataFilter,
    weighting: Weighting,
) -> Result<OccupancyMeasure> {
    dataset.validate_bounds(mdp)?;
    let gamma = mdp.discount();
    let mut mass = vec![0.0; mdp.n_states() * mdp.n_actions()];
    let mut total = 0.0;
    for r in dataset.records() {
        if filter == DataFilter::ExpertOnly && !r.is_expert {
            continue;
        }
        let w = match weighting {
            Weighting::Discounted => gamma.powi(r.step as i32),
            Weighting::Uniform => 1.0,
        };
        mass[sa_index(r.state as usize, r.action as usize, mdp.n_actions())] += w;
        total += w;
    }
    if total <= 0.0 {
        return Err(CoreError::EmptyDataset(format!(
            "no records left under {filter:?}"
        )));
    }
    mass.iter_mut().for_each(|m| *m /= total);
    OccupancyMeasure::new(mdp.n_states(), mdp.n_actions(), mass)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> DatasetMeta {
        DatasetMeta {
            mdp_id: "test".into(),
            policy: "unit".into(),
            seed: 0,
        }
    }

    fn record(traj: u32, step: u32, s: u32, a: u32, s2: u32, expert: bool) -> Transition {
        Transition {
            traj_id: traj,
            step,
            state: s,
            action: a,
            next_state: s2,
            is_expert: expert,
        }
    }

    fn small_mdp(gamma: f64) -> TabularMdp {
        let transitions = vec![
            vec![vec![0.5, 0.5], vec![1.0, 0.0]],
            vec![vec![0.0, 1.0], vec![0.5, 0.5]],
        ];
        TabularMdp::new(2, 2, transitions, vec![1.0, 0.0], gamma, None).unwrap()
    }

    #[test]
    fn single_step_trajectory_concentrates_mass() {
        let ds = Dataset::new(meta(), vec![record(0, 0, 1, 0, 0, true)]).unwrap();
        let occ =
            empirical_occupancy(&ds, &small_mdp(0.9), DataFilter::All, Weighting::Discounted)
                .unwrap();
        assert_eq!(occ.get(1, 0), 1.0);
        assert_eq!(occ.get(0, 0), 0.0);
    }

    #[test]
    fn disjoint_equal_trajectories_split_mass() {
        let ds = Dataset::new(
            meta(),
            vec![record(0, 0, 0, 0, 1, false), record(1, 0, 1, 1, 0, false)],
        )
        .unwrap();
        let occ =
            empirical_occupancy(&ds, &small_mdp(0.9), DataFilter::All, Weighting::Discounted)
                .unwrap();
        assert_eq!(occ.get(0, 0), 0.5);
        assert_eq!(occ.get(1, 1), 0.5);
    }

    #[test]
    fn discounted_weights_follow_geometric_decay() {
        // Three steps at gamma = 0.5 visit three distinct pairs; the hand
        // computation gives weights (1, 0.5, 0.25) / 1.75.
        let ds = Dataset::new(
            meta(),
            vec![
                record(0, 0, 0, 0, 0, false),
                record(0, 1, 0, 1, 1, false),
                record(0, 2, 1, 0, 1, false),
            ],
        )
        .unwrap();
        let occ =
            empirical_occupancy(&ds, &small_mdp(0.5), DataFilter::All, Weighting::Discounted)
                .unwrap();
        assert!((occ.get(0, 0) - 1.0 / 1.75).abs() < 1e-15);
        assert!((occ.get(0, 1) - 0.5 / 1.75).abs() < 1e-15);
        assert!((occ.get(1, 0) - 0.25 / 1.75).abs() < 1e-15);

        let flat =
            empirical_occupancy(&ds, &small_mdp(0.5), DataFilter::All, Weighting::Uniform)
                .unwrap();
        for pair in [(0, 0), (0, 1), (1, 0)] {
            assert!((flat.get(pair.0, pair.1) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn expert_filter_errors_when_empty() {
        let ds = Dataset::new(meta(), vec![record(0, 0, 0, 0, 1, false)]).unwrap();
        let err = empirical_occupancy(
            &ds,
            &small_mdp(0.9),
            DataFilter::ExpertOnly,
            Weighting::Discounted,
        );
        assert!(matches!(err, Err(CoreError::EmptyDataset(_))));
    }

    #[test]
    fn deterministic_rollouts_do_not_depend_on_seed() {
        let transitions = vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]];
        let mdp = TabularMdp::new(2, 1, transitions, vec![1.0, 0.0], 0.9, None).unwrap();
        let policy = Policy::uniform(2, 1);
        let a = sample_trajectories(&mdp, &policy, 3, 4, 1, false, meta()).unwrap();
        let b = sample_trajectories(&mdp, &policy, 3, 4, 99, false, meta()).unwrap();
        assert_eq!(a.records(), b.records());
    }

    #[test]
    fn same_seed_gives_identical_dataset() {
        let mdp = small_mdp(0.9);
        let policy = Policy::uniform(2, 2);
        let a = sample_trajectories(&mdp, &policy, 10, 5, 42, true, meta()).unwrap();
        let b = sample_trajectories(&mdp, &policy, 10, 5, 42, true, meta()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn first_action_frequencies_match_policy() {
        // One-step rollouts from a fixed start; binomial 3-sigma band.
        let transitions = vec![
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        ];
        let mdp = TabularMdp::new(2, 2, transitions, vec![1.0, 0.0], 0.9, None).unwrap();
        let p = 0.3;
        let policy = Policy::new(vec![vec![p, 1.0 - p], vec![0.5, 0.5]]).unwrap();
        let n = 100_000usize;
        let ds = sample_trajectories(&mdp, &policy, n, 1, 7, false, meta()).unwrap();
        let count = ds
            .records()
            .iter()
            .filter(|r| r.action == 0)
            .count() as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (count - n as f64 * p).abs() <= 3.0 * sigma,
            "count {count} outside 3 sigma of {}",
            n as f64 * p
        );
    }

    #[test]
    fn initial_distribution_uses_first_states() {
        let ds = Dataset::new(
            meta(),
            vec![
                record(0, 0, 0, 0, 1, false),
                record(0, 1, 1, 0, 1, false),
                record(1, 0, 1, 0, 0, false),
                record(2, 0, 0, 1, 1, false),
            ],
        )
        .unwrap();
        let mu = ds.initial_distribution(3).unwrap();
        assert_eq!(mu, vec![2.0 / 3.0, 1.0 / 3.0, 0.0]);
    }

    #[test]
    fn contiguity_and_flag_violations_rejected() {
        let split = Dataset::new(
            meta(),
            vec![
                record(0, 0, 0, 0, 1, false),
                record(1, 0, 1, 0, 0, false),
                record(0, 1, 1, 0, 1, false),
            ],
        );
        assert!(split.is_err());
        let mixed = Dataset::new(
            meta(),
            vec![record(0, 0, 0, 0, 1, true), record(0, 1, 1, 0, 1, false)],
        );
        assert!(mixed.is_err());
    }

    #[test]
    fn concat_remaps_trajectory_ids() {
        let a = Dataset::new(meta(), vec![record(0, 0, 0, 0, 1, true)]).unwrap();
        let b = Dataset::new(meta(), vec![record(0, 0, 1, 1, 0, false)]).unwrap();
        let merged = Dataset::concat(meta(), &[&a, &b]).unwrap();
        let ids: Vec<u32> = merged.records().iter().map(|r| r.traj_id).collect();
        assert_eq!(ids, vec![0, 1]);
        assert_eq!(merged.expert_subset().unwrap().len(), 1);
    }

    #[test]
    fn round_trip_through_text_format() {
        let mdp = small_mdp(0.9);
        let policy = Policy::uniform(2, 2);
        let ds = sample_trajectories(&mdp, &policy, 4, 6, 11, true, meta()).unwrap();
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        let back = Dataset::read_from(&buf[..]).unwrap();
        assert_eq!(ds, back);
    }
}
