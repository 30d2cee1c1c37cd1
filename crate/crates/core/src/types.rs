//! Shared value containers: per-state vectors and (state, action) tables
//! with explicit support masks.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Flat index of a (state, action) pair.
#[inline]
pub fn sa_index(state: usize, action: usize, n_actions: usize) -> usize {
    state * n_actions + action
}

/// Per-state dual variables; the Lagrange multipliers of the flow
/// constraints, playing the role of a value function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PseudoValue {
    values: Vec<f64>,
}

impl PseudoValue {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite {
                context: "pseudo value".into(),
                state: i,
                action: 0,
            });
        }
        Ok(Self { values })
    }

    pub fn zeros(n_states: usize) -> Self {
        Self {
            values: vec![0.0; n_states],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, state: usize) -> f64 {
        self.values[state]
    }

    /// Adds the same constant to every entry.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    pub fn l2_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn linf_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Dense table over (state, action) pairs with an explicit support mask.
/// Entries outside the support carry no meaning and are never read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
    support: Vec<bool>,
}

impl SaTable {
    /// A table supported on the whole space.
    pub fn full(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        let support = vec![true; n_states * n_actions];
        Self::with_support(n_states, n_actions, values, support)
    }

    pub fn with_support(
        n_states: usize,
        n_actions: usize,
        values: Vec<f64>,
        support: Vec<bool>,
    ) -> Result<Self> {
        let len = n_states * n_actions;
        if values.len() != len || support.len() != len {
            return Err(CoreError::DimensionMismatch(format!(
                "table of {len} pairs, got {} values and {} mask entries",
                values.len(),
                support.len()
            )));
        }
        for idx in 0..len {
            if support[idx] && !values[idx].is_finite() {
                return Err(CoreError::NonFinite {
                    context: "state-action table".into(),
                    state: idx / n_actions,
                    action: idx % n_actions,
                });
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
            support,
        })
    }

    pub fn constant(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![value; n_states * n_actions],
            support: vec![true; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> &[bool] {
        &self.support
    }

    pub fn is_supported(&self, state: usize, action: usize) -> bool {
        self.support[sa_index(state, action, self.n_actions)]
    }

    pub fn get(&self, state: usize, action: usize) -> Option<f64> {
        let idx = sa_index(state, action, self.n_actions);
        self.support[idx].then(|| self.values[idx])
    }

    /// Value at a pair that must be inside the support.
    pub fn require(&self, state: usize, action: usize) -> Result<f64> {
        self.get(state, action).ok_or_else(|| {
            CoreError::SupportViolation(format!("pair ({state}, {action}) outside support"))
        })
    }

    pub fn support_len(&self) -> usize {
        self.support.iter().filter(|&&s| s).count()
    }

    pub fn iter_supported(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.support.iter().enumerate().filter_map(move |(idx, &m)| {
            m.then(|| (idx / self.n_actions, idx % self.n_actions, self.values[idx]))
        })
    }

    /// True when this table is defined everywhere `mask` is set.
    pub fn covers(&self, mask: &[bool]) -> bool {
        mask.len() == self.support.len()
            && mask.iter().zip(&self.support).all(|(&m, &s)| !m || s)
    }

    /// Applies `f` to supported entries, keeping the mask.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        let values = self
            .values
            .iter()
            .zip(&self.support)
            .map(|(&v, &s)| if s { f(v) } else { v })
            .collect();
        Self {
            values,
            ..self.clone()
        }
    }
}

/// Log density ratio log(d_expert / d_data) used as the reward-like signal
/// of the dual problem. Defined only on the support of the data occupancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PseudoReward(pub SaTable);

impl PseudoReward {
    pub fn new(table: SaTable) -> Self {
        Self(table)
    }

    pub fn table(&self) -> &SaTable {
        &self.0
    }
}

/// Importance weights w(s, a) = d_target / d_data, nonnegative on support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRatio {
    pub table: SaTable,
    /// Number of entries whose advantage had to be clipped before the
    /// exponential to stay inside double range.
    pub clip_count: usize,
}

impl DensityRatio {
    pub fn new(table: SaTable, clip_count: usize) -> Result<Self> {
        for (s, a, v) in table.iter_supported() {
            if v < 0.0 {
                return Err(CoreError::InvalidArgument(format!(
                    "density ratio negative at ({s}, {a}): {v}"
                )));
            }
        }
        Ok(Self { table, clip_count })
    }

    pub fn table(&self) -> &SaTable {
        &self.table
    }

    /// Largest supported absolute difference to another ratio on the
    /// intersection of both supports.
    pub fn linf_distance(&self, other: &DensityRatio) -> f64 {
        self.table
            .iter_supported()
            .filter_map(|(s, a, v)| other.table.get(s, a).map(|w| (v - w).abs()))
            .fold(0.0, f64::max)
    }
}
