//! The source/target weighting factor: the indicator rule that yields the
//! min-error guarantee, and the smooth harmonic interpolation driven by
//! empirical density-ratio errors with a moving average.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Deltas below this are treated as exactly converged.
const DELTA_EPS: f64 = 1e-12;

/// How the weighting factor is chosen each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaMode {
    /// Hard indicator: 0 when the target error is no larger, else 1.
    TheoreticalIndicator,
    /// Harmonic inverse-error interpolation with a moving-averaged target
    /// delta.
    HarmonicAdaptive,
    /// A constant weight in [0, 1].
    Fixed(f64),
}

impl BetaMode {
    pub fn validate(&self) -> Result<()> {
        if let BetaMode::Fixed(v) = self {
            if !(0.0..=1.0).contains(v) {
                return Err(CoreError::InvalidArgument(format!(
                    "fixed beta must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Indicator weighting: prefers the domain with the smaller expected
/// density-ratio error; ties go to the target (beta = 0).
pub fn beta_theoretical(delta_src_bar: f64, delta_tar_bar: f64) -> f64 {
    debug_assert!(delta_src_bar >= 0.0 && delta_tar_bar >= 0.0);
    if delta_tar_bar <= delta_src_bar {
        0.0
    } else {
        1.0
    }
}

/// Harmonic weighting: beta = (1/d_src) / (1/d_src + 1/d_ma), which equals
/// d_ma / (d_src + d_ma). Exceeds one half exactly when the source error is
/// the smaller one; returns 0.5 when both errors have vanished.
pub fn beta_adaptive(delta_src: f64, delta_ma: f64) -> f64 {
    debug_assert!(delta_src >= 0.0 && delta_ma >= 0.0);
    if delta_src < DELTA_EPS && delta_ma < DELTA_EPS {
        return 0.5;
    }
    delta_ma / (delta_src + delta_ma)
}

/// Running bookkeeping for the adaptive weight: the latest observed errors
/// and the exponentially smoothed target error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaState {
    pub psi: f64,
    pub mode: BetaMode,
    pub delta_src: f64,
    pub delta_tar: f64,
    pub delta_ma: Option<f64>,
}

impl BetaState {
    pub fn new(psi: f64, mode: BetaMode) -> Result<Self> {
        if !(0.0..1.0).contains(&psi) {
            return Err(CoreError::InvalidArgument(format!(
                "smoothing factor must lie in [0, 1), got {psi}"
            )));
        }
        mode.validate()?;
        Ok(Self {
            psi,
            mode,
            delta_src: 0.0,
            delta_tar: 0.0,
            delta_ma: None,
        })
    }

    /// Records the iteration's error estimates and advances the moving
    /// average (initialized at the first observed target delta).
    pub fn observe(&mut self, delta_src: f64, delta_tar: f64) {
        self.delta_src = delta_src;
        self.delta_tar = delta_tar;
        self.delta_ma = Some(moving_average_update(self.psi, self.delta_ma, delta_tar));
    }

    /// The weight for the current iteration under the configured mode.
    pub fn beta(&self) -> f64 {
        match self.mode {
            BetaMode::Fixed(v) => v,
            BetaMode::TheoreticalIndicator => beta_theoretical(self.delta_src, self.delta_tar),
            BetaMode::HarmonicAdaptive => {
                beta_adaptive(self.delta_src, self.delta_ma.unwrap_or(self.delta_tar))
            }
        }
    }
}

/// One step of the moving-average recurrence
/// ma <- psi * ma + (1 - psi) * new; the first observation seeds it.
pub fn moving_average_update(psi: f64, previous: Option<f64>, new_delta_tar: f64) -> f64 {
    match previous {
        None => new_delta_tar,
        Some(ma) => psi * ma + (1.0 - psi) * new_delta_tar,
    }
}
