//! The DemoDICE core: convex dual of regularized occupancy matching.
//!
//! The dual objective over per-state multipliers nu is
//!
//! ```text
//! L(nu) = (1 - gamma) <mu, nu>
//!       + (1 + alpha) log E_{(s,a) ~ dU} [ exp(A_nu(s,a) / (1 + alpha)) ]
//! ```
//!
//! with A_nu(s,a) = r(s,a) + gamma E_{s'}[nu(s')] - nu(s). Minimizing L by
//! gradient descent and exponentiating the scaled advantage recovers the
//! density ratio w = d*/dU, which weights behavior cloning.

mod bc;
mod discriminator;
mod problem;
mod train;

pub use bc::extract_policy_bc;
pub use discriminator::{
    discriminator_from_masses, fit_discriminator, pseudo_reward_exact, pseudo_reward_from_disc,
    DiscrimMethod, Discriminator, DISCRIMINATOR_CLIP, RATIO_FLOOR,
};
pub use problem::{DiceProblem, GdStep, OptRecord, OptTrace, ADVANTAGE_CLIP_SCALE};
pub use train::{build_empirical_problem, demodice_train, DemodiceOutput};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Hyperparameters of the dual problem and its optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiceConfig {
    /// Regularization weight toward the data distribution, alpha >= 0.
    pub alpha: f64,
    /// Discount factor, 0 <= gamma < 1. Must match the MDP.
    pub gamma: f64,
    /// Gradient-descent step size; `None` selects 1 / L_f.
    pub step_size: Option<f64>,
    /// Number of gradient steps.
    pub iterations: usize,
}

impl DiceConfig {
    pub fn new(alpha: f64, gamma: f64, step_size: Option<f64>, iterations: usize) -> Result<Self> {
        let cfg = Self {
            alpha,
            gamma,
            step_size,
            iterations,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(CoreError::InvalidArgument(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(CoreError::InvalidArgument(format!(
                "gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        if let Some(eta) = self.step_size {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(CoreError::InvalidArgument(format!(
                    "step size must be > 0, got {eta}"
                )));
            }
        }
        if self.iterations == 0 {
            return Err(CoreError::InvalidArgument(
                "iterations must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Smoothness constant of the dual loss: L_f = (1 + gamma)^2 / (1 + alpha).
    pub fn smoothness_constant(&self) -> f64 {
        smoothness_constant(self.gamma, self.alpha)
    }

    /// The configured step size, defaulting to 1 / L_f.
    pub fn effective_step_size(&self) -> f64 {
        self.step_size
            .unwrap_or_else(|| 1.0 / self.smoothness_constant())
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }
}

/// Gradient-Lipschitz constant of the dual loss.
pub fn smoothness_constant(gamma: f64, alpha: f64) -> f64 {
    (1.0 + gamma) * (1.0 + gamma) / (1.0 + alpha)
}
