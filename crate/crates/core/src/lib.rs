//! Tabular implementation of DemoDICE and AdaptDICE: offline imitation
//! learning via distribution correction estimation, with semi-supervised
//! cross-domain transfer between finite MDPs.
//!
//! Everything operates on explicit finite state/action spaces, so occupancy
//! measures, dual losses, density ratios and the convergence guarantees of
//! the algorithms can be computed exactly and verified numerically. The
//! crate is organized as:
//!
//! - [`mdp`]: finite-MDP machinery (occupancy measures, value iteration,
//!   advantage evaluation).
//! - [`dataset`]: transition datasets, trajectory sampling, empirical
//!   occupancies and the on-disk dataset format.
//! - [`dice`]: the DemoDICE core — dual loss, analytic gradient, gradient
//!   descent, density-ratio extraction, discriminator pseudo-rewards and
//!   weighted behavior cloning.
//! - [`crossdomain`]: state/action mapping learning, hybrid density ratios,
//!   adaptive weighting and the full AdaptDICE loop.
//! - [`envs`]: synthetic source/target benchmark pairs with known ground
//!   truth and dataset builders.
//! - [`theory`]: executable certificates for the convexity, smoothness and
//!   convergence properties the algorithms rely on.

pub mod crossdomain;
pub mod dataset;
pub mod dice;
pub mod envs;
pub mod error;
pub mod mdp;
pub mod rng;
pub mod theory;
pub mod types;

pub use crate::dataset::{empirical_occupancy, sample_trajectories, DataFilter, Dataset, DatasetMeta, Transition, Weighting};
pub use crate::dice::{DiceConfig, DiceProblem, Discriminator, OptTrace};
pub use crate::error::{CoreError, Result};
pub use crate::mdp::{occupancy_measure, OccupancyMeasure, Policy, TabularMdp};
pub use crate::types::{DensityRatio, PseudoReward, PseudoValue, SaTable};
