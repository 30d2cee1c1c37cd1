//! Executable certificates for the properties the algorithms rely on:
//! convexity, smoothness and the null gradient direction of the dual loss,
//! the 1/sqrt(t) convergence envelope of the density ratio, and the
//! pointwise/min error bounds of the hybrid ratio.

mod checks;
mod instances;
mod oracle;

pub use checks::{
    check_lemma1, check_lemma2, check_theorem1, lemma1_suite, render_table, theorem_reports,
    write_certificates, Lemma2Outcome,
};
pub use instances::{random_instance, InstanceParams};
pub use oracle::{
    estimate_growth, estimate_growth_on, oracle_optimum, project_to_optimal_set, GrowthEstimate,
    OracleOptimum,
};

use serde::{Deserialize, Serialize};

/// One verified inequality: `pass` holds exactly when
/// `bound - measured >= -tolerance`, so reports are self-verifying.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub instance: String,
    pub pass: bool,
    pub measured: f64,
    pub bound: f64,
    pub margin: f64,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn evaluate(
        name: impl Into<String>,
        instance: impl Into<String>,
        measured: f64,
        bound: f64,
        tolerance: f64,
    ) -> Self {
        let margin = bound - measured;
        Self {
            name: name.into(),
            instance: instance.into(),
            pass: margin >= -tolerance,
            measured,
            bound,
            margin,
            tolerance,
        }
    }

    /// Recomputes the pass flag from the stored fields.
    pub fn recheck(&self) -> bool {
        self.bound - self.measured >= -self.tolerance
    }
}
