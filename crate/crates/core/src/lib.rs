//! Collapse diagnostics for belief-based dynamic mechanisms.
//!
//! Value tables per date are the primitive input. From them the crate builds
//! concave envelopes on the simplex, affine supports at the prior, the
//! non-posterior gain test, date-wise collapse audits and LP certificates.

pub mod belief;
pub mod certificates;
pub mod concavify;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod io;
pub mod lattice;
pub mod lp;
pub mod pipeline;
pub mod support;
pub mod value;

use serde::{Deserialize, Serialize};

pub use belief::{Atom, Belief, Splitting, TypeSpace};
pub use error::{Error, Result};
pub use exec::Exec;
pub use lattice::Lattice;
pub use support::{AffineFunctional, SupportQuery};
pub use value::{DateEntry, Family, Scenario, ValueFunction};

/// Absolute tolerances used across the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Simplex membership, splitting residuals.
    pub simplex: f64,
    /// Revenue-scale verdicts.
    pub val: f64,
    /// LP feasibility and certification.
    pub lp: f64,
    /// Directional derivatives.
    pub dir: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            simplex: 1e-9,
            val: 1e-9,
            lp: 1e-10,
            dir: 1e-6,
        }
    }
}

impl Tolerances {
    /// Replaces the revenue-scale tolerance.
    pub fn with_val(mut self, val: f64) -> Self {
        self.val = val;
        self
    }
}
