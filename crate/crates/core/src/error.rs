use thiserror::Error;

use crate::lp::LpStatus;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("operation requires an optimal solution, got {0:?}")]
    NotOptimal(LpStatus),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("component {index} has negative mass {value}")]
    NegativeMass { index: usize, value: f64 },
    #[error("total mass {0} is not positive")]
    ZeroMass(f64),
    #[error("invalid type space: {0}")]
    InvalidTypeSpace(String),
    #[error("belief {0:?} is not a lattice point")]
    OffLattice(Vec<f64>),
    #[error("invalid value function: {0}")]
    InvalidValueFunction(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("evaluation point set is empty")]
    LatticeEmpty,
    #[error("LP failed with status {0:?}")]
    LpFailure(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("date {0} is not in the scenario")]
    UnknownDate(u32),
    #[error("date {date} has no table for conditioning set {labels:?}")]
    MissingTable { date: u32, labels: Vec<String> },
    #[error("objective is unbounded on the polytope")]
    Unbounded,
    #[error("polytope is empty")]
    Infeasible,
    #[error("invalid polytope family: {0}")]
    InvalidFamily(String),
    #[error("step {step} along generator {generator} leaves the simplex")]
    StepOutOfSimplex { generator: usize, step: f64 },
    #[error("difference quotients along generator {generator} disagree: {quotients:?}")]
    NonConvergent {
        generator: usize,
        quotients: Vec<f64>,
    },
    #[error("generator {0} is not mean-preserving")]
    InvalidCone(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
