//! Affine supports of the posterior benchmark at the prior, and their
//! pointwise envelope `H_eps`.
//!
//! `H_eps(s)` maximizes `l(s)` over affine `l` that dominate the benchmark on
//! the evaluation points and exceed its envelope at the prior by at most
//! `eps`. It is computed through its dual, which has one row per coordinate:
//!
//! ```text
//! min  nu (K + eps) - sum_j mu_j g(x_j)
//! s.t. nu S0 - sum_j mu_j x_j = s   (first n - 1 coordinates)
//!      nu    - sum_j mu_j     = 1,   nu, mu >= 0
//! ```
//!
//! An infeasible dual means `H_eps(s)` is unbounded.

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::concavify::conc_at;
use crate::error::{Error, Result};
use crate::lp::{self, LpProblem, LpStatus, Relation, Sense, SolverOptions, VarBound};
use crate::value::{Family, PointTable, Scenario};

/// `l(s) = intercept + <weights, s>`, with the last weight held at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineFunctional {
    pub intercept: f64,
    pub weights: Vec<f64>,
}

impl AffineFunctional {
    pub fn new(intercept: f64, weights: Vec<f64>) -> Self {
        Self { intercept, weights }
    }

    /// Re-expresses an arbitrary `(a, phi)` pair in the zero-last-weight gauge.
    pub fn gauged(intercept: f64, mut weights: Vec<f64>) -> Self {
        let last = weights.last().copied().unwrap_or(0.0);
        for w in weights.iter_mut() {
            *w -= last;
        }
        Self {
            intercept: intercept + last,
            weights,
        }
    }

    pub fn eval(&self, s: &Belief) -> f64 {
        self.intercept
            + self
                .weights
                .iter()
                .zip(s.weights())
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }

    /// Slope in the first-type coordinate of a two-type space.
    pub fn slope(&self) -> f64 {
        self.weights[0] - self.weights.get(1).copied().unwrap_or(0.0)
    }

    /// Largest amount by which `table` exceeds the functional.
    pub fn max_shortfall(&self, table: &PointTable) -> f64 {
        table
            .points
            .iter()
            .zip(&table.values)
            .map(|(s, v)| v - self.eval(s))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportQuery {
    pub prior: Belief,
    pub eps: f64,
}

impl SupportQuery {
    pub fn new(prior: Belief, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::InvalidScenario(format!(
                "eps must be nonnegative, got {eps}"
            )));
        }
        Ok(Self { prior, eps })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HValue {
    Finite {
        value: f64,
        support: AffineFunctional,
    },
    Unbounded,
}

impl HValue {
    pub fn finite(&self) -> Option<f64> {
        match self {
            HValue::Finite { value, .. } => Some(*value),
            HValue::Unbounded => None,
        }
    }
}

/// Everything `H_eps` needs, computed once per (scenario, query).
#[derive(Debug, Clone)]
pub struct SupportEnvelope {
    pub g: PointTable,
    pub query: SupportQuery,
    /// `(conc g)(S0)`.
    pub conc_at_prior: f64,
    /// An exact support of the benchmark at the prior.
    pub support: AffineFunctional,
}

impl SupportEnvelope {
    pub fn new(sc: &Scenario, query: SupportQuery) -> Result<Self> {
        Self::from_table(sc.benchmark(&Family::Posterior)?, query)
    }

    pub fn from_table(g: PointTable, query: SupportQuery) -> Result<Self> {
        let env = conc_at(&g, &query.prior)?;
        Ok(Self {
            g,
            query,
            conc_at_prior: env.value,
            support: env.certificate,
        })
    }

    pub fn pinch(&self) -> f64 {
        self.conc_at_prior + self.query.eps
    }

    pub fn at(&self, s: &Belief) -> Result<HValue> {
        let n = self.g.dim();
        if s.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s.dim(),
            });
        }
        let sol = lp::solve(&self.problem(s, self.pinch()))?;
        // At eps = 0 the cap sits exactly on the envelope; if rounding in
        // conc_at_prior leaves no admissible support, retry with the LP slack.
        let sol = if sol.status == LpStatus::Unbounded {
            let slack = SolverOptions::default().tol * (1.0 + self.conc_at_prior.abs());
            lp::solve(&self.problem(s, self.pinch() + slack))?
        } else {
            sol
        };
        match sol.status {
            LpStatus::Optimal => {
                let mut weights = sol.duals[..n - 1].to_vec();
                weights.push(0.0);
                Ok(HValue::Finite {
                    value: sol.objective,
                    support: AffineFunctional::new(sol.duals[n - 1], weights),
                })
            }
            LpStatus::Infeasible => Ok(HValue::Unbounded),
            other => Err(Error::LpFailure(other)),
        }
    }

    /// Dual of `max l(s)` over the support family, over (mu, nu) >= 0.
    fn problem(&self, s: &Belief, cap: f64) -> LpProblem {
        let n = self.g.dim();
        let prior = &self.query.prior;
        let mut objective = Vec::with_capacity(self.g.len() + 1);
        objective.push(cap);
        objective.extend(self.g.values.iter().map(|v| -v));
        let mut problem =
            LpProblem::new(Sense::Minimize, objective).with_bounds(VarBound::NonNegative);
        for i in 0..n - 1 {
            let mut row = Vec::with_capacity(self.g.len() + 1);
            row.push(prior.weights()[i]);
            row.extend(self.g.points.iter().map(|x| -x.weights()[i]));
            problem.add_row(row, Relation::Eq, s.weights()[i]);
        }
        let mut row = vec![-1.0; self.g.len() + 1];
        row[0] = 1.0;
        problem.add_row(row, Relation::Eq, 1.0);
        problem
    }
}

/// An affine majorant of the benchmark within `eps` of its envelope at the
/// prior. For `eps = 0` it is an exact support.
pub fn eps_support(sc: &Scenario, query: &SupportQuery, tol_val: f64) -> Result<AffineFunctional> {
    let env = SupportEnvelope::new(sc, query.clone())?;
    let l = env.support.clone();
    let shortfall = l.max_shortfall(&env.g);
    let excess = l.eval(&query.prior) - env.pinch();
    if shortfall > tol_val || excess > tol_val {
        return Err(Error::LpFailure(LpStatus::NumericalFailure));
    }
    Ok(l)
}

pub fn h_eps_at(sc: &Scenario, query: &SupportQuery, s: &Belief) -> Result<HValue> {
    SupportEnvelope::new(sc, query.clone())?.at(s)
}

/// Whether `(s, r)` lies strictly above every admissible support.
pub fn in_gain_region(env: &SupportEnvelope, s: &Belief, r: f64, tol_val: f64) -> Result<bool> {
    Ok(match env.at(s)? {
        HValue::Finite { value, .. } => r > value + tol_val,
        HValue::Unbounded => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::TypeSpace;
    use crate::lattice::Lattice;
    use crate::value::{DateEntry, ValueFunction};
    use std::sync::Arc;

    fn single(bp: Vec<(f64, f64)>, prior: f64) -> Scenario {
        let f = ValueFunction::pwl(bp).unwrap();
        Scenario::new(
            TypeSpace::new(["H", "L"]).unwrap(),
            Belief::binary(prior),
            Arc::new(Lattice::binary(1001).unwrap()),
            10.0,
            vec![DateEntry::new(1, f.clone(), f)],
        )
        .unwrap()
    }

    fn loan() -> Scenario {
        single(vec![(0.0, 0.4), (0.5, 0.5), (1.0, 0.4)], 0.8)
    }

    #[test]
    fn loan_support() {
        let sc = loan();
        let q = SupportQuery::new(Belief::binary(0.8), 0.0).unwrap();
        let l = eps_support(&sc, &q, 1e-9).unwrap();
        assert!((l.intercept - 0.6).abs() < 1e-10);
        assert!((l.slope() + 0.2).abs() < 1e-10);
    }

    #[test]
    fn affine_benchmark_supports_itself() {
        let sc = single(vec![(0.0, 0.2), (1.0, 0.7)], 0.4);
        let q = SupportQuery::new(Belief::binary(0.4), 0.0).unwrap();
        let l = eps_support(&sc, &q, 1e-9).unwrap();
        assert!((l.intercept - 0.2).abs() < 1e-10);
        assert!((l.slope() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn vshape_support_is_flat() {
        let sc = single(vec![(0.0, 1.0), (0.5, 0.0), (1.0, 1.0)], 0.5);
        let q = SupportQuery::new(Belief::binary(0.5), 0.0).unwrap();
        let l = eps_support(&sc, &q, 1e-9).unwrap();
        assert!((l.intercept - 1.0).abs() < 1e-10);
        assert!(l.slope().abs() < 1e-10);
    }

    #[test]
    fn loan_h_values() {
        let sc = loan();
        let env = SupportEnvelope::new(&sc, SupportQuery::new(Belief::binary(0.8), 0.0).unwrap())
            .unwrap();
        let h03 = env.at(&Belief::binary(0.3)).unwrap().finite().unwrap();
        assert!((h03 - 0.54).abs() < 1e-10);
        let h01 = env.at(&Belief::binary(0.1)).unwrap().finite().unwrap();
        assert!((h01 - 0.58).abs() < 1e-10);
        let h08 = env.at(&Belief::binary(0.8)).unwrap().finite().unwrap();
        assert!((h08 - env.conc_at_prior).abs() < 1e-10);

        assert!(in_gain_region(&env, &Belief::binary(0.3), 0.56, 1e-9).unwrap());
        assert!(!in_gain_region(&env, &Belief::binary(0.3), 0.50, 1e-9).unwrap());
        assert!(!in_gain_region(&env, &Belief::binary(0.8), env.conc_at_prior, 1e-9).unwrap());
    }

    #[test]
    fn boundary_prior_is_unbounded_elsewhere() {
        let sc = single(vec![(0.0, 0.4), (0.5, 0.5), (1.0, 0.4)], 1.0);
        let env = SupportEnvelope::new(&sc, SupportQuery::new(Belief::binary(1.0), 0.0).unwrap())
            .unwrap();
        assert_eq!(env.at(&Belief::binary(0.3)).unwrap(), HValue::Unbounded);
        assert!(env.at(&Belief::binary(1.0)).unwrap().finite().is_some());
        assert!(!in_gain_region(&env, &Belief::binary(0.3), 100.0, 1e-9).unwrap());
    }

    #[test]
    fn negative_eps_rejected() {
        assert!(SupportQuery::new(Belief::binary(0.5), -1e-3).is_err());
    }

    #[test]
    fn gauge_normalization() {
        let l = AffineFunctional::gauged(1.0, vec![0.5, 0.25]);
        assert_eq!(l.weights[1], 0.0);
        let s = Belief::binary(0.3);
        assert!((l.eval(&s) - (1.0 + 0.5 * 0.3 + 0.25 * 0.7)).abs() < 1e-15);
    }
}
