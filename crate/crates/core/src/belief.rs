//! Beliefs over a finite type set, splittings of a prior, and the
//! Bayes-plausibility check that every downstream construction relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, LpProblem, LpStatus, Relation, Sense, VarBound};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeSpace {
    labels: Vec<String>,
}

impl TypeSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::InvalidTypeSpace(format!(
                "need at least two types, got {}",
                labels.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::InvalidTypeSpace(format!("label {i} is empty")));
            }
            if labels[..i].contains(l) {
                return Err(Error::InvalidTypeSpace(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// A point of the probability simplex. Stored normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Clamps components in `[-tol, 0)` to zero and renormalizes.
    pub fn new(weights: &[f64], tol: f64) -> Result<Self> {
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < -tol)
        {
            return Err(Error::NegativeMass { index, value });
        }
        let clamped: Vec<f64> = weights.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        if total <= tol {
            return Err(Error::ZeroMass(total));
        }
        if total == 1.0 {
            return Ok(Self(clamped));
        }
        Ok(Self(clamped.into_iter().map(|v| v / total).collect()))
    }

    /// Builds a belief from weights that are already exactly normalized.
    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        Self(weights)
    }

    pub fn vertex(n: usize, i: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Self(w)
    }

    /// Two-type belief with mass `p` on the first type.
    pub fn binary(p: f64) -> Self {
        Self(vec![p, 1.0 - p])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    /// Mass on the first type; the usual coordinate for two-type spaces.
    pub fn p(&self) -> f64 {
        self.0[0]
    }

    pub fn distance_inf(&self, other: &Belief) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0)
    }
}

pub fn make_belief(space: &TypeSpace, weights: &[f64], tol: f64) -> Result<Belief> {
    if weights.len() != space.len() {
        return Err(Error::DimensionMismatch {
            expected: space.len(),
            found: weights.len(),
        });
    }
    Belief::new(weights, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub prob: f64,
    pub posterior: Belief,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Splitting {
    pub atoms: Vec<Atom>,
}

impl Splitting {
    pub fn degenerate(prior: Belief) -> Self {
        Self {
            atoms: vec![Atom {
                prob: 1.0,
                posterior: prior,
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn barycenter(&self, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; n];
        for a in &self.atoms {
            for (ci, w) in c.iter_mut().zip(a.posterior.weights()) {
                *ci += a.prob * w;
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub barycenter_residual: f64,
    pub probability_residual: f64,
    pub support_size: usize,
    pub within_cap: bool,
    pub plausible: bool,
}

/// Checks that `split` is a mean-preserving spread of `prior`.
///
/// `cap` bounds the support size; `None` uses the type count.
pub fn validate_splitting(
    prior: &Belief,
    split: &Splitting,
    tol: f64,
    cap: Option<usize>,
) -> Result<SplitReport> {
    let n = prior.dim();
    if let Some(a) = split.atoms.iter().find(|a| a.posterior.dim() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.posterior.dim(),
        });
    }
    let center = split.barycenter(n);
    let barycenter_residual = center
        .iter()
        .zip(prior.weights())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mass: f64 = split.atoms.iter().map(|a| a.prob).sum();
    let probability_residual = (mass - 1.0).abs();
    let support_size = split.atoms.len();
    Ok(SplitReport {
        barycenter_residual,
        probability_residual,
        support_size,
        within_cap: support_size <= cap.unwrap_or(n),
        plausible: barycenter_residual <= tol && probability_residual <= tol,
    })
}

/// Convex weights expressing `point` over `anchors`, or `None` if the point
/// is outside their hull.
pub fn barycentric_weights(
    point: &Belief,
    anchors: &[Belief],
    tol: f64,
) -> Result<Option<Vec<f64>>> {
    let n = point.dim();
    if anchors.is_empty() {
        return Err(Error::LatticeEmpty);
    }
    if let Some(a) = anchors.iter().find(|a| a.dim() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.dim(),
        });
    }
    let k = anchors.len();
    let mut lp = LpProblem::new(Sense::Minimize, vec![0.0; k]).with_bounds(VarBound::NonNegative);
    for i in 0..n {
        lp.add_row(
            anchors.iter().map(|a| a.weights()[i]).collect(),
            Relation::Eq,
            point.weights()[i],
        );
    }
    lp.add_row(vec![1.0; k], Relation::Eq, 1.0);
    let sol = lp::solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let lambda = sol.x;
            let residual = (0..n)
                .map(|i| {
                    let v: f64 = lambda
                        .iter()
                        .zip(anchors)
                        .map(|(l, a)| l * a.weights()[i])
                        .sum();
                    (v - point.weights()[i]).abs()
                })
                .fold(0.0, f64::max);
            if residual <= tol {
                Ok(Some(lambda))
            } else {
                Ok(None)
            }
        }
        LpStatus::Infeasible => Ok(None),
        other => Err(Error::LpFailure(other)),
    }
}
