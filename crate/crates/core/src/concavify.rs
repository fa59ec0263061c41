//! Concave envelopes on the simplex and the splittings that attain them.
//!
//! The envelope at `s` is the LP
//!
//! ```text
//! max  sum_j lambda_j f(x_j)
//! s.t. sum_j lambda_j x_j = s,  sum_j lambda_j = 1,  lambda >= 0
//! ```
//!
//! over the tabulated points `x_j`. Only the first `n - 1` coordinates enter
//! the barycenter rows, which fixes the gauge of the dual: the row multipliers
//! are the weights and intercept of an affine majorant tight at `s`, with the
//! last type's weight pinned to zero.

use serde::Serialize;

use crate::belief::{validate_splitting, Atom, Belief, SplitReport, Splitting};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lp::{self, LpProblem, LpStatus, Relation, Sense, VarBound};
use crate::support::AffineFunctional;
use crate::value::{Family, PointTable, Scenario};
use crate::Tolerances;

const ATOM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeResult {
    pub value: f64,
    pub splitting: Splitting,
    /// Index into the table's point set for each atom.
    #[serde(skip)]
    pub atom_points: Vec<usize>,
    pub certificate: AffineFunctional,
}

pub fn conc_at(table: &PointTable, s: &Belief) -> Result<EnvelopeResult> {
    if table.is_empty() {
        return Err(Error::LatticeEmpty);
    }
    let n = table.dim();
    if s.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: s.dim(),
        });
    }
    let count = table.len();
    let mut problem =
        LpProblem::new(Sense::Maximize, table.values.clone()).with_bounds(VarBound::NonNegative);
    for i in 0..n - 1 {
        problem.add_row(
            table.points.iter().map(|x| x.weights()[i]).collect(),
            Relation::Eq,
            s.weights()[i],
        );
    }
    problem.add_row(vec![1.0; count], Relation::Eq, 1.0);
    let sol = lp::solve(&problem)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::LpFailure(sol.status));
    }

    let mut picked: Vec<(usize, f64)> = sol
        .x
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > ATOM_FLOOR)
        .map(|(j, &l)| (j, l))
        .collect();
    let mass: f64 = picked.iter().map(|(_, l)| l).sum();
    for (_, l) in picked.iter_mut() {
        *l /= mass;
    }
    let value = picked.iter().map(|&(j, l)| l * table.values[j]).sum();
    let splitting = Splitting {
        atoms: picked
            .iter()
            .map(|&(j, prob)| Atom {
                prob,
                posterior: table.points[j].clone(),
            })
            .collect(),
    };
    let mut weights = sol.duals[..n - 1].to_vec();
    weights.push(0.0);
    Ok(EnvelopeResult {
        value,
        splitting,
        atom_points: picked.iter().map(|&(j, _)| j).collect(),
        certificate: AffineFunctional::new(sol.duals[n - 1], weights),
    })
}

/// Envelope value at every point of the table.
pub fn conc_curve(table: &PointTable, exec: Exec) -> Result<Vec<(Belief, f64)>> {
    exec.map(table.points.as_slice(), |s| {
        conc_at(table, s).map(|r| (s.clone(), r.value))
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerminalDesign {
    pub splitting: Splitting,
    /// Execution date for each atom of the splitting.
    pub dates: Vec<u32>,
    pub value: f64,
    pub envelope_value: f64,
    pub plausibility: SplitReport,
}

/// A date-0 splitting attaining the posterior envelope at the prior, with the
/// earliest best date for each posterior.
pub fn synthesize_terminal(sc: &Scenario, tol: &Tolerances) -> Result<TerminalDesign> {
    let g = sc.benchmark(&Family::Posterior)?;
    let env = conc_at(&g, sc.prior())?;
    let tables = sc.family_tables(&Family::Posterior)?;
    let mut order: Vec<usize> = (0..sc.dates().len()).collect();
    order.sort_by_key(|&k| sc.dates()[k].t);

    let mut dates = Vec::with_capacity(env.atom_points.len());
    let mut value = 0.0;
    for (atom, &j) in env.splitting.atoms.iter().zip(&env.atom_points) {
        let mut best = order[0];
        for &k in &order[1..] {
            if tables[k][j] > tables[best][j] {
                best = k;
            }
        }
        dates.push(sc.dates()[best].t);
        value += atom.prob * tables[best][j];
    }
    let plausibility = validate_splitting(sc.prior(), &env.splitting, tol.simplex, None)?;
    Ok(TerminalDesign {
        splitting: env.splitting,
        dates,
        value,
        envelope_value: env.value,
        plausibility,
    })
}

/// Upper concave hull of points in the plane, by Andrew's monotone chain.
/// Input need not be sorted; output is sorted by abscissa.
pub fn upper_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        // Equal abscissae: keep the higher point.
        if let Some(last) = hull.last() {
            if last.0 == p.0 {
                hull.pop();
            }
        }
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Evaluates a hull from [`upper_hull`] by linear interpolation.
pub fn hull_eval(hull: &[(f64, f64)], x: f64) -> f64 {
    let j = hull.partition_point(|(hx, _)| *hx < x);
    if j < hull.len() && hull[j].0 == x {
        return hull[j].1;
    }
    if j == 0 || j == hull.len() {
        return f64::NEG_INFINITY;
    }
    let (x0, y0) = hull[j - 1];
    let (x1, y1) = hull[j];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}
