//! Join-stable certificates over explicit LP polytopes: optimal-face
//! invariance, common dual multipliers with active-set stability, and
//! directional no-gain along a tangent cone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::lp::{self, LpProblem, LpSolution, LpStatus, Relation, Sense, VarBound};
use crate::value::ValueFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedRow {
    pub name: String,
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl NamedRow {
    pub fn new(name: &str, coeffs: Vec<f64>, rhs: f64) -> Self {
        Self {
            name: name.to_string(),
            coeffs,
            rhs,
        }
    }
}

/// `{x : A x <= b}` with named rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    dim: usize,
    rows: Vec<NamedRow>,
}

impl Polytope {
    pub fn new(dim: usize, rows: Vec<NamedRow>) -> Result<Self> {
        for r in &rows {
            if r.coeffs.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.coeffs.len(),
                });
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if rows[..i].iter().any(|o| o.name == r.name) {
                return Err(Error::InvalidFamily(format!(
                    "duplicate row name {:?}",
                    r.name
                )));
            }
        }
        let p = Self { dim, rows };
        let sol = lp::solve(&p.problem(&vec![0.0; dim]))?;
        match sol.status {
            LpStatus::Optimal => Ok(p),
            LpStatus::Infeasible => Err(Error::Infeasible),
            other => Err(Error::LpFailure(other)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[NamedRow] {
        &self.rows
    }

    fn problem(&self, c: &[f64]) -> LpProblem {
        let mut p = LpProblem::new(Sense::Maximize, c.to_vec());
        for r in &self.rows {
            p.add_row(r.coeffs.clone(), Relation::Le, r.rhs);
        }
        p
    }

    fn maximize(&self, c: &[f64]) -> Result<LpSolution> {
        if c.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: c.len(),
            });
        }
        let sol = lp::solve(&self.problem(c))?;
        match sol.status {
            LpStatus::Optimal => Ok(sol),
            LpStatus::Unbounded => Err(Error::Unbounded),
            LpStatus::Infeasible => Err(Error::Infeasible),
            other => Err(Error::LpFailure(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceDescription {
    pub value: f64,
    /// A vertex maximizer.
    pub maximizer: Vec<f64>,
    /// Rows tight at `maximizer`.
    pub active_rows: Vec<String>,
    /// Rows tight on the whole optimal face.
    pub face_rows: Vec<String>,
    /// Outward normals of `face_rows`; they generate the face's normal cone.
    pub normal_generators: Vec<Vec<f64>>,
    pub duals: Vec<f64>,
    pub dual_value: f64,
}

pub fn optimal_face(p: &Polytope, c: &[f64], tol: f64) -> Result<FaceDescription> {
    let sol = p.maximize(c)?;
    let value = sol.objective;
    let active_rows: Vec<usize> = sol.active.clone();

    // A row bounds the whole face iff its slack cannot grow while staying optimal.
    let mut face_rows = Vec::new();
    for &i in &active_rows {
        let row = &p.rows[i];
        let mut q = LpProblem::new(Sense::Maximize, row.coeffs.iter().map(|v| -v).collect());
        for r in &p.rows {
            q.add_row(r.coeffs.clone(), Relation::Le, r.rhs);
        }
        q.add_row(c.to_vec(), Relation::Ge, value - tol * (1.0 + value.abs()));
        let s = lp::solve(&q)?;
        let max_slack = match s.status {
            LpStatus::Optimal => row.rhs + s.objective,
            LpStatus::Unbounded => f64::INFINITY,
            other => return Err(Error::LpFailure(other)),
        };
        if max_slack <= 1e3 * tol {
            face_rows.push(i);
        }
    }
    let dual_value = p.rows.iter().zip(&sol.duals).map(|(r, y)| r.rhs * y).sum();
    Ok(FaceDescription {
        value,
        maximizer: sol.x.clone(),
        active_rows: active_rows
            .iter()
            .map(|&i| p.rows[i].name.clone())
            .collect(),
        face_rows: face_rows.iter().map(|&i| p.rows[i].name.clone()).collect(),
        normal_generators: face_rows
            .iter()
            .map(|&i| p.rows[i].coeffs.clone())
            .collect(),
        duals: sol.duals,
        dual_value,
    })
}

/// Whether `c` is a nonnegative combination of `generators`.
pub fn in_normal_cone(generators: &[Vec<f64>], c: &[f64]) -> Result<bool> {
    let k = generators.len();
    let mut q = LpProblem::new(Sense::Minimize, vec![0.0; k]).with_bounds(VarBound::NonNegative);
    for (j, &cj) in c.iter().enumerate() {
        q.add_row(generators.iter().map(|g| g[j]).collect(), Relation::Eq, cj);
    }
    Ok(lp::solve(&q)?.status == LpStatus::Optimal)
}

/// A base polytope with label-conditional refinements and a common objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedFamily {
    base: Polytope,
    refinements: BTreeMap<String, Polytope>,
    weights: BTreeMap<String, f64>,
    objective: Vec<f64>,
}

impl RefinedFamily {
    pub fn new(
        base: Polytope,
        refinements: BTreeMap<String, Polytope>,
        weights: BTreeMap<String, f64>,
        objective: Vec<f64>,
        tol: f64,
    ) -> Result<Self> {
        if objective.len() != base.dim {
            return Err(Error::DimensionMismatch {
                expected: base.dim,
                found: objective.len(),
            });
        }
        if refinements.is_empty() {
            return Err(Error::InvalidFamily("no refinements".into()));
        }
        for (y, r) in &refinements {
            if r.dim != base.dim {
                return Err(Error::InvalidFamily(format!(
                    "refinement {y:?} has dimension {}",
                    r.dim
                )));
            }
            if !weights.contains_key(y) {
                return Err(Error::InvalidFamily(format!(
                    "refinement {y:?} has no weight"
                )));
            }
            // Containment: no base row can be violated inside the refinement.
            for row in &base.rows {
                let s = lp::solve(&r.problem(&row.coeffs))?;
                let excess = match s.status {
                    LpStatus::Optimal => s.objective - row.rhs,
                    LpStatus::Unbounded => f64::INFINITY,
                    other => return Err(Error::LpFailure(other)),
                };
                if excess > tol {
                    return Err(Error::InvalidFamily(format!(
                        "refinement {y:?} leaves the base polytope through row {:?}",
                        row.name
                    )));
                }
            }
        }
        if let Some(y) = weights.keys().find(|y| !refinements.contains_key(*y)) {
            return Err(Error::InvalidFamily(format!(
                "weight for unknown label {y:?}"
            )));
        }
        if weights.values().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidFamily("weights must be nonnegative".into()));
        }
        Ok(Self {
            base,
            refinements,
            weights,
            objective,
        })
    }

    pub fn base(&self) -> &Polytope {
        &self.base
    }

    pub fn refinements(&self) -> &BTreeMap<String, Polytope> {
        &self.refinements
    }

    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    /// Pools the refinements of two families over the same base and objective.
    pub fn join(&self, other: &RefinedFamily, tol: f64) -> Result<RefinedFamily> {
        if self.base != other.base || self.objective != other.objective {
            return Err(Error::InvalidFamily(
                "families differ in base or objective".into(),
            ));
        }
        let mut refinements = BTreeMap::new();
        let mut weights = BTreeMap::new();
        for (tag, fam) in [("a", self), ("b", other)] {
            for (y, p) in &fam.refinements {
                refinements.insert(format!("{tag}:{y}"), p.clone());
                weights.insert(format!("{tag}:{y}"), fam.weights[y]);
            }
        }
        RefinedFamily::new(
            self.base.clone(),
            refinements,
            weights,
            self.objective.clone(),
            tol,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFamily {
    pub name: String,
    pub family: RefinedFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelFace {
    pub label: String,
    pub value: f64,
    pub maximizer: Vec<f64>,
    pub on_face: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceStability {
    pub stable: bool,
    pub violating: Option<String>,
    pub base_value: f64,
    pub face_rows: Vec<String>,
    pub labels: Vec<LabelFace>,
}

/// Checks that every refinement's maximizers stay on the base optimal face.
pub fn face_stability(f: &RefinedFamily, tol: f64) -> Result<FaceStability> {
    let base = optimal_face(&f.base, &f.objective, tol)?;
    let face_rows: Vec<&NamedRow> = f
        .base
        .rows
        .iter()
        .filter(|r| base.face_rows.contains(&r.name))
        .collect();
    let mut labels = Vec::new();
    for (y, p) in &f.refinements {
        let sol = p.maximize(&f.objective)?;
        let tight = face_rows.iter().all(|r| {
            let act: f64 = r.coeffs.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
            (act - r.rhs).abs() <= tol * (1.0 + r.rhs.abs())
        });
        let on_face = sol.objective >= base.value - tol * (1.0 + base.value.abs()) && tight;
        labels.push(LabelFace {
            label: y.clone(),
            value: sol.objective,
            maximizer: sol.x,
            on_face,
        });
    }
    let violating = labels.iter().find(|l| !l.on_face).map(|l| l.label.clone());
    Ok(FaceStability {
        stable: violating.is_none(),
        violating,
        base_value: base.value,
        face_rows: base.face_rows,
        labels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelDual {
    pub label: String,
    pub primal_value: f64,
    /// `<b_y, lambda*>`; present when a common multiplier exists.
    pub dual_value: Option<f64>,
    pub active_rows: Vec<String>,
    pub active_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommonDual {
    pub exists: bool,
    /// Common multiplier by row name.
    pub multipliers: Option<BTreeMap<String, f64>>,
    /// Rows active for every label; set when the multiplier's support lies in it.
    pub active_set: Option<Vec<String>>,
    pub active_set_stable: bool,
    pub constant_rank: bool,
    /// First pair of labels with no common multiplier.
    pub conflict: Option<(String, String)>,
    pub labels: Vec<LabelDual>,
}

struct LabelLp<'a> {
    label: &'a str,
    poly: &'a Polytope,
    value: f64,
    active: Vec<String>,
}

/// Searches for one multiplier vector that is dual optimal for every
/// refinement at once.
pub fn common_dual(f: &RefinedFamily, tol: f64) -> Result<CommonDual> {
    let mut names: Vec<String> = Vec::new();
    for p in f.refinements.values() {
        for r in &p.rows {
            if !names.contains(&r.name) {
                names.push(r.name.clone());
            }
        }
    }
    let mut solved = Vec::new();
    for (y, p) in &f.refinements {
        let sol = p.maximize(&f.objective)?;
        solved.push(LabelLp {
            label: y,
            poly: p,
            value: sol.objective,
            active: sol.active.iter().map(|&i| p.rows[i].name.clone()).collect(),
        });
    }
    let common_active: Vec<String> = names
        .iter()
        .filter(|n| solved.iter().all(|s| s.active.contains(n)))
        .cloned()
        .collect();

    let all: Vec<&LabelLp> = solved.iter().collect();
    let sol = stacked_dual(&names, &all, &f.objective, &common_active)?;

    let mut labels: Vec<LabelDual> = solved
        .iter()
        .map(|s| LabelDual {
            label: s.label.to_string(),
            primal_value: s.value,
            dual_value: None,
            active_rows: s.active.clone(),
            active_rank: rank(
                &s.poly
                    .rows
                    .iter()
                    .filter(|r| s.active.contains(&r.name))
                    .map(|r| r.coeffs.clone())
                    .collect::<Vec<_>>(),
            ),
        })
        .collect();
    let active_set_stable = solved.windows(2).all(|w| w[0].active == w[1].active);
    let constant_rank = labels
        .windows(2)
        .all(|w| w[0].active_rank == w[1].active_rank);

    let Some(lambda) = sol else {
        let mut conflict = None;
        'outer: for i in 0..solved.len() {
            for j in i + 1..solved.len() {
                if stacked_dual(&names, &[&solved[i], &solved[j]], &f.objective, &[])?.is_none() {
                    conflict = Some((solved[i].label.to_string(), solved[j].label.to_string()));
                    break 'outer;
                }
            }
        }
        return Ok(CommonDual {
            exists: false,
            multipliers: None,
            active_set: None,
            active_set_stable,
            constant_rank,
            conflict,
            labels,
        });
    };

    for (ld, s) in labels.iter_mut().zip(&solved) {
        let dv: f64 = s
            .poly
            .rows
            .iter()
            .map(|r| {
                let k = names.iter().position(|n| n == &r.name).unwrap_or(0);
                r.rhs * lambda[k]
            })
            .sum();
        ld.dual_value = Some(dv);
    }
    let support_in_common = names
        .iter()
        .zip(&lambda)
        .all(|(n, &l)| l <= tol || common_active.contains(n));
    Ok(CommonDual {
        exists: true,
        multipliers: Some(names.iter().cloned().zip(lambda.iter().copied()).collect()),
        active_set: support_in_common.then(|| common_active.clone()),
        active_set_stable,
        constant_rank,
        conflict: None,
        labels,
    })
}

/// Multiplier optimal for every listed refinement, favouring strictly
/// positive weight on `prefer` (max-min slack), or `None` if there is none.
fn stacked_dual(
    names: &[String],
    lps: &[&LabelLp],
    c: &[f64],
    prefer: &[String],
) -> Result<Option<Vec<f64>>> {
    let k = names.len();
    // Variables: lambda_0..lambda_{k-1} >= 0, then t (free).
    let mut objective = vec![0.0; k + 1];
    objective[k] = 1.0;
    let mut q = LpProblem::new(Sense::Maximize, objective);
    q.bounds = vec![VarBound::NonNegative; k];
    q.bounds.push(VarBound::Free);
    for s in lps {
        let col = |name: &str| names.iter().position(|n| n == name).unwrap_or(0);
        for (j, &cj) in c.iter().enumerate() {
            let mut row = vec![0.0; k + 1];
            for r in &s.poly.rows {
                row[col(&r.name)] = r.coeffs[j];
            }
            q.add_row(row, Relation::Eq, cj);
        }
        let mut row = vec![0.0; k + 1];
        for r in &s.poly.rows {
            row[col(&r.name)] = r.rhs;
        }
        q.add_row(row, Relation::Eq, s.value);
        for (i, n) in names.iter().enumerate() {
            if !s.poly.rows.iter().any(|r| &r.name == n) {
                let mut row = vec![0.0; k + 1];
                row[i] = 1.0;
                q.add_row(row, Relation::Eq, 0.0);
            }
        }
    }
    for (i, n) in names.iter().enumerate() {
        if prefer.contains(n) {
            let mut row = vec![0.0; k + 1];
            row[k] = 1.0;
            row[i] = -1.0;
            q.add_row(row, Relation::Le, 0.0);
        }
    }
    let mut cap = vec![0.0; k + 1];
    cap[k] = 1.0;
    q.add_row(cap, Relation::Le, 1.0);
    let sol = lp::solve(&q)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some(sol.x[..k].to_vec())),
        LpStatus::Infeasible => Ok(None),
        other => Err(Error::LpFailure(other)),
    }
}

fn rank(rows: &[Vec<f64>]) -> usize {
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let cols = a.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..a.len()).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())) else {
            break;
        };
        if a[p][c].abs() < 1e-10 {
            continue;
        }
        a.swap(r, p);
        let pivot = a[r].clone();
        for row in a.iter_mut().skip(r + 1) {
            let f = row[c] / pivot[c];
            for (v, pv) in row.iter_mut().zip(&pivot) {
                *v -= f * pv;
            }
        }
        r += 1;
    }
    r
}

/// Mean-preserving directions reachable by conditioning on a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentCone {
    generators: Vec<Vec<f64>>,
}

impl TangentCone {
    pub fn new(generators: Vec<Vec<f64>>, tol: f64) -> Result<Self> {
        for (i, h) in generators.iter().enumerate() {
            if h.iter().sum::<f64>().abs() > tol || h.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidCone(i));
            }
        }
        Ok(Self { generators })
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }
}

/// A cone to probe at a point against one date's posterior value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeProbe {
    pub name: String,
    pub date: u32,
    pub point: Belief,
    pub cone: TangentCone,
}

pub const DERIVATIVE_STEPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionalDerivative {
    pub direction: Vec<f64>,
    /// One-sided derivative along `direction`.
    pub forward: f64,
    /// One-sided derivative along `-direction`.
    pub backward: f64,
    pub quotients_forward: Vec<f64>,
    pub quotients_backward: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionalReport {
    pub verdict: bool,
    /// Generator with the largest one-sided gain.
    pub worst: Option<usize>,
    pub generators: Vec<DirectionalDerivative>,
    /// Pairwise sums of generators, checking closure under conic combination.
    pub pair_sums: Vec<DirectionalDerivative>,
    pub hull_verdict: bool,
}

fn one_sided(
    u: &ValueFunction,
    s: &Belief,
    h: &[f64],
    generator: usize,
    tol_dir: f64,
) -> Result<(f64, Vec<f64>)> {
    let base = u.eval(s)?;
    let mut quotients = Vec::with_capacity(DERIVATIVE_STEPS.len());
    for &step in &DERIVATIVE_STEPS {
        let moved: Vec<f64> = s
            .weights()
            .iter()
            .zip(h)
            .map(|(x, d)| x + step * d)
            .collect();
        if moved.iter().any(|&v| v < -1e-15) {
            return Err(Error::StepOutOfSimplex { generator, step });
        }
        let point = Belief::new(&moved, 1e-12)?;
        quotients.push((u.eval(&point)? - base) / step);
    }
    // Richardson extrapolation for first-order error over a ratio-10 ladder.
    let r1 = (10.0 * quotients[1] - quotients[0]) / 9.0;
    let r2 = (10.0 * quotients[2] - quotients[1]) / 9.0;
    if (r1 - r2).abs() > tol_dir {
        return Err(Error::NonConvergent {
            generator,
            quotients,
        });
    }
    Ok((r2, quotients))
}

fn derivative_pair(
    u: &ValueFunction,
    s: &Belief,
    h: &[f64],
    idx: usize,
    tol_dir: f64,
) -> Result<DirectionalDerivative> {
    let neg: Vec<f64> = h.iter().map(|v| -v).collect();
    let (forward, qf) = one_sided(u, s, h, idx, tol_dir)?;
    let (backward, qb) = one_sided(u, s, &neg, idx, tol_dir)?;
    Ok(DirectionalDerivative {
        direction: h.to_vec(),
        forward,
        backward,
        quotients_forward: qf,
        quotients_backward: qb,
    })
}

/// One-sided directional derivatives of `u` at `s` along each generator and
/// its negative; the verdict holds when none of them is positive.
pub fn directional_nogain(
    u: &ValueFunction,
    s: &Belief,
    cone: &TangentCone,
    tol_dir: f64,
) -> Result<DirectionalReport> {
    if let Some(h) = cone.generators.iter().find(|h| h.len() != s.dim()) {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: h.len(),
        });
    }
    let generators = cone
        .generators
        .iter()
        .enumerate()
        .map(|(i, h)| derivative_pair(u, s, h, i, tol_dir))
        .collect::<Result<Vec<_>>>()?;
    let no_gain = |d: &DirectionalDerivative| d.forward <= tol_dir && d.backward <= tol_dir;
    let verdict = generators.iter().all(no_gain);
    let worst = generators
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.forward
                .max(a.1.backward)
                .total_cmp(&b.1.forward.max(b.1.backward))
        })
        .map(|(i, _)| i);
    let mut pair_sums = Vec::new();
    let g = &cone.generators;
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            let h: Vec<f64> = g[i].iter().zip(&g[j]).map(|(a, b)| a + b).collect();
            if h.iter().all(|v| v.abs() < 1e-15) {
                continue;
            }
            pair_sums.push(derivative_pair(u, s, &h, i, tol_dir)?);
        }
    }
    let hull_verdict = pair_sums.iter().all(no_gain);
    Ok(DirectionalReport {
        verdict,
        worst,
        generators,
        pair_sums,
        hull_verdict,
    })
}
