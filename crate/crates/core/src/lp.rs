//! Dense two-phase revised simplex with dual extraction.
//!
//! Problems are stated over free, nonnegative or nonpositive variables with
//! `<=`, `=` and `>=` rows. Internally they are rewritten in standard form
//! (`min c'x`, `Ax = b`, `b >= 0`, `x >= 0`) and solved with an explicit basis
//! inverse, which is cheap because every LP built by this crate has few rows.
//!
//! Dual values follow the shadow-price convention: `duals[i]` is the rate of
//! change of the optimal objective with respect to `rows[i].rhs`. For a
//! maximization this makes multipliers of binding `<=` rows nonnegative.

use serde::{Deserialize, Serialize};

use crate::error::LpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarBound {
    Free,
    NonNegative,
    NonPositive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub bounds: Vec<VarBound>,
}

impl LpProblem {
    /// A problem over `objective.len()` free variables and no rows.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let bounds = vec![VarBound::Free; objective.len()];
        Self {
            sense,
            objective,
            rows: Vec::new(),
            bounds,
        }
    }

    pub fn with_bounds(mut self, bound: VarBound) -> Self {
        self.bounds = vec![bound; self.objective.len()];
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> usize {
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if self.bounds.len() != n {
            return Err(LpError::DimensionMismatch {
                what: "bounds".into(),
                expected: n,
                found: self.bounds.len(),
            });
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("objective".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::DimensionMismatch {
                    what: format!("row {i}"),
                    expected: n,
                    found: row.coeffs.len(),
                });
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(LpError::NonFinite(format!("row {i}")));
            }
        }
        Ok(())
    }

    /// Row activity `a_i . x`.
    pub fn activity(&self, row: usize, x: &[f64]) -> f64 {
        dot(&self.rows[row].coeffs, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals: Vec<f64>,
    /// Rows tight at `x` within the solver tolerance; equality rows always.
    pub active: Vec<usize>,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl LpSolution {
    fn with_status(status: LpStatus, iterations: usize) -> Self {
        Self {
            status,
            x: Vec::new(),
            objective: f64::NAN,
            duals: Vec::new(),
            active: Vec::new(),
            residuals: Residuals::default(),
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pricing {
    /// Smallest-index entering and leaving variable throughout.
    Bland,
    /// Most negative reduced cost, dropping to Bland's rule after a run of
    /// degenerate pivots.
    Dantzig,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Certification tolerance for residuals and active rows.
    pub tol: f64,
    pub pricing: Pricing,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            pricing: Pricing::Bland,
            max_iterations: 200_000,
        }
    }
}

const PIVOT_TOL: f64 = 1e-11;
const OPT_TOL: f64 = 1e-12;
const REFACTOR_EVERY: usize = 40;
const DEGENERATE_STREAK: usize = 30;

pub fn solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    solve_with(problem, &SolverOptions::default())
}

pub fn solve_with(problem: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let std = StandardForm::build(problem);
    let mut engine = Simplex::new(&std, opts);

    let phase1 = engine.run(Phase::One);
    if phase1 == Outcome::IterationLimit {
        return Ok(LpSolution::with_status(
            LpStatus::NumericalFailure,
            engine.iterations,
        ));
    }
    let infeasibility: f64 = engine
        .basis
        .iter()
        .zip(&engine.xb)
        .filter(|(&j, _)| j >= std.ncols)
        .map(|(_, v)| v.max(0.0))
        .sum();
    let bscale = 1.0 + std.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if infeasibility > opts.tol * bscale {
        return Ok(LpSolution::with_status(
            LpStatus::Infeasible,
            engine.iterations,
        ));
    }
    engine.drive_out_artificials();

    match engine.run(Phase::Two) {
        Outcome::Optimal => {}
        Outcome::Unbounded => {
            return Ok(LpSolution::with_status(
                LpStatus::Unbounded,
                engine.iterations,
            ))
        }
        Outcome::IterationLimit => {
            return Ok(LpSolution::with_status(
                LpStatus::NumericalFailure,
                engine.iterations,
            ))
        }
    }
    engine.refactor();
    Ok(engine.extract(problem, opts))
}

/// Options for [`dual_face`]: a secondary linear objective over the row
/// multipliers plus optional extra restrictions on them.
#[derive(Debug, Clone)]
pub struct DualObjective {
    pub sense: Sense,
    pub weights: Vec<f64>,
    pub extra_rows: Vec<Row>,
}

/// Optimizes a secondary objective over the optimal dual set of `problem`.
///
/// The returned solution's `x` is a multiplier vector (one entry per row of
/// `problem`, same sign convention as [`LpSolution::duals`]).
pub fn dual_face(
    problem: &LpProblem,
    primal: &LpSolution,
    secondary: &DualObjective,
) -> Result<LpSolution, LpError> {
    if !primal.is_optimal() {
        return Err(LpError::NotOptimal(primal.status));
    }
    let m = problem.rows.len();
    if secondary.weights.len() != m {
        return Err(LpError::DimensionMismatch {
            what: "dual weights".into(),
            expected: m,
            found: secondary.weights.len(),
        });
    }
    let mut dual = LpProblem::new(secondary.sense, secondary.weights.clone());
    // Sign of each multiplier under the shadow-price convention.
    dual.bounds = problem
        .rows
        .iter()
        .map(|r| match (problem.sense, r.relation) {
            (_, Relation::Eq) => VarBound::Free,
            (Sense::Maximize, Relation::Le) | (Sense::Minimize, Relation::Ge) => {
                VarBound::NonNegative
            }
            (Sense::Maximize, Relation::Ge) | (Sense::Minimize, Relation::Le) => {
                VarBound::NonPositive
            }
        })
        .collect();
    for (j, &cj) in problem.objective.iter().enumerate() {
        let coeffs: Vec<f64> = problem.rows.iter().map(|r| r.coeffs[j]).collect();
        let relation =
            match (problem.bounds[j], problem.sense) {
                (VarBound::Free, _) => Relation::Eq,
                (VarBound::NonNegative, Sense::Maximize)
                | (VarBound::NonPositive, Sense::Minimize) => Relation::Ge,
                (VarBound::NonNegative, Sense::Minimize)
                | (VarBound::NonPositive, Sense::Maximize) => Relation::Le,
            };
        dual.add_row(coeffs, relation, cj);
    }
    let value = primal.objective;
    let slack = SolverOptions::default().tol * (1.0 + value.abs());
    let b: Vec<f64> = problem.rows.iter().map(|r| r.rhs).collect();
    match problem.sense {
        Sense::Maximize => dual.add_row(b, Relation::Le, value + slack),
        Sense::Minimize => dual.add_row(b, Relation::Ge, value - slack),
    };
    for row in &secondary.extra_rows {
        dual.add_row(row.coeffs.clone(), row.relation, row.rhs);
    }
    solve(&dual)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy)]
enum VarMap {
    Single { col: usize, sign: f64 },
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    m: usize,
    /// Structural columns (variables then slacks), each of length `m`.
    cols: Vec<Vec<f64>>,
    ncols: usize,
    b: Vec<f64>,
    cost: Vec<f64>,
    vars: Vec<VarMap>,
    flip: Vec<f64>,
}

impl StandardForm {
    fn build(p: &LpProblem) -> Self {
        let m = p.rows.len();
        let flip: Vec<f64> = p
            .rows
            .iter()
            .map(|r| if r.rhs < 0.0 { -1.0 } else { 1.0 })
            .collect();
        let obj_sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cols = Vec::new();
        let mut cost = Vec::new();
        let mut vars = Vec::with_capacity(p.num_vars());
        let column_of = |j: usize, s: f64| -> Vec<f64> {
            p.rows
                .iter()
                .zip(&flip)
                .map(|(r, f)| s * f * r.coeffs[j])
                .collect()
        };
        for (j, bound) in p.bounds.iter().enumerate() {
            match bound {
                VarBound::NonNegative | VarBound::NonPositive => {
                    let sign = if *bound == VarBound::NonNegative {
                        1.0
                    } else {
                        -1.0
                    };
                    vars.push(VarMap::Single {
                        col: cols.len(),
                        sign,
                    });
                    cols.push(column_of(j, sign));
                    cost.push(obj_sign * sign * p.objective[j]);
                }
                VarBound::Free => {
                    vars.push(VarMap::Split {
                        pos: cols.len(),
                        neg: cols.len() + 1,
                    });
                    cols.push(column_of(j, 1.0));
                    cols.push(column_of(j, -1.0));
                    cost.push(obj_sign * p.objective[j]);
                    cost.push(-obj_sign * p.objective[j]);
                }
            }
        }
        for (i, r) in p.rows.iter().enumerate() {
            let s = match r.relation {
                Relation::Le => 1.0,
                Relation::Ge => -1.0,
                Relation::Eq => continue,
            };
            let mut col = vec![0.0; m];
            col[i] = s * flip[i];
            cols.push(col);
            cost.push(0.0);
        }
        let b = p.rows.iter().zip(&flip).map(|(r, f)| f * r.rhs).collect();
        let ncols = cols.len();
        Self {
            m,
            cols,
            ncols,
            b,
            cost,
            vars,
            flip,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Simplex<'a> {
    sf: &'a StandardForm,
    opts: &'a SolverOptions,
    /// Basic variable per row; indices `>= ncols` are row artificials.
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<Vec<f64>>,
    xb: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

impl<'a> Simplex<'a> {
    fn new(sf: &'a StandardForm, opts: &'a SolverOptions) -> Self {
        let m = sf.m;
        let mut binv = vec![vec![0.0; m]; m];
        for (i, row) in binv.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self {
            sf,
            opts,
            basis: (0..m).map(|i| sf.ncols + i).collect(),
            is_basic: vec![false; sf.ncols],
            binv,
            xb: sf.b.clone(),
            iterations: 0,
            since_refactor: 0,
        }
    }

    fn cost(&self, j: usize, phase: Phase) -> f64 {
        match phase {
            Phase::One => {
                if j >= self.sf.ncols {
                    1.0
                } else {
                    0.0
                }
            }
            Phase::Two => {
                if j >= self.sf.ncols {
                    0.0
                } else {
                    self.sf.cost[j]
                }
            }
        }
    }

    /// `B^{-1} a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        if j >= self.sf.ncols {
            let r = j - self.sf.ncols;
            return self.binv.iter().map(|row| row[r]).collect();
        }
        let col = &self.sf.cols[j];
        self.binv.iter().map(|row| dot(row, col)).collect()
    }

    /// Simplex multipliers `c_B^T B^{-1}`.
    fn multipliers(&self, phase: Phase) -> Vec<f64> {
        let m = self.sf.m;
        let mut y = vec![0.0; m];
        for (i, &j) in self.basis.iter().enumerate() {
            let c = self.cost(j, phase);
            if c != 0.0 {
                for (yk, bk) in y.iter_mut().zip(&self.binv[i]) {
                    *yk += c * bk;
                }
            }
        }
        y
    }

    fn refactor(&mut self) {
        let m = self.sf.m;
        let mut a = vec![vec![0.0; 2 * m]; m];
        for (k, &j) in self.basis.iter().enumerate() {
            if j >= self.sf.ncols {
                a[j - self.sf.ncols][k] = 1.0;
            } else {
                for (i, v) in self.sf.cols[j].iter().enumerate() {
                    a[i][k] = *v;
                }
            }
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[m + i] = 1.0;
        }
        // Gauss-Jordan with partial pivoting.
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap_or(col);
            if a[piv][col].abs() < 1e-300 {
                // Singular basis; keep the previous inverse.
                return;
            }
            a.swap(col, piv);
            let inv = 1.0 / a[col][col];
            for v in a[col].iter_mut() {
                *v *= inv;
            }
            let pivot_row = a[col].clone();
            for (r, row) in a.iter_mut().enumerate() {
                if r != col {
                    let f = row[col];
                    if f != 0.0 {
                        for (v, p) in row.iter_mut().zip(&pivot_row) {
                            *v -= f * p;
                        }
                    }
                }
            }
        }
        self.binv = a.into_iter().map(|row| row[m..].to_vec()).collect();
        self.xb = self.binv.iter().map(|row| dot(row, &self.sf.b)).collect();
        self.since_refactor = 0;
    }

    fn pivot(&mut self, r: usize, entering: usize, d: &[f64]) {
        let m = self.sf.m;
        let dr = d[r];
        let theta = self.xb[r] / dr;
        for v in self.binv[r].iter_mut() {
            *v /= dr;
        }
        let pivot_row = self.binv[r].clone();
        for i in 0..m {
            if i != r && d[i] != 0.0 {
                let f = d[i];
                for (v, p) in self.binv[i].iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                self.xb[i] -= f * theta;
            }
        }
        self.xb[r] = theta;
        let leaving = self.basis[r];
        if leaving < self.sf.ncols {
            self.is_basic[leaving] = false;
        }
        self.basis[r] = entering;
        self.is_basic[entering] = true;
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    fn run(&mut self, phase: Phase) -> Outcome {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Outcome::IterationLimit;
            }
            let y = self.multipliers(phase);
            let use_bland =
                self.opts.pricing == Pricing::Bland || degenerate_run >= DEGENERATE_STREAK;
            let mut entering = None;
            let mut best = -OPT_TOL;
            for j in 0..self.sf.ncols {
                if self.is_basic[j] {
                    continue;
                }
                let r = self.cost(j, phase) - dot(&y, &self.sf.cols[j]);
                if r < best {
                    entering = Some(j);
                    if use_bland {
                        break;
                    }
                    best = r;
                }
            }
            let Some(q) = entering else {
                return Outcome::Optimal;
            };
            let d = self.ftran(q);
            let mut leave: Option<(usize, f64)> = None;
            for (i, &di) in d.iter().enumerate() {
                if di > PIVOT_TOL {
                    let ratio = self.xb[i].max(0.0) / di;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best_ratio)) => {
                            if ratio < best_ratio - 1e-13
                                || (ratio <= best_ratio + 1e-13 && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio.min(best_ratio)))
                            } else {
                                Some((k, best_ratio))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return Outcome::Unbounded;
            };
            if ratio <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, q, &d);
        }
    }

    fn drive_out_artificials(&mut self) {
        for r in 0..self.sf.m {
            if self.basis[r] < self.sf.ncols {
                continue;
            }
            let row = self.binv[r].clone();
            let candidate = (0..self.sf.ncols)
                .filter(|&j| !self.is_basic[j])
                .find(|&j| dot(&row, &self.sf.cols[j]).abs() > 1e-9);
            if let Some(j) = candidate {
                let d = self.ftran(j);
                self.pivot(r, j, &d);
            }
            // Otherwise the row is redundant and its artificial stays at zero.
        }
        self.refactor();
    }

    fn extract(&self, p: &LpProblem, opts: &SolverOptions) -> LpSolution {
        let sf = self.sf;
        let mut xs = vec![0.0; sf.ncols];
        for (i, &j) in self.basis.iter().enumerate() {
            if j < sf.ncols {
                xs[j] = self.xb[i].max(0.0);
            }
        }
        let x: Vec<f64> = sf
            .vars
            .iter()
            .map(|v| match *v {
                VarMap::Single { col, sign } => sign * xs[col],
                VarMap::Split { pos, neg } => xs[pos] - xs[neg],
            })
            .collect();
        let ystd = self.multipliers(Phase::Two);
        let sense_sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let duals: Vec<f64> = ystd
            .iter()
            .zip(&sf.flip)
            .map(|(y, f)| {
                let v = sense_sign * f * y;
                if v == 0.0 {
                    0.0
                } else {
                    v
                }
            })
            .collect();

        let objective = dot(&p.objective, &x);
        let dual_objective: f64 = p.rows.iter().zip(&duals).map(|(r, y)| r.rhs * y).sum();

        let mut primal_res = 0.0f64;
        let mut active = Vec::new();
        for (i, row) in p.rows.iter().enumerate() {
            let act = dot(&row.coeffs, &x);
            let viol = match row.relation {
                Relation::Le => (act - row.rhs).max(0.0),
                Relation::Ge => (row.rhs - act).max(0.0),
                Relation::Eq => (act - row.rhs).abs(),
            };
            primal_res = primal_res.max(viol);
            if row.relation == Relation::Eq
                || (act - row.rhs).abs() <= opts.tol * (1.0 + row.rhs.abs())
            {
                active.push(i);
            }
        }
        for (xj, b) in x.iter().zip(&p.bounds) {
            let viol = match b {
                VarBound::Free => 0.0,
                VarBound::NonNegative => (-xj).max(0.0),
                VarBound::NonPositive => xj.max(0.0),
            };
            primal_res = primal_res.max(viol);
        }
        let mut dual_res = 0.0f64;
        for j in 0..sf.ncols {
            let r = sf.cost[j] - dot(&ystd, &sf.cols[j]);
            dual_res = dual_res.max((-r).max(0.0));
        }
        let gap = (objective - dual_objective).abs();
        let residuals = Residuals {
            primal: primal_res,
            dual: dual_res,
            gap,
        };
        let certified = primal_res <= opts.tol
            && dual_res <= opts.tol
            && gap <= opts.tol * (1.0 + objective.abs());
        LpSolution {
            status: if certified {
                LpStatus::Optimal
            } else {
                LpStatus::NumericalFailure
            },
            x,
            objective,
            duals,
            active,
            residuals,
            iterations: self.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle(c: [f64; 2]) -> LpProblem {
        let mut p = LpProblem::new(Sense::Maximize, c.to_vec());
        p.add_row(vec![1.0, 1.0], Relation::Le, 1.0);
        p.add_row(vec![-1.0, 0.0], Relation::Le, 0.0);
        p.add_row(vec![0.0, -1.0], Relation::Le, 0.0);
        p
    }

    #[test]
    fn single_variable_box() {
        let mut p = LpProblem::new(Sense::Maximize, vec![1.0]).with_bounds(VarBound::NonNegative);
        p.add_row(vec![1.0], Relation::Le, 1.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.x, vec![1.0]);
        assert_eq!(s.duals, vec![1.0]);
        assert_eq!(s.active, vec![0]);
    }

    #[test]
    fn triangle_vertex() {
        let s = solve(&triangle([1.0, 0.0])).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && s.x[1].abs() < 1e-12);
        assert_eq!(s.active, vec![0, 2]);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = LpProblem::new(Sense::Maximize, vec![1.0]);
        p.add_row(vec![1.0], Relation::Ge, 2.0);
        p.add_row(vec![1.0], Relation::Le, 1.0);
        assert_eq!(solve(&p).unwrap().status, LpStatus::Infeasible);

        let mut q = LpProblem::new(Sense::Maximize, vec![1.0, 0.0]);
        q.add_row(vec![0.0, 1.0], Relation::Le, 1.0);
        assert_eq!(solve(&q).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_rhs_and_ge_rows() {
        // min x + y s.t. x + y >= 2, x - y = -1, x,y >= 0 -> (0.5, 1.5)
        let mut p =
            LpProblem::new(Sense::Minimize, vec![1.0, 1.0]).with_bounds(VarBound::NonNegative);
        p.add_row(vec![1.0, 1.0], Relation::Ge, 2.0);
        p.add_row(vec![1.0, -1.0], Relation::Eq, -1.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-12);
        // d(opt)/d(rhs of first row) = 1 for a min with a binding >= row.
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut p =
            LpProblem::new(Sense::Maximize, vec![1.0, 2.0]).with_bounds(VarBound::NonNegative);
        p.add_row(vec![1.0, 1.0], Relation::Eq, 1.0);
        p.add_row(vec![2.0, 2.0], Relation::Eq, 2.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_problem_is_an_error() {
        let mut p = LpProblem::new(Sense::Maximize, vec![1.0]);
        p.add_row(vec![1.0, 2.0], Relation::Le, 1.0);
        assert!(matches!(solve(&p), Err(LpError::DimensionMismatch { .. })));
        let mut q = LpProblem::new(Sense::Maximize, vec![f64::NAN]);
        q.add_row(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(solve(&q), Err(LpError::NonFinite(_))));
    }

    #[test]
    fn dual_face_nondegenerate_is_unchanged() {
        let p = triangle([1.0, 0.5]);
        let s = solve(&p).unwrap();
        let sec = DualObjective {
            sense: Sense::Maximize,
            weights: vec![0.0, 1.0, 1.0],
            extra_rows: vec![],
        };
        let f = dual_face(&p, &s, &sec).unwrap();
        assert_eq!(f.status, LpStatus::Optimal);
        for (a, b) in f.x.iter().zip(&s.duals) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn dual_face_degenerate_segment_endpoints() {
        // Two copies of x <= 1: optimal duals form the segment l_a + l_b = 1.
        let mut p = LpProblem::new(Sense::Maximize, vec![1.0]).with_bounds(VarBound::NonNegative);
        p.add_row(vec![1.0], Relation::Le, 1.0);
        p.add_row(vec![1.0], Relation::Le, 1.0);
        let s = solve(&p).unwrap();
        let up = dual_face(
            &p,
            &s,
            &DualObjective {
                sense: Sense::Maximize,
                weights: vec![0.0, 1.0],
                extra_rows: vec![],
            },
        )
        .unwrap();
        assert!((up.x[0] - 0.0).abs() < 1e-9 && (up.x[1] - 1.0).abs() < 1e-9);
        let down = dual_face(
            &p,
            &s,
            &DualObjective {
                sense: Sense::Minimize,
                weights: vec![0.0, 1.0],
                extra_rows: vec![],
            },
        )
        .unwrap();
        assert!((down.x[0] - 1.0).abs() < 1e-9 && down.x[1].abs() < 1e-9);
        let blocked = dual_face(
            &p,
            &s,
            &DualObjective {
                sense: Sense::Maximize,
                weights: vec![0.0, 1.0],
                extra_rows: vec![Row {
                    coeffs: vec![1.0, 1.0],
                    relation: Relation::Ge,
                    rhs: 2.0,
                }],
            },
        )
        .unwrap();
        assert_eq!(blocked.status, LpStatus::Infeasible);
    }
}
