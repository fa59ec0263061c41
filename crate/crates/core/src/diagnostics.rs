//! Collapse verdicts: envelope equality at the prior, its LP feasibility
//! counterpart, date-wise collapse, label lattices and the gain-region scan.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::belief::Belief;
use crate::concavify::conc_at;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::lp::{self, LpProblem, LpStatus, Relation, Sense, VarBound};
use crate::support::{AffineFunctional, HValue, SupportEnvelope, SupportQuery};
use crate::value::{check_monotone, Family, MonotoneViolation, Scenario, ValueFunction};
use crate::Tolerances;

/// Default robustness ladder for eps sweeps.
pub const EPS_LADDER: [f64; 3] = [1e-6, 1e-3, 1e-2];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub t: u32,
    pub belief: Belief,
    pub value: f64,
    /// `H_eps` at the witness; `None` when unbounded.
    pub h_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NogainResult {
    pub family: Family,
    pub eps: f64,
    pub conc_g: f64,
    pub conc_family: f64,
    pub gap: f64,
    /// Envelope equality at the prior.
    pub verdict: bool,
    /// Whether an affine majorant of every date's table stays within `eps`
    /// of the posterior envelope at the prior.
    pub lp_feasible: bool,
    pub lp_value: f64,
    pub certificate: Option<AffineFunctional>,
    pub witness: Option<Witness>,
    pub inconsistency: Option<String>,
}

/// Compares the posterior envelope with the envelope of `family` at the
/// prior, by direct concavification and by a joint support LP over every
/// date's table.
pub fn nogain_family(
    sc: &Scenario,
    family: &Family,
    eps: f64,
    tol: &Tolerances,
    exec: Exec,
) -> Result<NogainResult> {
    let query = SupportQuery::new(sc.prior().clone(), eps)?;
    let env = SupportEnvelope::new(sc, query)?;
    let fam = sc.benchmark(family)?;
    let conc_g = env.conc_at_prior;
    let conc_family = conc_at(&fam, sc.prior())?.value;
    let gap = conc_family - conc_g;
    let verdict = gap.abs() <= tol.val;

    let tables = sc.family_tables(family)?;
    let (lp_value, support) = joint_support(sc, &tables)?;
    let lp_feasible = lp_value <= conc_g + eps + tol.val;

    let mut problems = Vec::new();
    if (gap <= eps + tol.val) != lp_feasible {
        problems.push(format!(
            "envelope gap {gap:e} and joint support value {lp_value:e} disagree at eps {eps:e}"
        ));
    }
    if (lp_value - conc_family).abs() > 1e3 * tol.val {
        problems.push(format!(
            "joint support value {lp_value:e} differs from the family envelope {conc_family:e}"
        ));
    }
    if gap < -tol.val {
        problems.push(format!(
            "family envelope lies below the posterior envelope by {:e}",
            -gap
        ));
    }
    let shortfall = tables
        .iter()
        .map(|t| {
            sc.points()
                .iter()
                .zip(t)
                .map(|(s, v)| v - support.eval(s))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    if shortfall > tol.val {
        problems.push(format!("joint support undercuts a table by {shortfall:e}"));
    }

    let witness = if verdict {
        None
    } else {
        find_witness(sc, &env, &tables, tol, exec)?
    };
    Ok(NogainResult {
        family: family.clone(),
        eps,
        conc_g,
        conc_family,
        gap,
        verdict,
        lp_feasible,
        lp_value,
        certificate: lp_feasible.then_some(support),
        witness,
        inconsistency: (!problems.is_empty()).then(|| problems.join("; ")),
    })
}

/// `max sum mu_{t,x} U_t(x)` over measures on (date, point) pairs with
/// barycenter at the prior. Its row multipliers are the cheapest affine
/// majorant of every table at the prior.
fn joint_support(sc: &Scenario, tables: &[Vec<f64>]) -> Result<(f64, AffineFunctional)> {
    let n = sc.space().len();
    let points = sc.points();
    let objective: Vec<f64> = tables.iter().flatten().copied().collect();
    let cols = objective.len();
    let mut problem = LpProblem::new(Sense::Maximize, objective).with_bounds(VarBound::NonNegative);
    for i in 0..n - 1 {
        let row: Vec<f64> = tables
            .iter()
            .flat_map(|_| points.iter().map(move |x| x.weights()[i]))
            .collect();
        problem.add_row(row, Relation::Eq, sc.prior().weights()[i]);
    }
    problem.add_row(vec![1.0; cols], Relation::Eq, 1.0);
    let sol = lp::solve(&problem)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::LpFailure(sol.status));
    }
    let mut weights = sol.duals[..n - 1].to_vec();
    weights.push(0.0);
    Ok((
        sol.objective,
        AffineFunctional::new(sol.duals[n - 1], weights),
    ))
}

/// The point where the best table most exceeds `H_eps`, among points where
/// it exceeds the posterior benchmark.
fn find_witness(
    sc: &Scenario,
    env: &SupportEnvelope,
    tables: &[Vec<f64>],
    tol: &Tolerances,
    exec: Exec,
) -> Result<Option<Witness>> {
    let points = sc.points();
    let candidates: Vec<(usize, usize)> = (0..points.len())
        .filter_map(|j| {
            let (k, v) = best_date(tables, j);
            (v > env.g.values[j] + tol.val).then_some((j, k))
        })
        .collect();
    let hs = exec
        .map(&candidates, |&(j, _)| env.at(&points[j]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, Witness)> = None;
    for (&(j, k), h) in candidates.iter().zip(hs) {
        let Some(hv) = h.finite() else { continue };
        let excess = tables[k][j] - hv;
        if best.as_ref().is_none_or(|(e, _)| excess > *e) {
            best = Some((
                excess,
                Witness {
                    t: sc.dates()[k].t,
                    belief: points[j].clone(),
                    value: tables[k][j],
                    h_value: Some(hv),
                },
            ));
        }
    }
    Ok(best.map(|(_, w)| w))
}

/// Date index with the largest value at point `j`, earliest on ties.
fn best_date(tables: &[Vec<f64>], j: usize) -> (usize, f64) {
    let mut k = 0;
    for i in 1..tables.len() {
        if tables[i][j] > tables[k][j] {
            k = i;
        }
    }
    (k, tables[k][j])
}

/// No-gain check for the full-history family.
pub fn nogain_check(sc: &Scenario, eps: f64, tol: &Tolerances, exec: Exec) -> Result<NogainResult> {
    nogain_family(sc, &Family::History, eps, tol, exec)
}

/// Structural collapse: every date's full-history value lies below one
/// eps-support of the posterior benchmark.
pub fn global_collapse_check(
    sc: &Scenario,
    eps: f64,
    tol: &Tolerances,
    exec: Exec,
) -> Result<NogainResult> {
    let r = nogain_family(sc, &Family::History, eps, tol, exec)?;
    Ok(NogainResult {
        verdict: r.lp_feasible,
        ..r
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hit {
    pub t: u32,
    pub belief: Belief,
    pub value: f64,
    pub h_value: f64,
}

/// Every (date, point) whose full-history value lies strictly above `H_eps`.
pub fn hit_scan(sc: &Scenario, eps: f64, tol: &Tolerances, exec: Exec) -> Result<Vec<Hit>> {
    let env = SupportEnvelope::new(sc, SupportQuery::new(sc.prior().clone(), eps)?)?;
    let tables = sc.family_tables(&Family::History)?;
    let points = sc.points();
    // H_eps >= g, so only points above the posterior benchmark can hit.
    let candidates: Vec<usize> = (0..points.len())
        .filter(|&j| tables.iter().any(|t| t[j] > env.g.values[j] + tol.val))
        .collect();
    let hs = exec
        .map(&candidates, |&j| env.at(&points[j]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut hits = Vec::new();
    for (k, d) in sc.dates().iter().enumerate() {
        for (&j, h) in candidates.iter().zip(&hs) {
            if let HValue::Finite { value, .. } = h {
                if tables[k][j] > value + tol.val {
                    hits.push(Hit {
                        t: d.t,
                        belief: points[j].clone(),
                        value: tables[k][j],
                        h_value: *value,
                    });
                }
            }
        }
    }
    Ok(hits)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DateCollapse {
    pub t: u32,
    pub collapses: bool,
    pub gap: f64,
    pub witness: Belief,
}

pub fn date_collapse(sc: &Scenario, t: u32, tol: &Tolerances) -> Result<DateCollapse> {
    let d = sc.date(t)?;
    let (gap, j) = max_gap(sc, &d.history, &d.posterior)?;
    Ok(DateCollapse {
        t,
        collapses: gap <= tol.val,
        gap,
        witness: sc.points()[j].clone(),
    })
}

/// Largest `a - b` over the evaluation points and the first point attaining it.
fn max_gap(sc: &Scenario, a: &ValueFunction, b: &ValueFunction) -> Result<(f64, usize)> {
    let ta = sc.tabulate(a)?;
    let tb = sc.tabulate(b)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for (j, (x, y)) in ta.iter().zip(&tb).enumerate() {
        if x - y > best.0 {
            best = (x - y, j);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelWitness {
    pub belief: Belief,
    pub base_value: f64,
    pub joined_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelCollapse {
    pub t: u32,
    pub base: Vec<String>,
    pub label: String,
    pub collapsible: bool,
    pub witness: Option<LabelWitness>,
}

fn table<'a>(sc: &'a Scenario, t: u32, set: &BTreeSet<String>) -> Result<&'a ValueFunction> {
    sc.date(t)?
        .table_for(set)
        .ok_or_else(|| Error::MissingTable {
            date: t,
            labels: set.iter().cloned().collect(),
        })
}

/// Whether adding `label` to the conditioning set `base` leaves the date-`t`
/// value unchanged.
pub fn label_collapsible(
    sc: &Scenario,
    t: u32,
    base: &BTreeSet<String>,
    label: &str,
    tol: &Tolerances,
) -> Result<LabelCollapse> {
    let mut joined = base.clone();
    joined.insert(label.to_string());
    let tb = sc.tabulate(table(sc, t, base)?)?;
    let tj = sc.tabulate(table(sc, t, &joined)?)?;
    let mut worst: Option<(f64, usize)> = None;
    for (j, (a, b)) in tb.iter().zip(&tj).enumerate() {
        let d = (a - b).abs();
        if d > tol.val && worst.is_none_or(|(w, _)| d > w) {
            worst = Some((d, j));
        }
    }
    Ok(LabelCollapse {
        t,
        base: base.iter().cloned().collect(),
        label: label.to_string(),
        collapsible: worst.is_none(),
        witness: worst.map(|(_, j)| LabelWitness {
            belief: sc.points()[j].clone(),
            base_value: tb[j],
            joined_value: tj[j],
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Membership {
    pub labels: Vec<String>,
    pub invariant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeFindings {
    pub t: u32,
    pub labels: Vec<String>,
    pub members: Vec<Membership>,
    /// `(set, subset)` with the set value-invariant and the subset not.
    pub downward_violations: Vec<(Vec<String>, Vec<String>)>,
    pub meet_violations: Vec<(Vec<String>, Vec<String>)>,
    /// Invariant pairs whose union is not invariant.
    pub join_failures: Vec<(Vec<String>, Vec<String>)>,
}

const MAX_SCAN_LABELS: usize = 12;

/// Enumerates every subset of the date's labels and audits which leave the
/// posterior value unchanged.
pub fn lattice_scan(sc: &Scenario, t: u32, tol: &Tolerances) -> Result<LatticeFindings> {
    let d = sc.date(t)?;
    let labels: Vec<String> = d.declared_labels().into_iter().collect();
    if labels.len() > MAX_SCAN_LABELS {
        return Err(Error::InvalidScenario(format!(
            "date {t} declares {} labels; subset scans support at most {MAX_SCAN_LABELS}",
            labels.len()
        )));
    }
    let post = sc.tabulate(&d.posterior)?;
    let count = 1usize << labels.len();
    let set_of = |mask: usize| -> BTreeSet<String> {
        labels
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, l)| l.clone())
            .collect()
    };
    let names = |mask: usize| -> Vec<String> { set_of(mask).into_iter().collect() };
    let mut inv = vec![false; count];
    for (mask, slot) in inv.iter_mut().enumerate() {
        let vals = sc.tabulate(table(sc, t, &set_of(mask))?)?;
        *slot = vals
            .iter()
            .zip(&post)
            .all(|(a, b)| (a - b).abs() <= tol.val);
    }
    let mut members: Vec<Membership> = (0..count)
        .map(|m| Membership {
            labels: names(m),
            invariant: inv[m],
        })
        .collect();
    members.sort_by(|a, b| {
        a.labels
            .len()
            .cmp(&b.labels.len())
            .then(a.labels.cmp(&b.labels))
    });

    let mut downward_violations = Vec::new();
    for a in (0..count).filter(|&a| inv[a]) {
        for b in (0..count).filter(|&b| b & a == b && b != a) {
            if !inv[b] {
                downward_violations.push((names(a), names(b)));
            }
        }
    }
    let mut meet_violations = Vec::new();
    let mut join_failures = Vec::new();
    for a in 0..count {
        for b in a + 1..count {
            if !(inv[a] && inv[b]) {
                continue;
            }
            if !inv[a & b] {
                meet_violations.push((names(a), names(b)));
            }
            let nested = a & b == a || a & b == b;
            if !nested && !inv[a | b] {
                join_failures.push((names(a), names(b)));
            }
        }
    }
    Ok(LatticeFindings {
        t,
        labels,
        members,
        downward_violations,
        meet_violations,
        join_failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum FamilyAudit {
    Passed {
        families: Vec<Family>,
    },
    /// Some date does not collapse, so there is nothing to assert.
    Skipped {
        failing_dates: Vec<u32>,
    },
    Violated {
        families: Vec<Family>,
    },
}

/// When every date collapses, every supplied intermediate family must show
/// no gain at the prior.
pub fn family_audit(sc: &Scenario, eps: f64, tol: &Tolerances, exec: Exec) -> Result<FamilyAudit> {
    let mut failing = Vec::new();
    for d in sc.dates() {
        if !date_collapse(sc, d.t, tol)?.collapses {
            failing.push(d.t);
        }
    }
    if !failing.is_empty() {
        return Ok(FamilyAudit::Skipped {
            failing_dates: failing,
        });
    }
    let families = intermediate_families(sc);
    let mut violated = Vec::new();
    for f in &families {
        if !nogain_family(sc, f, eps, tol, exec)?.verdict {
            violated.push(f.clone());
        }
    }
    Ok(if violated.is_empty() {
        FamilyAudit::Passed { families }
    } else {
        FamilyAudit::Violated { families: violated }
    })
}

/// The history family plus one family per conditioning set any date supplies.
pub fn intermediate_families(sc: &Scenario) -> Vec<Family> {
    let sets: BTreeSet<BTreeSet<String>> = sc
        .dates()
        .iter()
        .flat_map(|d| d.labels.iter().map(|l| l.conditioning.clone()))
        .collect();
    std::iter::once(Family::History)
        .chain(sets.into_iter().map(Family::Labels))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub eps: f64,
    pub nogain: bool,
    pub collapse: bool,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsSweep {
    pub entries: Vec<SweepEntry>,
    /// Same verdicts at every eps on the ladder.
    pub stable: bool,
}

pub fn eps_sweep(sc: &Scenario, ladder: &[f64], tol: &Tolerances, exec: Exec) -> Result<EpsSweep> {
    let mut entries = Vec::new();
    for &eps in ladder {
        let g = global_collapse_check(sc, eps, tol, exec)?;
        let hits = hit_scan(sc, eps, tol, exec)?.len();
        entries.push(SweepEntry {
            eps,
            nogain: g.gap.abs() <= tol.val,
            collapse: g.verdict,
            hits,
        });
    }
    let stable = entries
        .windows(2)
        .all(|w| w[0].nogain == w[1].nogain && w[0].collapse == w[1].collapse);
    Ok(EpsSweep { entries, stable })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeSpec {
    pub types: usize,
    pub denominator: u32,
    pub pitch: f64,
    pub points: usize,
}

impl LatticeSpec {
    pub fn of(sc: &Scenario) -> Self {
        Self {
            types: sc.space().len(),
            denominator: sc.lattice().denominator(),
            pitch: sc.lattice().pitch(),
            points: sc.points().len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub eps: f64,
    pub tolerances: Tolerances,
    pub lattice: LatticeSpec,
    pub conc_g_at_prior: f64,
    pub conc_ghat_at_prior: f64,
    pub gap: f64,
    pub nogain_verdict: bool,
    pub collapse_verdict: bool,
    pub global_support: Option<AffineFunctional>,
    pub witness: Option<Witness>,
    pub per_date_collapse: Vec<DateCollapse>,
    pub label_families: Vec<NogainResult>,
    pub lattice_findings: Vec<LatticeFindings>,
    pub hits: Vec<Hit>,
    pub family_audit: FamilyAudit,
    pub monotone_violations: Vec<MonotoneViolation>,
    pub inconsistencies: Vec<String>,
}

impl DiagnosticsReport {
    pub fn negative(&self) -> bool {
        !self.nogain_verdict || !self.collapse_verdict
    }
}

pub fn diagnose(
    sc: &Scenario,
    eps: f64,
    tol: &Tolerances,
    exec: Exec,
) -> Result<DiagnosticsReport> {
    let global = global_collapse_check(sc, eps, tol, exec)?;
    let hits = hit_scan(sc, eps, tol, exec)?;
    let per_date_collapse = sc
        .dates()
        .iter()
        .map(|d| date_collapse(sc, d.t, tol))
        .collect::<Result<Vec<_>>>()?;
    let mut label_families = Vec::new();
    for f in intermediate_families(sc).into_iter().skip(1) {
        label_families.push(nogain_family(sc, &f, eps, tol, exec)?);
    }
    let lattice_findings = sc
        .dates()
        .iter()
        .filter(|d| !d.labels.is_empty())
        .map(|d| lattice_scan(sc, d.t, tol))
        .collect::<Result<Vec<_>>>()?;
    let family_audit = family_audit(sc, eps, tol, exec)?;

    let nogain_verdict = global.gap.abs() <= tol.val;
    let mut inconsistencies: Vec<String> = std::iter::once(&global)
        .chain(&label_families)
        .filter_map(|r| r.inconsistency.clone())
        .collect();
    if nogain_verdict && !hits.is_empty() {
        inconsistencies.push(format!(
            "no-gain holds but {} test-region hits were found",
            hits.len()
        ));
    }
    if global.verdict && !hits.is_empty() {
        inconsistencies.push("collapse holds but the test region is hit".into());
    }
    if let FamilyAudit::Violated { families } = &family_audit {
        inconsistencies.push(format!(
            "every date collapses yet {} families gain",
            families.len()
        ));
    }
    Ok(DiagnosticsReport {
        eps,
        tolerances: *tol,
        lattice: LatticeSpec::of(sc),
        conc_g_at_prior: global.conc_g,
        conc_ghat_at_prior: global.conc_family,
        gap: global.gap,
        nogain_verdict,
        collapse_verdict: global.verdict,
        global_support: global.certificate.clone(),
        witness: global.witness.clone(),
        per_date_collapse,
        label_families,
        lattice_findings,
        hits,
        family_audit,
        monotone_violations: check_monotone(sc, tol.val)?,
        inconsistencies,
    })
}
