//! Command routing shared by the CLI and the tests: one scenario in, one
//! report (plus optional CSV tables) out.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use crate::belief::Belief;
use crate::certificates::{common_dual, directional_nogain, face_stability, optimal_face};
use crate::concavify::{conc_at, conc_curve, synthesize_terminal};
use crate::diagnostics::{self, LatticeSpec, EPS_LADDER};
use crate::error::Error;
use crate::exec::Exec;
use crate::io::FORMAT;
use crate::support::{eps_support, HValue, SupportEnvelope, SupportQuery};
use crate::value::{Family, Scenario};
use crate::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Validate,
    Envelope,
    Diagnose,
    Collapse,
    Terminal,
    Certify,
    HitScan,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Validate,
        Command::Envelope,
        Command::Diagnose,
        Command::Collapse,
        Command::Terminal,
        Command::Certify,
        Command::HitScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Envelope => "envelope",
            Command::Diagnose => "diagnose",
            Command::Collapse => "collapse",
            Command::Terminal => "terminal",
            Command::Certify => "certify",
            Command::HitScan => "hit-scan",
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("unknown command {0:?}")]
pub struct UnknownCommand(pub String);

impl FromStr for Command {
    type Err = UnknownCommand;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| UnknownCommand(s.to_string()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunParams {
    pub eps: f64,
    pub eps_sweep: bool,
    pub tolerances: Tolerances,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            eps: 0.0,
            eps_sweep: false,
            tolerances: Tolerances::default(),
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Clean,
    /// The scenario does not collapse or gains from non-posterior labels.
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Section {
    Ok { data: Value },
    Error { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub format: String,
    pub command: Command,
    pub scenario: String,
    pub params: Value,
    /// `complete`, or `partial` when a section failed.
    pub status: String,
    pub verdict: Verdict,
    pub sections: BTreeMap<String, Section>,
}

impl Report {
    pub fn partial(&self) -> bool {
        self.status != "complete"
    }

    /// 0 clean, 2 negative verdict, 1 when any section failed.
    pub fn exit_code(&self) -> i32 {
        match (self.partial(), self.verdict) {
            (true, _) => 1,
            (false, Verdict::Negative) => 2,
            (false, Verdict::Clean) => 0,
        }
    }

    pub fn data(&self, section: &str) -> Option<&Value> {
        match self.sections.get(section)? {
            Section::Ok { data } => Some(data),
            Section::Error { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub tables: Vec<CsvTable>,
}

struct Builder {
    sections: BTreeMap<String, Section>,
    negative: bool,
    failed_items: bool,
    tables: Vec<CsvTable>,
}

impl Builder {
    fn put<T: Serialize>(&mut self, name: &str, r: Result<T, Error>) -> Option<T> {
        match r {
            Ok(v) => {
                let data = serde_json::to_value(&v)
                    .unwrap_or_else(|e| json!({ "serialization_error": e.to_string() }));
                self.sections.insert(name.to_string(), Section::Ok { data });
                Some(v)
            }
            Err(e) => {
                self.sections.insert(
                    name.to_string(),
                    Section::Error {
                        error: e.to_string(),
                    },
                );
                None
            }
        }
    }
}

pub fn run(cmd: Command, sc: &Scenario, params: &RunParams) -> RunOutput {
    let tol = &params.tolerances;
    let exec = params.exec;
    let eps = params.eps;
    let mut b = Builder {
        sections: BTreeMap::new(),
        negative: false,
        failed_items: false,
        tables: Vec::new(),
    };
    match cmd {
        Command::Validate => {
            b.put("scenario", validate_summary(sc, tol));
        }
        Command::Envelope => match envelope(sc, eps, tol, exec) {
            Ok((summary, table)) => {
                b.put("envelope", Ok(summary));
                b.tables.push(table);
            }
            Err(e) => {
                b.put::<Value>("envelope", Err(e));
            }
        },
        Command::Diagnose => {
            if let Some(r) = b.put("diagnostics", diagnostics::diagnose(sc, eps, tol, exec)) {
                b.negative |= r.negative();
            }
            if params.eps_sweep {
                b.put(
                    "eps_sweep",
                    diagnostics::eps_sweep(sc, &EPS_LADDER, tol, exec),
                );
            }
        }
        Command::Collapse => {
            if let Some(c) = b.put("collapse", collapse(sc, eps, tol, exec)) {
                b.negative |= !(c.nogain && c.collapse);
            }
            if params.eps_sweep {
                b.put(
                    "eps_sweep",
                    diagnostics::eps_sweep(sc, &EPS_LADDER, tol, exec),
                );
            }
        }
        Command::Terminal => {
            b.put("terminal", synthesize_terminal(sc, tol));
        }
        Command::Certify => {
            let r = certify(sc, tol).map(|(v, failed)| {
                b.failed_items |= failed;
                v
            });
            b.put("certificates", r);
        }
        Command::HitScan => {
            if let Some(h) = b.put("hits", diagnostics::hit_scan(sc, eps, tol, exec)) {
                b.negative |= !h.is_empty();
            }
        }
    }
    let partial = b.failed_items
        || b.sections
            .values()
            .any(|s| matches!(s, Section::Error { .. }));
    let mut echo = json!({
        "eps": eps,
        "tolerances": tol,
        "lattice": LatticeSpec::of(sc),
        "scenario_params": sc.params(),
    });
    if params.eps_sweep {
        echo["eps_ladder"] = json!(EPS_LADDER);
    }
    RunOutput {
        report: Report {
            format: FORMAT.to_string(),
            command: cmd,
            scenario: sc.name().to_string(),
            params: echo,
            status: if partial { "partial" } else { "complete" }.to_string(),
            verdict: if b.negative {
                Verdict::Negative
            } else {
                Verdict::Clean
            },
            sections: b.sections,
        },
        tables: b.tables,
    }
}

fn validate_summary(sc: &Scenario, tol: &Tolerances) -> Result<Value, Error> {
    let warnings = crate::value::check_monotone(sc, tol.val)?;
    Ok(json!({
        "types": sc.space().labels(),
        "prior": sc.prior(),
        "dates": sc.dates().iter().map(|d| json!({
            "t": d.t,
            "labels": d.labels.iter().map(|l| json!({"name": l.name, "conditioning": l.conditioning})).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "lattice": LatticeSpec::of(sc),
        "polytope_families": sc.families().len(),
        "cones": sc.cones().len(),
        "monotone_violations": warnings,
    }))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn envelope(
    sc: &Scenario,
    eps: f64,
    tol: &Tolerances,
    exec: Exec,
) -> Result<(Value, CsvTable), Error> {
    let g = sc.benchmark(&Family::Posterior)?;
    let ghat = sc.benchmark(&Family::History)?;
    let conc_g = conc_curve(&g, exec)?;
    let conc_ghat = conc_curve(&ghat, exec)?;
    let query = SupportQuery::new(sc.prior().clone(), eps)?;
    let env = SupportEnvelope::from_table(g.clone(), query.clone())?;
    let h = exec
        .map(g.points.as_slice(), |s| env.at(s))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let support = eps_support(sc, &query, tol.val)?;

    let labels = sc.space().labels();
    let mut header: Vec<String> = if labels.len() == 2 {
        vec!["s".into()]
    } else {
        labels.iter().map(|l| format!("s_{l}")).collect()
    };
    header.extend(["g", "ghat", "conc_g", "conc_ghat", "h_eps"].map(String::from));
    let mut rows = Vec::with_capacity(g.len());
    let mut max_lift = 0.0f64;
    for (i, s) in g.points.iter().enumerate() {
        let mut row: Vec<String> = if labels.len() == 2 {
            vec![fmt(s.p())]
        } else {
            s.weights().iter().copied().map(fmt).collect()
        };
        row.push(fmt(g.values[i]));
        row.push(fmt(ghat.values[i]));
        row.push(fmt(conc_g[i].1));
        row.push(fmt(conc_ghat[i].1));
        row.push(match &h[i] {
            HValue::Finite { value, .. } => fmt(*value),
            HValue::Unbounded => "inf".into(),
        });
        max_lift = max_lift.max(conc_ghat[i].1 - conc_g[i].1);
        rows.push(row);
    }
    let at_prior = conc_at(&ghat, sc.prior())?;
    let summary = json!({
        "conc_g_at_prior": env.conc_at_prior,
        "conc_ghat_at_prior": at_prior.value,
        "support": support,
        "max_envelope_lift": max_lift,
        "points": g.len(),
        "pitch": sc.lattice().pitch(),
    });
    Ok((
        summary,
        CsvTable {
            name: "envelope.csv".into(),
            header,
            rows,
        },
    ))
}

#[derive(Debug, Clone, Serialize)]
struct CollapseSection {
    nogain: bool,
    collapse: bool,
    result: diagnostics::NogainResult,
    hits: Vec<diagnostics::Hit>,
    /// Terminal value minus the full-history envelope at the prior, when
    /// the calendar collapses.
    terminal_gap: Option<f64>,
}

fn collapse(
    sc: &Scenario,
    eps: f64,
    tol: &Tolerances,
    exec: Exec,
) -> Result<CollapseSection, Error> {
    let result = diagnostics::global_collapse_check(sc, eps, tol, exec)?;
    let hits = diagnostics::hit_scan(sc, eps, tol, exec)?;
    let terminal_gap = if result.verdict {
        Some(synthesize_terminal(sc, tol)?.value - result.conc_family)
    } else {
        None
    };
    Ok(CollapseSection {
        nogain: result.gap.abs() <= tol.val,
        collapse: result.verdict,
        result,
        hits,
        terminal_gap,
    })
}

fn item<T: Serialize>(r: Result<T, Error>, failed: &mut bool) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => {
            *failed = true;
            json!({ "error": e.to_string() })
        }
    }
}

/// Certificate data per family, join and cone; the flag is set when any
/// item failed.
fn certify(sc: &Scenario, tol: &Tolerances) -> Result<(Value, bool), Error> {
    let mut failed = false;
    let mut families = Vec::new();
    for nf in sc.families() {
        let f = &nf.family;
        families.push(json!({
            "name": nf.name,
            "base_face": item(optimal_face(f.base(), f.objective(), tol.val), &mut failed),
            "face_stability": item(face_stability(f, tol.val), &mut failed),
            "common_dual": item(common_dual(f, tol.val), &mut failed),
        }));
    }
    let mut joins = Vec::new();
    let fams = sc.families();
    for i in 0..fams.len() {
        for j in i + 1..fams.len() {
            let (a, b) = (&fams[i].family, &fams[j].family);
            if a.base() != b.base() || a.objective() != b.objective() {
                continue;
            }
            let pooled = a.join(b, tol.val).and_then(|p| face_stability(&p, tol.val));
            joins.push(json!({
                "families": [fams[i].name, fams[j].name],
                "pooled": item(pooled, &mut failed),
            }));
        }
    }
    let mut cones = Vec::new();
    for c in sc.cones() {
        let d = sc.date(c.date)?;
        let point: &Belief = &c.point;
        cones.push(json!({
            "name": c.name,
            "date": c.date,
            "posterior": item(directional_nogain(&d.posterior, point, &c.cone, tol.dir), &mut failed),
        }));
    }
    Ok((
        json!({ "families": families, "joins": joins, "cones": cones }),
        failed,
    ))
}
