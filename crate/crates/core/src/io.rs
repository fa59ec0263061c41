//! Scenario files, canonical JSON output and CSV emission.
//!
//! Files are JSON with format tag [`FORMAT`]. Output is written with sorted
//! keys and every float in 17 significant digits, so a scenario survives
//! load, serialize, load unchanged.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::belief::{Belief, TypeSpace};
use crate::certificates::{ConeProbe, NamedFamily, NamedRow, Polytope, RefinedFamily, TangentCone};
use crate::error::Error;
use crate::lattice::Lattice;
use crate::value::{
    check_monotone, DateEntry, GridTable, LabelTable, MonotoneViolation, Scenario, ValueFunction,
};
use crate::Tolerances;

pub const FORMAT: &str = "collapse-lab/1";

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },
    #[error("unsupported format {found:?}, expected {FORMAT:?}")]
    VersionMismatch { found: String },
}

impl LoadError {
    fn at(path: impl Into<String>, message: impl ToString) -> Self {
        Self::Validation {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
    pub theta: Vec<String>,
    pub prior: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub r_max: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    pub dates: Vec<DateFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub polytopes: Vec<PolytopeFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cones: Vec<ConeFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// Two types, `resolution` evenly spaced points.
    Uniform { resolution: u32 },
    /// All compositions of `denominator` into `n` parts.
    Compositions { denominator: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DateFile {
    pub t: u32,
    pub posterior: ValueSpec,
    pub history: ValueSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<LabelFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelFile {
    pub name: String,
    pub conditioning: Vec<String>,
    pub value: ValueSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueSpec {
    Pwl1d {
        breakpoints: Vec<[f64; 2]>,
        /// Adds `amount` on the closed interval `[lo, hi]`; the result is
        /// sampled on the lattice.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        uplift: Option<Uplift>,
    },
    Grid {
        samples: Vec<Sample>,
    },
    Constant {
        value: f64,
    },
    Affine {
        intercept: f64,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Uplift {
    pub lo: f64,
    pub hi: f64,
    pub amount: Amount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amount {
    Value(f64),
    Param { param: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub s: Vec<f64>,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeFile {
    pub name: String,
    pub objective: Vec<f64>,
    pub base: Vec<RowFile>,
    /// Extra rows per label value, intersected with the base.
    pub refinements: BTreeMap<String, RefinementFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowFile {
    pub name: String,
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementFile {
    pub weight: f64,
    #[serde(default)]
    pub rows: Vec<RowFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeFile {
    pub name: String,
    pub date: u32,
    pub point: Vec<f64>,
    pub generators: Vec<Vec<f64>>,
}

/// Load-time overrides.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Replaces the grid resolution (two types) or denominator.
    pub grid: Option<u32>,
    /// Overrides entries of the file's `params`.
    pub params: BTreeMap<String, f64>,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    /// Monotonicity breaches; reported, never repaired.
    pub warnings: Vec<MonotoneViolation>,
}

pub fn load(path: &Path, opts: &LoadOptions) -> Result<Loaded, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_str(&text, opts)
}

pub fn load_str(text: &str, opts: &LoadOptions) -> Result<Loaded, LoadError> {
    let file = parse(text)?;
    let scenario = build(&file, opts)?;
    let warnings =
        check_monotone(&scenario, opts.tolerances.val).map_err(|e| LoadError::at("/dates", e))?;
    Ok(Loaded { scenario, warnings })
}

pub fn parse(text: &str) -> Result<ScenarioFile, LoadError> {
    let value: Value = serde_json::from_str(text).map_err(|e| LoadError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    match value.get("format") {
        Some(Value::String(f)) if f == FORMAT => {}
        Some(Value::String(f)) => return Err(LoadError::VersionMismatch { found: f.clone() }),
        Some(other) => {
            return Err(LoadError::VersionMismatch {
                found: other.to_string(),
            })
        }
        None => return Err(LoadError::at("/format", "missing format tag")),
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let mut path = String::new();
        for seg in e.path().iter() {
            match seg {
                serde_path_to_error::Segment::Seq { index } => path.push_str(&format!("/{index}")),
                serde_path_to_error::Segment::Map { key } => path.push_str(&format!("/{key}")),
                serde_path_to_error::Segment::Enum { variant } => {
                    path.push_str(&format!("/{variant}"))
                }
                serde_path_to_error::Segment::Unknown => path.push_str("/?"),
            }
        }
        if path.is_empty() {
            path.push('/');
        }
        LoadError::at(path, e.inner())
    })
}

/// Validates a parsed file and builds the scenario.
pub fn build(file: &ScenarioFile, opts: &LoadOptions) -> Result<Scenario, LoadError> {
    let tol = opts.tolerances;
    let space =
        TypeSpace::new(file.theta.iter().cloned()).map_err(|e| LoadError::at("/theta", e))?;
    let n = space.len();

    if file.prior.len() != n {
        return Err(LoadError::at(
            "/prior",
            format!("expected {n} weights, found {}", file.prior.len()),
        ));
    }
    let mass: f64 = file.prior.iter().sum();
    if (mass - 1.0).abs() > tol.simplex {
        return Err(LoadError::at(
            "/prior",
            format!("weights sum to {mass}, not 1"),
        ));
    }
    let prior = Belief::new(&file.prior, tol.simplex).map_err(|e| LoadError::at("/prior", e))?;

    let lattice = Arc::new(make_lattice(n, file.grid.as_ref(), opts.grid)?);

    let mut params = file.params.clone();
    params.extend(opts.params.iter().map(|(k, v)| (k.clone(), *v)));

    if !file.r_max.is_finite() {
        return Err(LoadError::at("/r_max", "revenue bound must be finite"));
    }
    if file.dates.is_empty() {
        return Err(LoadError::at("/dates", "scenario has no dates"));
    }
    let mut seen = BTreeSet::new();
    let mut dates = Vec::with_capacity(file.dates.len());
    for (i, d) in file.dates.iter().enumerate() {
        let base = format!("/dates/{i}");
        if !seen.insert(d.t) {
            return Err(LoadError::at(
                format!("{base}/t"),
                format!("date {} appears twice", d.t),
            ));
        }
        let ctx = Ctx {
            n,
            lattice: &lattice,
            params: &params,
            r_max: file.r_max,
            tol: &tol,
        };
        let posterior = ctx.value(&d.posterior, &format!("{base}/posterior"))?;
        let history = ctx.value(&d.history, &format!("{base}/history"))?;
        let mut entry = DateEntry::new(d.t, posterior, history);
        for (k, l) in d.labels.iter().enumerate() {
            let path = format!("{base}/labels/{k}");
            let conditioning: BTreeSet<String> = l.conditioning.iter().cloned().collect();
            if conditioning.is_empty() {
                return Err(LoadError::at(
                    format!("{path}/conditioning"),
                    "conditioning set is empty",
                ));
            }
            if entry.labels.iter().any(|o| o.conditioning == conditioning) {
                return Err(LoadError::at(
                    format!("{path}/conditioning"),
                    "another table already conditions on this set",
                ));
            }
            entry.labels.push(LabelTable {
                name: l.name.clone(),
                conditioning,
                value: ctx.value(&l.value, &format!("{path}/value"))?,
            });
        }
        dates.push(entry);
    }

    let families = file
        .polytopes
        .iter()
        .enumerate()
        .map(|(i, p)| build_family(p, &format!("/polytopes/{i}"), &tol))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cones = Vec::with_capacity(file.cones.len());
    for (i, c) in file.cones.iter().enumerate() {
        let path = format!("/cones/{i}");
        if !seen.contains(&c.date) {
            return Err(LoadError::at(
                format!("{path}/date"),
                Error::UnknownDate(c.date),
            ));
        }
        if c.point.len() != n || c.generators.iter().any(|h| h.len() != n) {
            return Err(LoadError::at(
                path,
                format!("cone data must have {n} coordinates"),
            ));
        }
        let point = Belief::new(&c.point, tol.simplex)
            .map_err(|e| LoadError::at(format!("{path}/point"), e))?;
        let cone = TangentCone::new(c.generators.clone(), tol.val)
            .map_err(|e| LoadError::at(format!("{path}/generators"), e))?;
        cones.push(ConeProbe {
            name: c.name.clone(),
            date: c.date,
            point,
            cone,
        });
    }

    Ok(Scenario::new(space, prior, lattice, file.r_max, dates)
        .map_err(|e| LoadError::at("/", e))?
        .with_name(file.name.clone(), file.notes.clone())
        .with_params(params)
        .with_certificates(families, cones))
}

fn make_lattice(
    n: usize,
    spec: Option<&GridSpec>,
    over: Option<u32>,
) -> Result<Lattice, LoadError> {
    let lattice = match (spec, over) {
        (Some(GridSpec::Uniform { resolution }), over) => {
            if n != 2 {
                return Err(LoadError::at(
                    "/grid",
                    "uniform grids need exactly two types",
                ));
            }
            Lattice::binary(over.unwrap_or(*resolution))
        }
        (Some(GridSpec::Compositions { denominator }), over) => {
            Lattice::new(n, over.unwrap_or(*denominator))
        }
        (None, Some(g)) if n == 2 => Lattice::binary(g),
        (None, Some(g)) => Lattice::new(n, g),
        (None, None) => Lattice::default_for(n),
    };
    lattice.map_err(|e| LoadError::at("/grid", e))
}

struct Ctx<'a> {
    n: usize,
    lattice: &'a Arc<Lattice>,
    params: &'a BTreeMap<String, f64>,
    r_max: f64,
    tol: &'a Tolerances,
}

impl Ctx<'_> {
    fn value(&self, spec: &ValueSpec, path: &str) -> Result<ValueFunction, LoadError> {
        let f = self.materialize(spec, path)?;
        let (_, hi) = f.range();
        if hi > self.r_max {
            return Err(LoadError::at(
                path,
                format!("value {hi} exceeds r_max {}", self.r_max),
            ));
        }
        Ok(f)
    }

    fn grid_from(
        &self,
        f: impl Fn(&Belief) -> f64,
        path: &str,
    ) -> Result<ValueFunction, LoadError> {
        let values = self.lattice.points().iter().map(f).collect();
        GridTable::new(Arc::clone(self.lattice), values)
            .map(ValueFunction::Grid)
            .map_err(|e| LoadError::at(path, e))
    }

    fn materialize(&self, spec: &ValueSpec, path: &str) -> Result<ValueFunction, LoadError> {
        let n = self.n;
        match spec {
            ValueSpec::Pwl1d {
                breakpoints,
                uplift,
            } => {
                if n != 2 {
                    return Err(LoadError::at(path, "pwl1d needs exactly two types"));
                }
                let f = ValueFunction::pwl(breakpoints.iter().map(|b| (b[0], b[1])).collect())
                    .map_err(|e| LoadError::at(format!("{path}/breakpoints"), e))?;
                let Some(u) = uplift else { return Ok(f) };
                let amount = match &u.amount {
                    Amount::Value(v) => *v,
                    Amount::Param { param } => *self.params.get(param).ok_or_else(|| {
                        LoadError::at(
                            format!("{path}/uplift/amount"),
                            format!("unknown parameter {param:?}"),
                        )
                    })?,
                };
                if !(u.lo <= u.hi) || !amount.is_finite() {
                    return Err(LoadError::at(
                        format!("{path}/uplift"),
                        "need lo <= hi and a finite amount",
                    ));
                }
                let ValueFunction::Pwl1d(base) = &f else {
                    unreachable!()
                };
                self.grid_from(
                    |s| {
                        let p = s.p();
                        base.eval_p(p) + if p >= u.lo && p <= u.hi { amount } else { 0.0 }
                    },
                    path,
                )
            }
            ValueSpec::Grid { samples } => {
                let mut pairs = Vec::with_capacity(samples.len());
                for (i, smp) in samples.iter().enumerate() {
                    if smp.s.len() != n {
                        return Err(LoadError::at(
                            format!("{path}/samples/{i}/s"),
                            format!("expected {n} weights"),
                        ));
                    }
                    let b = Belief::new(&smp.s, self.tol.simplex)
                        .map_err(|e| LoadError::at(format!("{path}/samples/{i}/s"), e))?;
                    pairs.push((b, smp.v));
                }
                GridTable::from_samples(Arc::clone(self.lattice), &pairs, self.tol.simplex)
                    .map(ValueFunction::Grid)
                    .map_err(|e| LoadError::at(format!("{path}/samples"), e))
            }
            ValueSpec::Constant { value } => {
                if n == 2 {
                    ValueFunction::pwl(vec![(0.0, *value), (1.0, *value)])
                        .map_err(|e| LoadError::at(path, e))
                } else {
                    self.grid_from(|_| *value, path)
                }
            }
            ValueSpec::Affine { intercept, weights } => {
                if weights.len() != n {
                    return Err(LoadError::at(
                        format!("{path}/weights"),
                        format!("expected {n} weights"),
                    ));
                }
                if n == 2 {
                    ValueFunction::pwl(vec![
                        (0.0, intercept + weights[1]),
                        (1.0, intercept + weights[0]),
                    ])
                    .map_err(|e| LoadError::at(path, e))
                } else {
                    self.grid_from(
                        |s| {
                            intercept
                                + weights
                                    .iter()
                                    .zip(s.weights())
                                    .map(|(w, x)| w * x)
                                    .sum::<f64>()
                        },
                        path,
                    )
                }
            }
        }
    }
}

fn build_family(p: &PolytopeFile, path: &str, tol: &Tolerances) -> Result<NamedFamily, LoadError> {
    let dim = p.objective.len();
    let rows = |rs: &[RowFile]| -> Vec<NamedRow> {
        rs.iter()
            .map(|r| NamedRow::new(&r.name, r.a.clone(), r.b))
            .collect()
    };
    let base_rows = rows(&p.base);
    let base = Polytope::new(dim, base_rows.clone())
        .map_err(|e| LoadError::at(format!("{path}/base"), e))?;
    let mut refinements = BTreeMap::new();
    let mut weights = BTreeMap::new();
    for (y, r) in &p.refinements {
        let mut all = base_rows.clone();
        all.extend(rows(&r.rows));
        let poly = Polytope::new(dim, all)
            .map_err(|e| LoadError::at(format!("{path}/refinements/{y}"), e))?;
        refinements.insert(y.clone(), poly);
        weights.insert(y.clone(), r.weight);
    }
    let family = RefinedFamily::new(base, refinements, weights, p.objective.clone(), tol.val)
        .map_err(|e| LoadError::at(path, e))?;
    Ok(NamedFamily {
        name: p.name.clone(),
        family,
    })
}

/// The file form of a loaded scenario. Load-time conveniences (constants,
/// affine maps, uplifts) come back in their materialized form.
pub fn to_file(sc: &Scenario) -> ScenarioFile {
    let lattice = sc.lattice();
    let grid = if sc.space().len() == 2 {
        GridSpec::Uniform {
            resolution: lattice.denominator() + 1,
        }
    } else {
        GridSpec::Compositions {
            denominator: lattice.denominator(),
        }
    };
    let spec = |f: &ValueFunction| match f {
        ValueFunction::Pwl1d(p) => ValueSpec::Pwl1d {
            breakpoints: p.breakpoints().iter().map(|&(x, v)| [x, v]).collect(),
            uplift: None,
        },
        ValueFunction::Grid(g) => ValueSpec::Grid {
            samples: g
                .lattice()
                .points()
                .iter()
                .zip(g.values())
                .map(|(s, &v)| Sample {
                    s: s.weights().to_vec(),
                    v,
                })
                .collect(),
        },
    };
    let row_file = |r: &NamedRow| RowFile {
        name: r.name.clone(),
        a: r.coeffs.clone(),
        b: r.rhs,
    };
    ScenarioFile {
        format: FORMAT.to_string(),
        name: sc.name().to_string(),
        notes: sc.notes().to_string(),
        theta: sc.space().labels().to_vec(),
        prior: sc.prior().weights().to_vec(),
        grid: Some(grid),
        r_max: sc.r_max(),
        params: sc.params().clone(),
        dates: sc
            .dates()
            .iter()
            .map(|d| DateFile {
                t: d.t,
                posterior: spec(&d.posterior),
                history: spec(&d.history),
                labels: d
                    .labels
                    .iter()
                    .map(|l| LabelFile {
                        name: l.name.clone(),
                        conditioning: l.conditioning.iter().cloned().collect(),
                        value: spec(&l.value),
                    })
                    .collect(),
            })
            .collect(),
        polytopes: sc
            .families()
            .iter()
            .map(|nf| {
                let f = &nf.family;
                let nb = f.base().rows().len();
                PolytopeFile {
                    name: nf.name.clone(),
                    objective: f.objective().to_vec(),
                    base: f.base().rows().iter().map(row_file).collect(),
                    refinements: f
                        .refinements()
                        .iter()
                        .map(|(y, p)| {
                            (
                                y.clone(),
                                RefinementFile {
                                    weight: f.weights()[y],
                                    rows: p.rows()[nb..].iter().map(row_file).collect(),
                                },
                            )
                        })
                        .collect(),
                }
            })
            .collect(),
        cones: sc
            .cones()
            .iter()
            .map(|c| ConeFile {
                name: c.name.clone(),
                date: c.date,
                point: c.point.weights().to_vec(),
                generators: c.cone.generators().to_vec(),
            })
            .collect(),
    }
}

/// Pretty JSON with sorted keys and floats in 17 significant digits.
struct Canonical<'a>(PrettyFormatter<'a>);

impl Formatter for Canonical<'_> {
    fn write_f64<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        value: f32,
    ) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    // Going through Value sorts object keys.
    let v = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut out,
        Canonical(PrettyFormatter::with_indent(b"  ")),
    );
    v.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

pub fn serialize_scenario(sc: &Scenario) -> String {
    to_canonical_json(&to_file(sc)).expect("scenario files contain only JSON-representable data")
}

/// Writes rows as comma-separated values with an LF terminator.
pub fn write_csv<W: std::io::Write>(
    out: W,
    header: &[String],
    rows: &[Vec<String>],
) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
