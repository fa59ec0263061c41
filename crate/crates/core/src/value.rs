//! Reduced-form value functions on the simplex and the scenario that bundles
//! them by date.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;

use crate::belief::{Belief, TypeSpace};
use crate::certificates::{ConeProbe, NamedFamily};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, LookupMode};
use crate::Tolerances;

/// Piecewise-linear function of the first-type mass on a two-type simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Pwl1d {
    breakpoints: Vec<(f64, f64)>,
}

impl Pwl1d {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidValueFunction(
                "need at least two breakpoints".into(),
            ));
        }
        if breakpoints[0].0 != 0.0 || breakpoints[breakpoints.len() - 1].0 != 1.0 {
            return Err(Error::InvalidValueFunction(
                "breakpoints must start at p = 0 and end at p = 1".into(),
            ));
        }
        for (i, w) in breakpoints.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidValueFunction(format!(
                    "breakpoints not strictly increasing at index {}",
                    i + 1
                )));
            }
        }
        if let Some(i) = breakpoints
            .iter()
            .position(|(p, v)| !p.is_finite() || !v.is_finite())
        {
            return Err(Error::InvalidValueFunction(format!(
                "non-finite breakpoint {i}"
            )));
        }
        Ok(Self { breakpoints })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn eval_p(&self, p: f64) -> f64 {
        let bp = &self.breakpoints;
        let p = p.clamp(0.0, 1.0);
        // First breakpoint with abscissa >= p.
        let j = bp.partition_point(|(x, _)| *x < p);
        if j < bp.len() && bp[j].0 == p {
            return bp[j].1;
        }
        let (x0, v0) = bp[j - 1];
        let (x1, v1) = bp[j];
        v0 + (v1 - v0) * (p - x0) / (x1 - x0)
    }
}

/// Values sampled on every point of a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTable {
    lattice: Arc<Lattice>,
    values: Vec<f64>,
}

impl GridTable {
    pub fn new(lattice: Arc<Lattice>, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::InvalidValueFunction(format!(
                "grid has {} samples for a lattice of {} points",
                values.len(),
                lattice.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValueFunction(format!(
                "non-finite sample {i}"
            )));
        }
        Ok(Self { lattice, values })
    }

    /// Builds a table from `(belief, value)` samples that must hit every
    /// lattice point exactly once.
    pub fn from_samples(
        lattice: Arc<Lattice>,
        samples: &[(Belief, f64)],
        tol: f64,
    ) -> Result<Self> {
        let mut values = vec![f64::NAN; lattice.len()];
        for (b, v) in samples {
            let i = lattice.locate(b, LookupMode::Strict, tol)?;
            if !values[i].is_nan() {
                return Err(Error::InvalidValueFunction(format!(
                    "duplicate sample at {:?}",
                    b.weights()
                )));
            }
            values[i] = *v;
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::InvalidValueFunction(format!(
                "lattice point {:?} has no sample",
                lattice.points()[i].weights()
            )));
        }
        Self::new(lattice, values)
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValueFunction {
    Pwl1d(Pwl1d),
    Grid(GridTable),
}

impl ValueFunction {
    pub fn pwl(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        Pwl1d::new(breakpoints).map(Self::Pwl1d)
    }

    pub fn constant_binary(c: f64) -> Self {
        Self::Pwl1d(Pwl1d {
            breakpoints: vec![(0.0, c), (1.0, c)],
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Pwl1d(_) => 2,
            Self::Grid(g) => g.lattice.dim(),
        }
    }

    pub fn eval(&self, s: &Belief) -> Result<f64> {
        self.eval_with(s, LookupMode::Strict, Tolerances::default().simplex)
    }

    pub fn eval_with(&self, s: &Belief, mode: LookupMode, tol: f64) -> Result<f64> {
        if s.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: s.dim(),
            });
        }
        match self {
            Self::Pwl1d(f) => Ok(f.eval_p(s.p())),
            Self::Grid(g) => Ok(g.values[g.lattice.locate(s, mode, tol)?]),
        }
    }

    /// Largest and smallest value; exact for both kinds.
    pub fn range(&self) -> (f64, f64) {
        let vals: Box<dyn Iterator<Item = f64>> = match self {
            Self::Pwl1d(f) => Box::new(f.breakpoints.iter().map(|b| b.1)),
            Self::Grid(g) => Box::new(g.values.iter().copied()),
        };
        vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
    }

    fn breakpoint_ps(&self) -> Vec<f64> {
        match self {
            Self::Pwl1d(f) => f.breakpoints.iter().map(|b| b.0).collect(),
            Self::Grid(_) => Vec::new(),
        }
    }
}

/// A value table for one conditioning set of public labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTable {
    pub name: String,
    pub conditioning: BTreeSet<String>,
    pub value: ValueFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DateEntry {
    pub t: u32,
    /// Value when submechanisms condition on the posterior only.
    pub posterior: ValueFunction,
    /// Value when submechanisms condition on the full public history.
    pub history: ValueFunction,
    pub labels: Vec<LabelTable>,
}

impl DateEntry {
    pub fn new(t: u32, posterior: ValueFunction, history: ValueFunction) -> Self {
        Self {
            t,
            posterior,
            history,
            labels: Vec::new(),
        }
    }

    pub fn with_label(mut self, name: &str, conditioning: &[&str], value: ValueFunction) -> Self {
        self.labels.push(LabelTable {
            name: name.to_string(),
            conditioning: conditioning.iter().map(|s| s.to_string()).collect(),
            value,
        });
        self
    }

    /// Every label name mentioned by this date's tables.
    pub fn declared_labels(&self) -> BTreeSet<String> {
        self.labels
            .iter()
            .flat_map(|l| l.conditioning.iter().cloned())
            .collect()
    }

    /// Table conditioning on exactly `set`; the empty set is the posterior.
    pub fn table_for(&self, set: &BTreeSet<String>) -> Option<&ValueFunction> {
        if set.is_empty() {
            return Some(&self.posterior);
        }
        self.labels
            .iter()
            .find(|l| &l.conditioning == set)
            .map(|l| &l.value)
    }

    fn functions(&self) -> impl Iterator<Item = &ValueFunction> {
        [&self.posterior, &self.history]
            .into_iter()
            .chain(self.labels.iter().map(|l| &l.value))
    }
}

/// Which information each date's value conditions on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "labels")]
pub enum Family {
    Posterior,
    History,
    /// The named labels, intersected with those each date declares.
    Labels(BTreeSet<String>),
}

/// A function tabulated on a finite point set.
#[derive(Debug, Clone)]
pub struct PointTable {
    pub points: Arc<Vec<Belief>>,
    pub values: Vec<f64>,
}

impl PointTable {
    /// Tabulates `f` on the lattice, plus its breakpoints for two types.
    pub fn from_function(f: &ValueFunction, lattice: &Lattice) -> Result<Self> {
        let points = Arc::new(evaluation_points(lattice, std::slice::from_ref(f)));
        let values = points
            .iter()
            .map(|s| f.eval(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points, values })
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Belief::dim)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Lattice points plus, when every function is piecewise linear, all
/// breakpoints that are not already lattice points. Sorted by first
/// coordinate for two types.
fn evaluation_points(lattice: &Lattice, functions: &[ValueFunction]) -> Vec<Belief> {
    let mut points = lattice.points().to_vec();
    let all_pwl = functions
        .iter()
        .all(|f| matches!(f, ValueFunction::Pwl1d(_)));
    if lattice.dim() == 2 && all_pwl {
        let m = lattice.denominator() as f64;
        let mut extra: Vec<f64> = functions
            .iter()
            .flat_map(ValueFunction::breakpoint_ps)
            .filter(|p| (p * m - (p * m).round()).abs() > 1e-9)
            .collect();
        extra.sort_by(f64::total_cmp);
        extra.dedup();
        points.extend(extra.into_iter().map(Belief::binary));
        points.sort_by(|a, b| a.p().total_cmp(&b.p()));
    }
    points
}

#[derive(Debug, Clone)]
pub struct Scenario {
    name: String,
    notes: String,
    space: TypeSpace,
    prior: Belief,
    lattice: Arc<Lattice>,
    r_max: f64,
    dates: Vec<DateEntry>,
    params: BTreeMap<String, f64>,
    families: Vec<NamedFamily>,
    cones: Vec<ConeProbe>,
    points: Arc<Vec<Belief>>,
}

impl PartialEq for Scenario {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.notes == other.notes
            && self.space == other.space
            && self.prior == other.prior
            && self.lattice == other.lattice
            && self.r_max == other.r_max
            && self.dates == other.dates
            && self.params == other.params
            && self.families == other.families
            && self.cones == other.cones
    }
}

impl Scenario {
    pub fn new(
        space: TypeSpace,
        prior: Belief,
        lattice: Arc<Lattice>,
        r_max: f64,
        dates: Vec<DateEntry>,
    ) -> Result<Self> {
        let n = space.len();
        if prior.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: prior.dim(),
            });
        }
        if lattice.dim() != n {
            return Err(Error::InvalidScenario(format!(
                "lattice is over {} types, scenario has {n}",
                lattice.dim()
            )));
        }
        if dates.is_empty() {
            return Err(Error::InvalidScenario("scenario has no dates".into()));
        }
        if !r_max.is_finite() {
            return Err(Error::InvalidScenario(
                "revenue bound must be finite".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for d in &dates {
            if !seen.insert(d.t) {
                return Err(Error::InvalidScenario(format!(
                    "date {} appears twice",
                    d.t
                )));
            }
            for f in d.functions() {
                if f.dim() != n {
                    return Err(Error::InvalidScenario(format!(
                        "date {} has a value function over {} types",
                        d.t,
                        f.dim()
                    )));
                }
                if let ValueFunction::Grid(g) = f {
                    if **g.lattice() != *lattice {
                        return Err(Error::InvalidScenario(format!(
                            "date {} has a grid on a different lattice",
                            d.t
                        )));
                    }
                }
                let (_, hi) = f.range();
                if hi > r_max {
                    return Err(Error::InvalidScenario(format!(
                        "date {} has value {hi} above the revenue bound {r_max}",
                        d.t
                    )));
                }
            }
        }
        let all: Vec<ValueFunction> = dates.iter().flat_map(|d| d.functions().cloned()).collect();
        let points = Arc::new(evaluation_points(&lattice, &all));
        Ok(Self {
            name: String::new(),
            notes: String::new(),
            space,
            prior,
            lattice,
            r_max,
            dates,
            params: BTreeMap::new(),
            families: Vec::new(),
            cones: Vec::new(),
            points,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>, notes: impl Into<String>) -> Self {
        self.name = name.into();
        self.notes = notes.into();
        self
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }

    pub fn with_certificates(mut self, families: Vec<NamedFamily>, cones: Vec<ConeProbe>) -> Self {
        self.families = families;
        self.cones = cones;
        self
    }

    /// Same scenario at another prior.
    pub fn with_prior(mut self, prior: Belief) -> Result<Self> {
        if prior.dim() != self.space.len() {
            return Err(Error::DimensionMismatch {
                expected: self.space.len(),
                found: prior.dim(),
            });
        }
        self.prior = prior;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn notes(&self) -> &str {
        &self.notes
    }

    pub fn space(&self) -> &TypeSpace {
        &self.space
    }

    pub fn prior(&self) -> &Belief {
        &self.prior
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn dates(&self) -> &[DateEntry] {
        &self.dates
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn families(&self) -> &[NamedFamily] {
        &self.families
    }

    pub fn cones(&self) -> &[ConeProbe] {
        &self.cones
    }

    /// Points on which envelopes, supports and scans are computed.
    pub fn points(&self) -> &Arc<Vec<Belief>> {
        &self.points
    }

    pub fn date(&self, t: u32) -> Result<&DateEntry> {
        self.dates
            .iter()
            .find(|d| d.t == t)
            .ok_or(Error::UnknownDate(t))
    }

    /// The value function a date uses under `family`.
    pub fn family_function<'a>(
        &self,
        date: &'a DateEntry,
        family: &Family,
    ) -> Result<&'a ValueFunction> {
        match family {
            Family::Posterior => Ok(&date.posterior),
            Family::History => Ok(&date.history),
            Family::Labels(set) => {
                let declared = date.declared_labels();
                let effective: BTreeSet<String> = set.intersection(&declared).cloned().collect();
                date.table_for(&effective)
                    .ok_or_else(|| Error::MissingTable {
                        date: date.t,
                        labels: effective.into_iter().collect(),
                    })
            }
        }
    }

    pub fn tabulate(&self, f: &ValueFunction) -> Result<Vec<f64>> {
        self.points.iter().map(|s| f.eval(s)).collect()
    }

    /// Per-date tables of the family on the evaluation points, in date order.
    pub fn family_tables(&self, family: &Family) -> Result<Vec<Vec<f64>>> {
        self.dates
            .iter()
            .map(|d| self.tabulate(self.family_function(d, family)?))
            .collect()
    }

    /// Pointwise supremum over dates of the family's values.
    pub fn benchmark(&self, family: &Family) -> Result<PointTable> {
        let tables = self.family_tables(family)?;
        let values = (0..self.points.len())
            .map(|i| {
                tables
                    .iter()
                    .map(|t| t[i])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        Ok(PointTable {
            points: Arc::clone(&self.points),
            values,
        })
    }
}

/// Posterior benchmark: the best date's posterior-only value at `s`.
pub fn g_of(sc: &Scenario, s: &Belief) -> Result<f64> {
    sup_over_dates(sc, s, |d| &d.posterior)
}

/// History benchmark: the best date's full-history value at `s`.
pub fn ghat_of(sc: &Scenario, s: &Belief) -> Result<f64> {
    sup_over_dates(sc, s, |d| &d.history)
}

fn sup_over_dates(
    sc: &Scenario,
    s: &Belief,
    pick: impl Fn(&DateEntry) -> &ValueFunction,
) -> Result<f64> {
    sc.dates
        .iter()
        .map(|d| pick(d).eval(s))
        .try_fold(f64::NEG_INFINITY, |acc, v| v.map(|v| acc.max(v)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneViolation {
    pub t: u32,
    pub label: String,
    pub belief: Belief,
    pub gap: f64,
}

/// Points where a date's tables break `posterior <= label <= history`.
pub fn check_monotone(sc: &Scenario, tol: f64) -> Result<Vec<MonotoneViolation>> {
    let mut out = Vec::new();
    for d in &sc.dates {
        let post = sc.tabulate(&d.posterior)?;
        let hist = sc.tabulate(&d.history)?;
        let labels: Vec<(&str, Vec<f64>)> = d
            .labels
            .iter()
            .map(|l| Ok((l.name.as_str(), sc.tabulate(&l.value)?)))
            .collect::<Result<_>>()?;
        for (i, s) in sc.points.iter().enumerate() {
            let mut push = |label: &str, gap: f64| {
                if gap > tol {
                    out.push(MonotoneViolation {
                        t: d.t,
                        label: label.to_string(),
                        belief: s.clone(),
                        gap,
                    });
                }
            };
            push("history", post[i] - hist[i]);
            for (name, vals) in &labels {
                push(name, post[i] - vals[i]);
                push(name, vals[i] - hist[i]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g_ab() -> ValueFunction {
        ValueFunction::pwl(vec![(0.0, 0.4), (0.5, 0.5), (1.0, 0.4)]).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn pwl_eval_examples() {
        let g = g_ab();
        assert!(close(g.eval(&Belief::binary(0.8)).unwrap(), 0.44));
        assert_eq!(g.eval(&Belief::binary(0.0)).unwrap(), 0.4);
        assert!(close(g.eval(&Belief::binary(0.3)).unwrap(), 0.46));
        assert_eq!(g.eval(&Belief::binary(0.5)).unwrap(), 0.5);
    }

    #[test]
    fn pwl_validation() {
        assert!(ValueFunction::pwl(vec![(0.0, 1.0)]).is_err());
        assert!(ValueFunction::pwl(vec![(0.1, 1.0), (1.0, 1.0)]).is_err());
        assert!(ValueFunction::pwl(vec![(0.0, 1.0), (0.5, 1.0), (0.5, 2.0), (1.0, 1.0)]).is_err());
        assert!(ValueFunction::pwl(vec![(0.0, f64::NAN), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn grid_is_strict_off_lattice() {
        let lattice = Arc::new(Lattice::binary(11).unwrap());
        let values = lattice.points().iter().map(|s| s.p()).collect();
        let g = ValueFunction::Grid(GridTable::new(Arc::clone(&lattice), values).unwrap());
        assert!(close(g.eval(&Belief::binary(0.7)).unwrap(), 0.7));
        assert!(matches!(
            g.eval(&Belief::binary(0.75)),
            Err(Error::OffLattice(_))
        ));
        assert!(close(
            g.eval_with(&Belief::binary(0.72), LookupMode::Snap, 1e-9)
                .unwrap(),
            0.7
        ));
        assert!(matches!(
            g.eval(&Belief::vertex(3, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn grid_from_samples_requires_coverage() {
        let lattice = Arc::new(Lattice::binary(3).unwrap());
        let samples = vec![(Belief::binary(0.0), 1.0), (Belief::binary(1.0), 1.0)];
        assert!(GridTable::from_samples(Arc::clone(&lattice), &samples, 1e-9).is_err());
    }

    fn calendar_only(p0: f64) -> Scenario {
        let d1 = DateEntry::new(
            1,
            ValueFunction::constant_binary(0.0),
            ValueFunction::pwl(vec![(0.0, 0.0), (1.0, 0.5)]).unwrap(),
        );
        let u2 = ValueFunction::pwl(vec![(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let d2 = DateEntry::new(2, u2.clone(), u2);
        Scenario::new(
            TypeSpace::new(["0", "1"]).unwrap(),
            Belief::binary(p0),
            Arc::new(Lattice::binary(1001).unwrap()),
            1.0,
            vec![d1, d2],
        )
        .unwrap()
    }

    #[test]
    fn benchmarks_without_date_collapse() {
        let sc = calendar_only(0.5);
        let s = Belief::binary(0.6);
        assert!(close(g_of(&sc, &s).unwrap(), 0.6));
        assert!(close(ghat_of(&sc, &s).unwrap(), 0.6));
        assert!(check_monotone(&sc, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn single_date_benchmark_is_its_value() {
        let g = g_ab();
        let sc = Scenario::new(
            TypeSpace::new(["H", "L"]).unwrap(),
            Belief::binary(0.8),
            Arc::new(Lattice::binary(101).unwrap()),
            1.0,
            vec![DateEntry::new(1, g.clone(), g.clone())],
        )
        .unwrap();
        for s in sc.points().iter() {
            assert_eq!(g_of(&sc, s).unwrap(), g.eval(s).unwrap());
        }
        assert!(check_monotone(&sc, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn monotone_violation_is_reported() {
        let lattice = Arc::new(Lattice::binary(3).unwrap());
        let post = GridTable::new(Arc::clone(&lattice), vec![0.0, 1.0, 0.0]).unwrap();
        let hist = GridTable::new(Arc::clone(&lattice), vec![0.0, 0.9, 0.0]).unwrap();
        let sc = Scenario::new(
            TypeSpace::new(["a", "b"]).unwrap(),
            Belief::binary(0.5),
            lattice,
            2.0,
            vec![DateEntry::new(
                0,
                ValueFunction::Grid(post),
                ValueFunction::Grid(hist),
            )],
        )
        .unwrap();
        let v = check_monotone(&sc, 1e-9).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].label, "history");
        assert!((v[0].gap - 0.1).abs() < 1e-12);
        assert_eq!(v[0].belief, Belief::binary(0.5));
    }

    #[test]
    fn scenario_validation() {
        let space = TypeSpace::new(["a", "b"]).unwrap();
        let lattice = Arc::new(Lattice::binary(11).unwrap());
        let f = ValueFunction::constant_binary(0.5);
        let d = || DateEntry::new(1, f.clone(), f.clone());
        assert!(Scenario::new(
            space.clone(),
            Belief::binary(0.5),
            Arc::clone(&lattice),
            1.0,
            vec![]
        )
        .is_err());
        assert!(Scenario::new(
            space.clone(),
            Belief::binary(0.5),
            Arc::clone(&lattice),
            1.0,
            vec![d(), d()]
        )
        .is_err());
        assert!(Scenario::new(
            space.clone(),
            Belief::binary(0.5),
            Arc::clone(&lattice),
            0.4,
            vec![d()]
        )
        .is_err());
        assert!(Scenario::new(space, Belief::vertex(3, 0), lattice, 1.0, vec![d()]).is_err());
    }

    #[test]
    fn off_lattice_breakpoints_join_the_point_set() {
        let f = ValueFunction::pwl(vec![(0.0, 0.0), (0.123456, 1.0), (1.0, 0.0)]).unwrap();
        let t = PointTable::from_function(&f, &Lattice::binary(11).unwrap()).unwrap();
        assert_eq!(t.len(), 12);
        assert!(t.points.windows(2).all(|w| w[0].p() < w[1].p()));
        assert!(t.points.iter().any(|s| s.p() == 0.123456));
    }
}
