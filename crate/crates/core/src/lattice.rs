//! Uniform evaluation lattices on the simplex.
//!
//! A lattice with denominator `m` holds every belief whose coordinates are
//! multiples of `1/m`. For two types this is the familiar uniform grid with
//! `m + 1` points on `[0, 1]`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::{Error, Result};

pub const DEFAULT_BINARY_RESOLUTION: u32 = 1001;
pub const DEFAULT_DENOMINATOR: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LookupMode {
    /// Queries must coincide with a lattice point.
    Strict,
    /// Queries snap to the nearest lattice point within half a pitch.
    Snap,
}

#[derive(Debug, Clone)]
pub struct Lattice {
    n: usize,
    denominator: u32,
    points: Vec<Belief>,
    index: HashMap<Vec<u32>, usize>,
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.denominator == other.denominator
    }
}

impl Lattice {
    pub fn new(n: usize, denominator: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidTypeSpace(
                "lattice needs at least two types".into(),
            ));
        }
        if denominator == 0 {
            return Err(Error::InvalidScenario(
                "lattice denominator must be positive".into(),
            ));
        }
        let mut points = Vec::new();
        let mut index = HashMap::new();
        let mut counts = vec![0u32; n];
        compositions(n, denominator, 0, &mut counts, &mut |k| {
            index.insert(k[..n - 1].to_vec(), points.len());
            points.push(point_of(k, denominator));
        });
        Ok(Self {
            n,
            denominator,
            points,
            index,
        })
    }

    /// Two-type lattice with `resolution` evenly spaced points.
    pub fn binary(resolution: u32) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidScenario(
                "resolution must be at least 2".into(),
            ));
        }
        Self::new(2, resolution - 1)
    }

    /// The default lattice for `n` types.
    pub fn default_for(n: usize) -> Result<Self> {
        if n == 2 {
            Self::binary(DEFAULT_BINARY_RESOLUTION)
        } else {
            Self::new(n, DEFAULT_DENOMINATOR)
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn denominator(&self) -> u32 {
        self.denominator
    }

    pub fn pitch(&self) -> f64 {
        1.0 / self.denominator as f64
    }

    pub fn points(&self) -> &[Belief] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn locate(&self, s: &Belief, mode: LookupMode, tol: f64) -> Result<usize> {
        if s.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: s.dim(),
            });
        }
        let m = self.denominator as f64;
        let key: Vec<u32> = match mode {
            LookupMode::Strict => {
                let mut key = Vec::with_capacity(self.n - 1);
                for &w in &s.weights()[..self.n - 1] {
                    let k = (w * m).round();
                    if (w - k / m).abs() > tol || k < 0.0 {
                        return Err(Error::OffLattice(s.weights().to_vec()));
                    }
                    key.push(k as u32);
                }
                key
            }
            LookupMode::Snap => {
                let k = largest_remainder(s.weights(), self.denominator);
                let dist = s
                    .weights()
                    .iter()
                    .zip(&k)
                    .map(|(w, &ki)| (w - ki as f64 / m).abs())
                    .fold(0.0, f64::max);
                if dist > 0.5 / m + tol {
                    return Err(Error::OffLattice(s.weights().to_vec()));
                }
                k[..self.n - 1].to_vec()
            }
        };
        self.index
            .get(&key)
            .copied()
            .ok_or_else(|| Error::OffLattice(s.weights().to_vec()))
    }
}

fn point_of(k: &[u32], m: u32) -> Belief {
    if k.len() == 2 {
        return Belief::binary(k[0] as f64 / m as f64);
    }
    Belief::from_raw(k.iter().map(|&v| v as f64 / m as f64).collect())
}

fn compositions(n: usize, remaining: u32, pos: usize, k: &mut [u32], f: &mut impl FnMut(&[u32])) {
    if pos == n - 1 {
        k[pos] = remaining;
        f(k);
        return;
    }
    for v in 0..=remaining {
        k[pos] = v;
        compositions(n, remaining - v, pos + 1, k, f);
    }
}

fn largest_remainder(w: &[f64], m: u32) -> Vec<u32> {
    let scaled: Vec<f64> = w.iter().map(|v| v.max(0.0) * m as f64).collect();
    let mut k: Vec<u32> = scaled.iter().map(|v| v.floor() as u32).collect();
    let assigned: u32 = k.iter().sum();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = scaled[a] - scaled[a].floor();
        let fb = scaled[b] - scaled[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut extra = m.saturating_sub(assigned) as usize;
    for &i in order.iter().cycle() {
        if extra == 0 {
            break;
        }
        k[i] += 1;
        extra -= 1;
    }
    k
}
