#![allow(dead_code)]

use std::sync::Arc;

use collapse_core::belief::{Belief, TypeSpace};
use collapse_core::lattice::Lattice;
use collapse_core::value::{DateEntry, Scenario, ValueFunction};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// Breakpoints on multiples of 1/1000 with values in [0, 1].
pub fn random_breakpoints(rng: &mut ChaCha8Rng, max_points: usize) -> Vec<(f64, f64)> {
    let k = rng.gen_range(2..=max_points);
    let mut xs: Vec<u32> = vec![0, 1000];
    while xs.len() < k {
        let x = rng.gen_range(1..1000);
        if !xs.contains(&x) {
            xs.push(x);
        }
    }
    xs.sort_unstable();
    xs.into_iter()
        .map(|x| (x as f64 / 1000.0, rng.gen_range(0.0..1.0)))
        .collect()
}

pub fn random_pwl(rng: &mut ChaCha8Rng, max_points: usize) -> ValueFunction {
    ValueFunction::pwl(random_breakpoints(rng, max_points)).unwrap()
}

/// History table: the posterior plus a nonnegative lift at each breakpoint,
/// zero half the time, capped at 1.
pub fn lifted(rng: &mut ChaCha8Rng, post: &[(f64, f64)]) -> Vec<(f64, f64)> {
    post.iter()
        .map(|&(p, v)| {
            let lift = if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(0.0..0.4)
            };
            (p, (v + lift).min(1.0).max(v))
        })
        .collect()
}

/// Two types, up to three dates, up to six breakpoints per table.
pub fn random_scenario(rng: &mut ChaCha8Rng, resolution: u32) -> Scenario {
    let dates = rng.gen_range(1..=3);
    let entries = (0..dates)
        .map(|t| {
            let post = random_breakpoints(rng, 6);
            let hist = lifted(rng, &post);
            DateEntry::new(
                t as u32 + 1,
                ValueFunction::pwl(post).unwrap(),
                ValueFunction::pwl(hist).unwrap(),
            )
        })
        .collect();
    let prior = rng.gen_range(50..=950) as f64 / 1000.0;
    Scenario::new(
        TypeSpace::new(["H", "L"]).unwrap(),
        Belief::binary(prior),
        Arc::new(Lattice::binary(resolution).unwrap()),
        1.0,
        entries,
    )
    .unwrap()
}

pub fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixtures() -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}
