use collapse_core::lp::{
    self, LpProblem, LpStatus, Pricing, Relation, Sense, SolverOptions, VarBound,
};
use proptest::prelude::*;

const BOX: f64 = 10.0;

fn problem(sense: Sense, c: Vec<f64>, rows: &[(Vec<f64>, bool, f64)]) -> LpProblem {
    let d = c.len();
    let mut p = LpProblem::new(sense, c);
    for (a, ge, b) in rows {
        p.add_row(a.clone(), if *ge { Relation::Ge } else { Relation::Le }, *b);
    }
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        p.add_row(e.clone(), Relation::Le, BOX);
        p.add_row(e, Relation::Ge, -BOX);
    }
    p
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if m < k {
        return vec![];
    }
    let mut out = subsets(m - 1, k);
    for mut s in subsets(m - 1, k - 1) {
        s.push(m - 1);
        out.push(s);
    }
    out
}

/// Best vertex of a bounded polyhedron, or `None` if empty.
fn brute_force(p: &LpProblem) -> Option<f64> {
    let d = p.num_vars();
    let rows: Vec<(Vec<f64>, f64)> = p
        .rows
        .iter()
        .map(|r| match r.relation {
            Relation::Ge => (r.coeffs.iter().map(|v| -v).collect(), -r.rhs),
            _ => (r.coeffs.clone(), r.rhs),
        })
        .collect();
    let mut best: Option<f64> = None;
    for s in subsets(rows.len(), d) {
        let a = s.iter().map(|&i| rows[i].0.clone()).collect();
        let b = s.iter().map(|&i| rows[i].1).collect();
        let Some(x) = solve_dense(a, b) else { continue };
        let feasible = rows
            .iter()
            .all(|(a, b)| a.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>() <= b + 1e-7);
        if feasible {
            let v: f64 = p.objective.iter().zip(&x).map(|(u, v)| u * v).sum();
            best = Some(match (best, p.sense) {
                (None, _) => v,
                (Some(b), Sense::Maximize) => b.max(v),
                (Some(b), Sense::Minimize) => b.min(v),
            });
        }
    }
    best
}

fn coeff() -> impl Strategy<Value = f64> {
    (-5i32..=5).prop_map(|v| v as f64)
}

fn random_lp() -> impl Strategy<Value = LpProblem> {
    (1usize..=3).prop_flat_map(|d| {
        (
            any::<bool>(),
            prop::collection::vec(coeff(), d),
            prop::collection::vec(
                (prop::collection::vec(coeff(), d), any::<bool>(), -8i32..=8),
                0..=5,
            ),
        )
            .prop_map(|(max, c, rows)| {
                let rows: Vec<_> = rows
                    .into_iter()
                    .map(|(a, ge, b)| (a, ge, b as f64))
                    .collect();
                problem(
                    if max {
                        Sense::Maximize
                    } else {
                        Sense::Minimize
                    },
                    c,
                    &rows,
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_vertex_enumeration(p in random_lp()) {
        let sol = lp::solve(&p).unwrap();
        match brute_force(&p) {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(v) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - v).abs() <= 1e-7 * (1.0 + v.abs()), "{} vs {}", sol.objective, v);
                prop_assert!(sol.residuals.primal <= 1e-10);
                prop_assert!(sol.residuals.dual <= 1e-10);
                prop_assert!(sol.residuals.gap <= 1e-10 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn pricing_rules_agree(p in random_lp()) {
        let a = lp::solve(&p).unwrap();
        let b = lp::solve_with(&p, &SolverOptions { pricing: Pricing::Dantzig, ..Default::default() }).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.is_optimal() {
            prop_assert!((a.objective - b.objective).abs() <= 1e-8 * (1.0 + a.objective.abs()));
        }
    }

    #[test]
    fn strong_duality(p in random_lp()) {
        let sol = lp::solve(&p).unwrap();
        if sol.is_optimal() {
            let dual: f64 = p.rows.iter().zip(&sol.duals).map(|(r, y)| r.rhs * y).sum();
            prop_assert!((dual - sol.objective).abs() <= 1e-8 * (1.0 + sol.objective.abs()));
            for &i in &sol.active {
                let act = p.activity(i, &sol.x);
                prop_assert!((act - p.rows[i].rhs).abs() <= 1e-9 * (1.0 + p.rows[i].rhs.abs()));
            }
        }
    }

    #[test]
    fn scaling_rows_keeps_value(p in random_lp(), k in 1u32..=7) {
        let mut q = p.clone();
        for r in &mut q.rows {
            r.coeffs.iter_mut().for_each(|v| *v *= k as f64);
            r.rhs *= k as f64;
        }
        let a = lp::solve(&p).unwrap();
        let b = lp::solve(&q).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.is_optimal() {
            prop_assert!((a.objective - b.objective).abs() <= 1e-8 * (1.0 + a.objective.abs()));
        }
    }

    #[test]
    fn deterministic(p in random_lp()) {
        let a = lp::solve(&p).unwrap();
        let b = lp::solve(&p).unwrap();
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}

#[test]
fn unbounded_detected() {
    let mut p = LpProblem::new(Sense::Maximize, vec![1.0, 1.0]).with_bounds(VarBound::NonNegative);
    p.add_row(vec![1.0, -1.0], Relation::Le, 1.0);
    assert_eq!(lp::solve(&p).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn degenerate_cycle_example() {
    // Beale's example cycles under largest-coefficient pricing without a guard.
    let mut p = LpProblem::new(Sense::Minimize, vec![-0.75, 150.0, -0.02, 6.0])
        .with_bounds(VarBound::NonNegative);
    p.add_row(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
    p.add_row(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
    p.add_row(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
    for pricing in [Pricing::Bland, Pricing::Dantzig] {
        let s = lp::solve_with(
            &p,
            &SolverOptions {
                pricing,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(s.is_optimal());
        assert!((s.objective + 0.05).abs() < 1e-12, "{}", s.objective);
    }
}
