use proptest::prelude::*;

use super::*;

/// Solves a square system by Gaussian elimination; `None` when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(p, c);
        b.swap(p, c);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Vertex enumeration for LPs whose columns all have bounds `[0, u]`, u finite.
fn vertex_oracle(p: &LpProblem) -> Option<f64> {
    let n = p.columns.len();
    let m = p.rows.len();
    // variables: x (n), upper slacks (n), row slacks (one per inequality)
    let ineq: Vec<usize> = (0..m).filter(|&r| p.rows[r].sense != Sense::Eq).collect();
    let nv = 2 * n + ineq.len();
    let rows = m + n;
    let mut a = vec![vec![0.0; nv]; rows];
    let mut b = vec![0.0; rows];
    let mut c = vec![0.0; nv];
    for (j, col) in p.columns.iter().enumerate() {
        c[j] = col.cost;
        for &(r, v) in &col.entries {
            a[r][j] += v;
        }
        a[m + j][j] = 1.0;
        a[m + j][n + j] = 1.0;
        b[m + j] = col.upper;
    }
    for (k, &r) in ineq.iter().enumerate() {
        a[r][2 * n + k] = if p.rows[r].sense == Sense::Ge {
            -1.0
        } else {
            1.0
        };
    }
    for r in 0..m {
        b[r] = p.rows[r].rhs;
    }
    // drop linearly dependent rows so square bases exist; inconsistent ones mean infeasible
    let (a, b) = independent_rows(a, b)?;
    let rows = a.len();
    let mut best: Option<f64> = None;
    for basis in combinations(nv, rows) {
        let mat = (0..rows)
            .map(|r| basis.iter().map(|&j| a[r][j]).collect())
            .collect();
        if let Some(xb) = solve_square(mat, b.clone()) {
            if xb.iter().all(|v| *v >= -1e-9) {
                let obj: f64 = basis.iter().zip(&xb).map(|(&j, v)| c[j] * v).sum();
                best = Some(best.map_or(obj, |o: f64| o.min(obj)));
            }
        }
    }
    best
}

/// Keeps a maximal independent subset of the rows of `[a | b]`, or `None`
/// when a dependent row contradicts the kept ones.
fn independent_rows(a: Vec<Vec<f64>>, b: Vec<f64>) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
    let nv = a.first().map_or(0, Vec::len);
    // reduced copies in echelon form with their pivot columns
    let mut echelon: Vec<(Vec<f64>, f64, usize)> = Vec::new();
    let mut keep = Vec::new();
    for (r, row) in a.iter().enumerate() {
        let (mut v, mut rhs) = (row.clone(), b[r]);
        for (e, eb, piv) in &echelon {
            let f = v[*piv] / e[*piv];
            if f != 0.0 {
                for k in 0..nv {
                    v[k] -= f * e[k];
                }
                rhs -= f * eb;
            }
        }
        match (0..nv).max_by(|&x, &y| v[x].abs().total_cmp(&v[y].abs())) {
            Some(piv) if v[piv].abs() > 1e-9 => {
                echelon.push((v, rhs, piv));
                keep.push(r);
            }
            _ if rhs.abs() > 1e-9 => return None,
            _ => {}
        }
    }
    Some((
        keep.iter().map(|&r| a[r].clone()).collect(),
        keep.iter().map(|&r| b[r]).collect(),
    ))
}

fn check_duality(p: &LpProblem, s: &LpSolution) {
    let tol = 1e-6 * (1.0 + s.objective.abs());
    let mut dual_obj: f64 = p.rows.iter().zip(&s.duals).map(|(r, y)| r.rhs * y).sum();
    for (j, col) in p.columns.iter().enumerate() {
        let d = s.reduced_costs[j];
        dual_obj += if d >= 0.0 {
            col.lower * d
        } else {
            col.upper * d
        };
    }
    assert!(
        (dual_obj - s.objective).abs() <= tol,
        "primal {} dual {}",
        s.objective,
        dual_obj
    );
    let mut lhs = vec![0.0; p.rows.len()];
    for (j, col) in p.columns.iter().enumerate() {
        for &(r, v) in &col.entries {
            lhs[r] += v * s.x[j];
        }
    }
    for (r, row) in p.rows.iter().enumerate() {
        match row.sense {
            Sense::Ge => assert!(s.duals[r] >= -1e-9),
            Sense::Le => assert!(s.duals[r] <= 1e-9),
            Sense::Eq => {}
        }
        assert!(
            (s.duals[r] * (lhs[r] - row.rhs)).abs() <= 1e-7,
            "slackness on row {r}"
        );
    }
}

#[test]
fn forced_single_column() {
    let mut p = LpProblem::new();
    let r = p.add_row("conv", Sense::Eq, 1.0);
    p.add_column(LpColumn::new(7.0, 0.0, f64::INFINITY, vec![(r, 1.0)]))
        .unwrap();
    let s = p.solve(None).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.objective - 7.0).abs() < 1e-12);
    assert!((s.duals[0] - 7.0).abs() < 1e-12);
}

#[test]
fn single_binding_row() {
    let mut p = LpProblem::new();
    let r = p.add_row("floor", Sense::Ge, 3.0);
    p.add_column(LpColumn::new(1.0, 0.0, f64::INFINITY, vec![(r, 1.0)]))
        .unwrap();
    let s = p.solve(None).unwrap();
    assert!((s.objective - 3.0).abs() < 1e-12);
    assert!((s.duals[0] - 1.0).abs() < 1e-12);
}

/// Two segments with two plans each; plans 1 use 2 and 1 units of a budget of 2.
fn two_by_two(budget_sense: Sense) -> LpProblem {
    let mut p = LpProblem::new();
    let c0 = p.add_row("conv0", Sense::Eq, 1.0);
    let c1 = p.add_row("conv1", Sense::Eq, 1.0);
    let (sign, rhs) = if budget_sense == Sense::Le {
        (1.0, 2.0)
    } else {
        (-1.0, -2.0)
    };
    let b = p.add_row("budget", budget_sense, rhs);
    for (row, cost, usage) in [
        (c0, 10.0, 0.0),
        (c0, 4.0, 2.0),
        (c1, 8.0, 0.0),
        (c1, 5.0, 1.0),
    ] {
        p.add_column(LpColumn::new(
            cost,
            0.0,
            f64::INFINITY,
            vec![(row, 1.0), (b, sign * usage)],
        ))
        .unwrap();
    }
    p
}

#[test]
fn two_segment_budget_matches_vertex_enumeration() {
    let mut p = two_by_two(Sense::Le);
    let s = p.solve(None).unwrap();
    for c in &mut p.columns {
        c.upper = 1.0;
    }
    let oracle = vertex_oracle(&p).unwrap();
    assert!(
        (s.objective - oracle).abs() < 1e-9,
        "{} vs {oracle}",
        s.objective
    );
    check_duality(&p, &s);
}

#[test]
fn le_rows_round_trip_through_negation() {
    let native = two_by_two(Sense::Le).solve(None).unwrap();
    let negated = two_by_two(Sense::Ge).solve(None).unwrap();
    assert!((native.objective - negated.objective).abs() < 1e-12);
    for (a, b) in native.x.iter().zip(&negated.x) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!((native.duals[2] + negated.duals[2]).abs() < 1e-9);
}

#[test]
fn duplicate_column_keeps_objective() {
    let mut p = two_by_two(Sense::Le);
    let s = p.solve(None).unwrap();
    let dup = p.columns[1].clone();
    p.add_column(dup).unwrap();
    let t = p.solve(Some(&s.basis)).unwrap();
    assert!(t.warm_started);
    assert!((s.objective - t.objective).abs() < 1e-12);
}

#[test]
fn improving_column_lowers_objective_from_warm_start() {
    let mut p = two_by_two(Sense::Le);
    let s = p.solve(None).unwrap();
    // reduced cost 3 - duals·a is negative for a cheap plan of segment 0 that uses no budget
    p.add_column(LpColumn::new(3.0, 0.0, f64::INFINITY, vec![(0, 1.0)]))
        .unwrap();
    let rc = 3.0 - s.duals[0];
    assert!(rc < 0.0);
    let t = p.solve(Some(&s.basis)).unwrap();
    let cold = p.solve(None).unwrap();
    assert!(t.warm_started);
    assert!(t.objective < s.objective - 1e-9);
    assert!((t.objective - cold.objective).abs() < 1e-9);
}

#[test]
fn missing_row_is_structural() {
    let mut p = LpProblem::new();
    p.add_row("r", Sense::Ge, 1.0);
    let err = p
        .add_column(LpColumn::new(1.0, 0.0, 1.0, vec![(3, 1.0)]))
        .unwrap_err();
    assert!(matches!(err, Error::Structure(_)));
}

#[test]
fn infeasible_and_unbounded_are_reported() {
    let mut p = LpProblem::new();
    let a = p.add_row("lo", Sense::Ge, 2.0);
    let b = p.add_row("hi", Sense::Le, 1.0);
    p.add_column(LpColumn::new(
        1.0,
        0.0,
        f64::INFINITY,
        vec![(a, 1.0), (b, 1.0)],
    ))
    .unwrap();
    assert_eq!(p.solve(None).unwrap().status, LpStatus::Infeasible);

    let mut q = LpProblem::new();
    let r = q.add_row("lo", Sense::Ge, 1.0);
    q.add_column(LpColumn::new(-1.0, 0.0, f64::INFINITY, vec![(r, 1.0)]))
        .unwrap();
    assert_eq!(q.solve(None).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn bounds_are_respected() {
    let mut p = LpProblem::new();
    let r = p.add_row("cover", Sense::Ge, 5.0);
    p.add_column(LpColumn::new(1.0, 0.0, 2.0, vec![(r, 1.0)]))
        .unwrap();
    p.add_column(LpColumn::new(3.0, 1.0, 10.0, vec![(r, 1.0)]))
        .unwrap();
    let s = p.solve(None).unwrap();
    assert!((s.x[0] - 2.0).abs() < 1e-12);
    assert!((s.x[1] - 3.0).abs() < 1e-12);
    assert!((s.objective - 11.0).abs() < 1e-9);
    check_duality(&p, &s);
}

#[test]
fn integral_optimum_is_returned_unchanged() {
    let p = two_by_two(Sense::Le);
    let lp = p.solve(None).unwrap();
    let mip = solve_integer_restricted(&p, &[true; 4], DEFAULT_NODE_CAP).unwrap();
    assert_eq!(mip.nodes, 1);
    assert!((mip.objective - lp.objective).abs() < 1e-12);
}

#[test]
fn fractional_split_resolves_to_cheaper_feasible_plan() {
    // a half-half mix of plans using 0 and 4 units meets the 2-unit cap on average only
    let mut p = LpProblem::new();
    let c = p.add_row("conv", Sense::Eq, 1.0);
    let b = p.add_row("budget", Sense::Le, 2.0);
    let cover = p.add_row("cover", Sense::Ge, 1.0);
    p.add_column(LpColumn::new(
        1.0,
        0.0,
        f64::INFINITY,
        vec![(c, 1.0), (b, 0.0), (cover, 2.0)],
    ))
    .unwrap();
    p.add_column(LpColumn::new(
        0.0,
        0.0,
        f64::INFINITY,
        vec![(c, 1.0), (b, 4.0)],
    ))
    .unwrap();
    p.add_column(LpColumn::new(
        3.0,
        0.0,
        f64::INFINITY,
        vec![(c, 1.0), (b, 1.0), (cover, 1.0)],
    ))
    .unwrap();
    let lp = p.solve(None).unwrap();
    assert!(lp.x[0] > 0.0 && lp.x[1] > 0.0);
    let mip = solve_integer_restricted(&p, &[true; 3], DEFAULT_NODE_CAP).unwrap();
    let x = mip.x.unwrap();
    assert_eq!(x, vec![1.0, 0.0, 0.0]);
    assert!((mip.objective - 1.0).abs() < 1e-12);
}

#[test]
fn node_cap_truncates() {
    let mut p = LpProblem::new();
    let r = p.add_row("odd", Sense::Eq, 1.0);
    for _ in 0..6 {
        p.add_column(LpColumn::new(1.0, 0.0, 1.0, vec![(r, 2.0)]))
            .unwrap();
    }
    let mip = solve_integer_restricted(&p, &[true; 6], 5).unwrap();
    assert!(mip.truncated);
    assert!(mip.x.is_none());
}

#[test]
fn lp_dump_lists_rows_and_bounds() {
    let mut p = two_by_two(Sense::Le);
    p.columns[0].name = "z[0][0]".into();
    p.columns[3].upper = 1.0;
    let mut buf = Vec::new();
    write_lp(&p, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("Minimize\n obj: 10 z[0][0] + 4 x1 + 8 x2 + 5 x3\n"));
    assert!(text.contains(" budget: 0 z[0][0] + 2 x1 + 0 x2 + 1 x3 <= 2\n"));
    assert!(text.contains(" 0 <= x3 <= 1\n"));
    assert!(text.ends_with("End\n"));
}

fn arb_lp() -> impl Strategy<Value = LpProblem> {
    (2usize..5, 1usize..4).prop_flat_map(|(n, m)| {
        (
            proptest::collection::vec((-3i32..4, 1i32..5), n),
            proptest::collection::vec((0u8..3, -4i32..8), m),
            proptest::collection::vec(-3i32..4, n * m),
        )
            .prop_map(move |(cols, rows, coefs)| {
                let mut p = LpProblem::new();
                for (k, rhs) in &rows {
                    let sense = [Sense::Ge, Sense::Le, Sense::Eq][*k as usize];
                    p.add_row("", sense, *rhs as f64);
                }
                for (j, (cost, ub)) in cols.iter().enumerate() {
                    let entries = (0..m).map(|r| (r, coefs[j * m + r] as f64)).collect();
                    p.add_column(LpColumn::new(*cost as f64, 0.0, *ub as f64, entries))
                        .unwrap();
                }
                p
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn agrees_with_vertex_enumeration(p in arb_lp()) {
        let s = p.solve(None).unwrap();
        match vertex_oracle(&p) {
            None => prop_assert_eq!(s.status, LpStatus::Infeasible),
            Some(obj) => {
                prop_assert_eq!(s.status, LpStatus::Optimal);
                prop_assert!((s.objective - obj).abs() <= 1e-7 * (1.0 + obj.abs()), "{} vs {}", s.objective, obj);
                check_duality(&p, &s);
            }
        }
    }

    #[test]
    fn warm_start_matches_cold_after_append(p in arb_lp(), cost in -3i32..4, coef in -3i32..4) {
        let first = p.solve(None).unwrap();
        prop_assume!(first.status == LpStatus::Optimal);
        let mut q = p.clone();
        let m = q.rows.len();
        q.add_column(LpColumn::new(cost as f64, 0.0, 2.0, (0..m).map(|r| (r, coef as f64)).collect())).unwrap();
        let warm = q.solve(Some(&first.basis)).unwrap();
        let cold = q.solve(None).unwrap();
        prop_assert!(warm.objective <= first.objective + 1e-9);
        prop_assert!((warm.objective - cold.objective).abs() <= 1e-7 * (1.0 + cold.objective.abs()));
    }
}
