//! Exhaustive reference solver for small instances.

use crate::error::{Error, Result};
use crate::instance::Problem;
use crate::lp::{solve_integer_restricted, LpColumn, LpProblem, DEFAULT_NODE_CAP};

/// Joint assignments examined at most by [`brute_force`].
pub const BRUTE_FORCE_CAP: u128 = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub choices: Vec<Vec<usize>>,
    pub aux: Vec<f64>,
    pub objective: f64,
}

/// Every decision sequence of segment `i`, lexicographic with the last epoch fastest.
pub fn sequences(problem: &Problem, i: usize) -> Vec<Vec<usize>> {
    let sizes: Vec<usize> = problem.segment(i).decisions.iter().map(Vec::len).collect();
    let mut out = vec![Vec::new()];
    for &n in &sizes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |d| {
                    let mut v = prefix.clone();
                    v.push(d);
                    v
                })
            })
            .collect();
    }
    out
}

pub fn joint_count(problem: &Problem) -> u128 {
    (0..problem.segments())
        .map(|i| {
            problem
                .segment(i)
                .decisions
                .iter()
                .map(|f| f.len() as u128)
                .product::<u128>()
        })
        .product()
}

/// Cheapest auxiliary completion for fixed row activity; `None` if infeasible.
pub fn best_aux(problem: &Problem, activity: &[f64]) -> Result<Option<(Vec<f64>, f64)>> {
    let mut lp = LpProblem::new();
    for (r, row) in problem.rows().iter().enumerate() {
        lp.add_row(row.name.clone(), row.sense, row.rhs - activity[r]);
    }
    for (a, var) in problem.aux().iter().enumerate() {
        let entries = problem
            .rows()
            .iter()
            .enumerate()
            .flat_map(|(r, row)| {
                row.aux_terms
                    .iter()
                    .filter(move |t| t.var == a)
                    .map(move |t| (r, t.coef))
            })
            .collect();
        lp.add_column(LpColumn::new(
            var.cost,
            var.lower,
            var.upper_bound(),
            entries,
        ))?;
    }
    let integer: Vec<bool> = problem.aux().iter().map(|v| v.integer).collect();
    let mip = solve_integer_restricted(&lp, &integer, DEFAULT_NODE_CAP)?;
    Ok(mip.x.map(|x| (x, mip.objective)))
}

/// Minimum-objective assignment over all joint decision sequences.
pub fn brute_force(problem: &Problem) -> Result<Option<OracleSolution>> {
    let count = joint_count(problem);
    if count > BRUTE_FORCE_CAP {
        return Err(Error::StateSpaceTooLarge {
            pairs: count,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let rows = problem.rows().len();
    // per segment: sequences, plan costs and row activity
    let mut tables = Vec::with_capacity(problem.segments());
    for i in 0..problem.segments() {
        let seqs = sequences(problem, i);
        let mut entries = Vec::with_capacity(seqs.len());
        for seq in seqs {
            let cost = problem.plan_cost(i, &seq)?;
            let mut act = vec![0.0; rows];
            for (r, v) in problem.plan_coefficients(i, &seq) {
                act[r] += v;
            }
            entries.push((seq, cost, act));
        }
        tables.push(entries);
    }
    let mut best: Option<OracleSolution> = None;
    let mut idx = vec![0usize; tables.len()];
    loop {
        let mut activity = vec![0.0; rows];
        let mut cost = 0.0;
        for (t, &k) in tables.iter().zip(&idx) {
            cost += t[k].1;
            for (a, v) in activity.iter_mut().zip(&t[k].2) {
                *a += v;
            }
        }
        let completion = if problem.aux().is_empty() {
            problem
                .rows()
                .iter()
                .zip(&activity)
                .all(|(row, lhs)| row.satisfied(*lhs))
                .then(|| (Vec::new(), 0.0))
        } else {
            best_aux(problem, &activity)?
        };
        if let Some((aux, aux_cost)) = completion {
            let total = cost + aux_cost;
            if best.as_ref().map_or(true, |b| total < b.objective - 1e-12) {
                best = Some(OracleSolution {
                    choices: tables
                        .iter()
                        .zip(&idx)
                        .map(|(t, &k)| t[k].0.clone())
                        .collect(),
                    aux,
                    objective: total,
                });
            }
        }
        // odometer over segments, last segment fastest
        let mut pos = tables.len();
        loop {
            if pos == 0 {
                return Ok(best);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < tables[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}
