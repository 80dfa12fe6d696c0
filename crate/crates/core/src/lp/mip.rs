use super::{Basis, LpProblem, LpStatus, INTEGRALITY_TOL};
use crate::error::Result;

pub const DEFAULT_NODE_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MipResult {
    /// Best integral solution found, if any.
    pub x: Option<Vec<f64>>,
    pub objective: f64,
    pub nodes: usize,
    /// The node cap was reached before the search finished.
    pub truncated: bool,
}

fn most_fractional(x: &[f64], integer: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&v, &int)) in x.iter().zip(integer).enumerate() {
        if !int {
            continue;
        }
        let frac = (v - v.floor()).min(v.ceil() - v);
        if frac > INTEGRALITY_TOL && best.map_or(true, |(_, f)| frac > f + 1e-12) {
            best = Some((j, frac));
        }
    }
    best.map(|(j, _)| j)
}

/// Depth-first branch-and-bound over the marked columns of `p`.
pub fn solve_integer_restricted(p: &LpProblem, integer: &[bool], cap: usize) -> Result<MipResult> {
    let mut out = MipResult {
        x: None,
        objective: f64::INFINITY,
        nodes: 0,
        truncated: false,
    };
    // each entry: bound changes (column, lower, upper) and the parent basis
    let mut stack: Vec<(Vec<(usize, f64, f64)>, Option<Basis>)> = vec![(Vec::new(), None)];
    while let Some((changes, basis)) = stack.pop() {
        if out.nodes >= cap {
            out.truncated = true;
            break;
        }
        out.nodes += 1;
        let mut lp = p.clone();
        for &(j, lo, hi) in &changes {
            lp.set_bounds(j, lo, hi);
        }
        let sol = lp.solve(basis.as_ref())?;
        if sol.status != LpStatus::Optimal {
            continue;
        }
        if sol.objective >= out.objective - 1e-9 * (1.0 + out.objective.abs()) {
            continue;
        }
        match most_fractional(&sol.x, integer) {
            None => {
                let mut x = sol.x;
                for (v, &int) in x.iter_mut().zip(integer) {
                    if int {
                        *v = v.round();
                    }
                }
                out.objective = sol.objective;
                out.x = Some(x);
            }
            Some(j) => {
                let v = sol.x[j];
                let col = &lp.columns[j];
                let mut down = changes.clone();
                down.push((j, col.lower, v.floor()));
                let mut up = changes;
                up.push((j, v.ceil(), col.upper));
                stack.push((down, Some(sol.basis.clone())));
                stack.push((up, Some(sol.basis)));
            }
        }
    }
    Ok(out)
}
