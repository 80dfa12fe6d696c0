use super::{Layer, SpaceKind, StateSpace};
use crate::error::{Error, Result};
use crate::instance::Problem;
use crate::ode::{integrate_epoch, Dynamics, Rk4Workspace};
use crate::restrictions::Filtered;

/// Successor states and dynamics costs of every (state, decision) pair of one epoch.
pub(crate) struct Candidates {
    pub next: Vec<f64>,
    pub cost: Vec<f64>,
}

impl Candidates {
    pub fn len(&self) -> usize {
        self.cost.len()
    }
}

/// Expands `states` (row-major, stride `dim`) by every decision in `decisions`,
/// states outermost.
pub(crate) fn expand(
    problem: &Problem,
    i: usize,
    s: usize,
    states: &[f64],
    decisions: &[usize],
) -> Result<Candidates> {
    let seg = problem.segment(i);
    let model = &seg.dynamics;
    let dim = model.dim();
    let last = s + 1 == problem.epochs();
    let q = states.len() / dim * decisions.len();
    let mut next = Vec::with_capacity(q * dim);
    let mut cost = Vec::with_capacity(q);
    let mut ws = Rk4Workspace::new(dim);
    for n in states.chunks_exact(dim) {
        for &d in decisions {
            let step = integrate_epoch(
                model,
                problem.grid(),
                s,
                n,
                &seg.decisions[s][d],
                &mut ws,
                None,
            )?;
            let mut c = step.running_cost;
            if last {
                c += model.terminal_cost(&step.end);
            }
            next.extend_from_slice(&step.end);
            cost.push(c);
        }
    }
    Ok(Candidates { next, cost })
}

/// `Σ_s Π_{σ≤s} |F_σ|`: state-decision pairs visited by exact enumeration.
pub fn pair_count(filtered: &Filtered) -> u128 {
    let mut prod: u128 = 1;
    let mut total: u128 = 0;
    for set in filtered {
        prod = prod.saturating_mul(set.len() as u128);
        total = total.saturating_add(prod);
    }
    total
}

/// States stored by exact enumeration, the initial state included.
pub fn count_states(filtered: &Filtered) -> u128 {
    1 + pair_count(filtered)
}

pub(crate) fn check_nonempty(filtered: &Filtered, i: usize) -> Result<()> {
    match filtered.iter().position(Vec::is_empty) {
        Some(s) => Err(Error::Structure(format!(
            "segment {i} has no allowed decision at epoch {s}"
        ))),
        None => Ok(()),
    }
}

/// Exhaustive breadth-first expansion of all decision sequences.
pub fn forward_enumerate(
    problem: &Problem,
    i: usize,
    filtered: &Filtered,
    cap: u64,
) -> Result<StateSpace> {
    check_nonempty(filtered, i)?;
    let pairs = pair_count(filtered);
    if pairs > cap as u128 {
        return Err(Error::StateSpaceTooLarge {
            pairs,
            cap: cap as u128,
        });
    }
    let seg = problem.segment(i);
    let mut layers = Vec::with_capacity(filtered.len());
    let mut current = seg.initial_state.clone();
    for (s, decisions) in filtered.iter().enumerate() {
        let cand = expand(problem, i, s, &current, decisions)?;
        let q = cand.len();
        layers.push(Layer {
            decisions: decisions.clone(),
            successors: (0..q as u32).collect(),
            next: cand.next,
            next_cost: cand.cost,
            clusters: None,
            candidates: q,
        });
        current = layers.last().map(|l| l.next.clone()).unwrap_or_default();
    }
    Ok(StateSpace {
        kind: SpaceKind::Exact,
        dim: seg.dynamics.dim(),
        initial: seg.initial_state.clone(),
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::restrictions::Restrictions;

    #[test]
    fn single_epoch_single_decision_has_two_states() {
        let p = fixtures::random_generic(3, 1, 1, 1, false);
        let f = Restrictions::default().filtered(&p, 0);
        let space = forward_enumerate(&p, 0, &f, 1_000).unwrap();
        assert_eq!(space.total_states(), 2);
    }

    #[test]
    fn layer_sizes_multiply() {
        let p = fixtures::random_generic(5, 1, 3, 3, false);
        let f = Restrictions::default().filtered(&p, 0);
        let space = forward_enumerate(&p, 0, &f, 1_000).unwrap();
        assert_eq!(
            (0..=3).map(|s| space.states_at(s)).collect::<Vec<_>>(),
            vec![1, 3, 9, 27]
        );
        assert_eq!(count_states(&f), 40);
    }

    #[test]
    fn cap_is_enforced() {
        let p = fixtures::random_generic(5, 1, 3, 3, false);
        let f = Restrictions::default().filtered(&p, 0);
        let err = forward_enumerate(&p, 0, &f, 20).unwrap_err();
        assert!(matches!(
            err,
            Error::StateSpaceTooLarge { pairs: 39, cap: 20 }
        ));
    }
}
