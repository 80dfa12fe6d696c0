use super::StateSpace;

/// Per-decision stage weights and the terminal value of a pricing problem.
#[derive(Debug, Clone, PartialEq)]
pub struct StageWeights {
    /// `stage[s][d]` for the `d`-th allowed decision of epoch `s`.
    pub stage: Vec<Vec<f64>>,
    pub terminal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingResult {
    /// Decision indices into `F_is`, one per epoch.
    pub choices: Vec<usize>,
    /// Minimum reduced cost as estimated on the state space.
    pub reduced_cost: f64,
    /// Dynamics cost accumulated along the chosen path (estimate on clustered spaces).
    pub dynamics_cost: f64,
    /// Value function at every boundary along the chosen path.
    pub path_values: Vec<f64>,
}

/// Minimizes `Σ_s (stage weight + successor cost) + terminal` over the space.
/// Ties resolve to the first allowed decision.
pub fn backward_induct(space: &StateSpace, weights: &StageWeights) -> PricingResult {
    let epochs = space.epochs();
    // values[s][n]: cost-to-go from state n at boundary s
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); epochs + 1];
    let mut policy: Vec<Vec<u32>> = vec![Vec::new(); epochs];
    values[epochs] = vec![weights.terminal; space.states_at(epochs)];
    for s in (0..epochs).rev() {
        let layer = &space.layers[s];
        let per = layer.decisions.len();
        let w = &weights.stage[s];
        let next_vals = &values[s + 1];
        let count = space.states_at(s);
        let mut vals = Vec::with_capacity(count);
        let mut pol = Vec::with_capacity(count);
        for n in 0..count {
            let mut best = f64::INFINITY;
            let mut arg = 0u32;
            for d in 0..per {
                let q = layer.successors[n * per + d] as usize;
                let v = w[d] + layer.next_cost[q] + next_vals[q];
                if v < best {
                    best = v;
                    arg = d as u32;
                }
            }
            vals.push(best);
            pol.push(arg);
        }
        values[s] = vals;
        policy[s] = pol;
    }

    let mut choices = Vec::with_capacity(epochs);
    let mut path_values = vec![values[0][0]];
    let mut dynamics_cost = 0.0;
    let mut n = 0usize;
    for s in 0..epochs {
        let layer = &space.layers[s];
        let d = policy[s][n] as usize;
        choices.push(layer.decisions[d]);
        n = layer.successors[n * layer.decisions.len() + d] as usize;
        dynamics_cost += layer.next_cost[n];
        path_values.push(values[s + 1][n]);
    }
    PricingResult {
        choices,
        reduced_cost: values[0][0],
        dynamics_cost,
        path_values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::instance::Problem;
    use crate::pricing::{forward_enumerate, Duals};
    use crate::restrictions::Restrictions;

    /// Reduced cost of a full plan computed from scratch.
    fn reduced(p: &Problem, i: usize, choices: &[usize], duals: &Duals) -> f64 {
        let mut rc = p.plan_cost(i, choices).unwrap() - duals.convexity[i];
        for (r, v) in p.plan_coefficients(i, choices) {
            rc -= duals.rows[r] * v;
        }
        rc
    }

    fn sequences(d: usize, s: usize) -> Vec<Vec<usize>> {
        (0..d.pow(s as u32))
            .map(|mut k| {
                (0..s)
                    .map(|_| {
                        let c = k % d;
                        k /= d;
                        c
                    })
                    .rev()
                    .collect()
            })
            .collect()
    }

    fn brute_force(p: &Problem, i: usize, duals: &Duals) -> (Vec<usize>, f64) {
        let mut best = (Vec::new(), f64::INFINITY);
        for seq in sequences(p.segment(i).decisions[0].len(), p.epochs()) {
            let rc = reduced(p, i, &seq, duals);
            if rc < best.1 - 1e-12 {
                best = (seq, rc);
            }
        }
        best
    }

    #[test]
    fn exact_backward_matches_enumeration_of_all_sequences() {
        for seed in 0..8 {
            let p = fixtures::random_generic(seed, 2, 3, 3, true);
            let duals = Duals {
                rows: (0..p.rows().len())
                    .map(|r| 0.3 * (r as f64 + 1.0) * if seed % 2 == 0 { 1.0 } else { -1.0 })
                    .collect(),
                convexity: vec![0.7, -0.4],
            };
            for i in 0..2 {
                let f = Restrictions::default().filtered(&p, i);
                let space = forward_enumerate(&p, i, &f, 1_000).unwrap();
                let res = backward_induct(&space, &duals.stage_weights(&p, i, &space));
                let (_, rc) = brute_force(&p, i, &duals);
                assert!(
                    (res.reduced_cost - rc).abs() < 1e-9,
                    "seed {seed}: {} vs {rc}",
                    res.reduced_cost
                );
                assert!((reduced(&p, i, &res.choices, &duals) - rc).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn convexity_dual_shifts_value_without_changing_plan() {
        let p = fixtures::random_generic(21, 1, 3, 3, false);
        let f = Restrictions::default().filtered(&p, 0);
        let space = forward_enumerate(&p, 0, &f, 1_000).unwrap();
        let mut duals = Duals::zero(&p);
        let a = backward_induct(&space, &duals.stage_weights(&p, 0, &space));
        duals.convexity[0] = 2.5;
        let b = backward_induct(&space, &duals.stage_weights(&p, 0, &space));
        assert_eq!(a.choices, b.choices);
        assert!((a.reduced_cost - 2.5 - b.reduced_cost).abs() < 1e-12);
    }

    #[test]
    fn large_subsidy_forces_the_subsidized_decision() {
        let p = fixtures::random_generic(8, 1, 3, 3, true);
        let f = Restrictions::default().filtered(&p, 0);
        let space = forward_enumerate(&p, 0, &f, 1_000).unwrap();
        let mut weights = Duals::zero(&p).stage_weights(&p, 0, &space);
        weights.stage[1][2] -= 1e6;
        let res = backward_induct(&space, &weights);
        assert_eq!(res.choices[1], 2);
    }

    #[test]
    fn ties_resolve_to_first_decision() {
        let p = fixtures::random_generic(2, 1, 2, 3, false);
        let f = Restrictions::default().filtered(&p, 0);
        let mut space = forward_enumerate(&p, 0, &f, 1_000).unwrap();
        for l in &mut space.layers {
            l.next_cost.iter_mut().for_each(|c| *c = 0.0);
        }
        let weights = StageWeights {
            stage: vec![vec![0.0; 3]; 2],
            terminal: 0.0,
        };
        assert_eq!(backward_induct(&space, &weights).choices, vec![0, 0]);
    }
}
