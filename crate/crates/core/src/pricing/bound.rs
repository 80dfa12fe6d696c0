use serde::{Deserialize, Serialize};

use super::StateSpace;
use crate::error::Result;
use crate::instance::Problem;
use crate::ode::{integrate_epoch, Dynamics, EpochContext, EpochGrid, Rk4Workspace};

/// States sampled per epoch boundary when estimating Lipschitz constants.
const MAX_SAMPLES: usize = 64;

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// ∞-norm of a central finite-difference Jacobian `∂f/∂M` at `state`.
fn jacobian_norm<M: Dynamics>(
    model: &M,
    ctx: EpochContext,
    t: f64,
    state: &[f64],
    control: &[f64],
) -> f64 {
    let dim = model.dim();
    let mut rows = vec![0.0; dim];
    let mut probe = state.to_vec();
    let mut hi = vec![0.0; dim];
    let mut lo = vec![0.0; dim];
    for k in 0..dim {
        let h = 1e-6 * state[k].abs().max(1.0);
        probe[k] = state[k] + h;
        model.derivative(ctx, t, &probe, control, &mut hi);
        probe[k] = state[k] - h;
        model.derivative(ctx, t, &probe, control, &mut lo);
        probe[k] = state[k];
        for (r, row) in rows.iter_mut().enumerate() {
            *row += ((hi[r] - lo[r]) / (2.0 * h)).abs();
        }
    }
    rows.into_iter().fold(0.0, f64::max)
}

/// Empirical per-epoch Lipschitz constants of the dynamics in the state,
/// sampled along the given spaces (epoch boundary states and RK4 substeps).
pub fn lipschitz_estimates(
    problem: &Problem,
    i: usize,
    spaces: &[&StateSpace],
) -> Result<Vec<f64>> {
    let seg = problem.segment(i);
    let model = &seg.dynamics;
    let grid = problem.grid();
    let mut ws = Rk4Workspace::new(model.dim());
    let mut out = vec![0.0f64; problem.epochs()];
    for space in spaces {
        for (s, layer) in space.layers.iter().enumerate() {
            let ctx = EpochContext {
                index: s,
                length: grid.length(s),
            };
            let count = space.states_at(s);
            let stride = count.div_ceil(MAX_SAMPLES).max(1);
            let h = grid.length(s) / grid.substeps() as f64;
            for n in (0..count).step_by(stride) {
                let start = space.state(s, n);
                for &d in &layer.decisions {
                    let x = &seg.decisions[s][d];
                    let control: Vec<f64> = if model.rate_normalized() {
                        x.iter().map(|v| v / grid.length(s)).collect()
                    } else {
                        x.clone()
                    };
                    let mut samples = vec![start.to_vec()];
                    integrate_epoch(model, grid, s, start, x, &mut ws, Some(&mut samples))?;
                    for (k, m) in samples.iter().enumerate() {
                        let t = grid.start(s) + k as f64 * h;
                        out[s] = out[s].max(jacobian_norm(model, ctx, t, m, &control));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Propagated clustering error bound at every boundary:
/// `b[0] = 0`, `b[s+1] = exp(L_s Δ_s) b[s] + eps`.
pub fn error_bounds(lipschitz: &[f64], grid: &EpochGrid, eps: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    for (s, l) in lipschitz.iter().enumerate() {
        let prev = b[s];
        b.push((l * grid.length(s)).exp() * prev + eps);
    }
    b
}

/// Distances between exact states and their clustered stand-ins, per boundary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ApproximationErrors {
    /// Following the same decision sequence through the clustered map.
    pub tracked_mean: Vec<f64>,
    pub tracked_max: Vec<f64>,
    /// Distance to the nearest clustered state.
    pub nearest_mean: Vec<f64>,
    pub nearest_max: Vec<f64>,
}

/// Compares an exact space with a clustered one built from the same decision sets.
pub fn approximation_errors(exact: &StateSpace, clustered: &StateSpace) -> ApproximationErrors {
    let epochs = exact.epochs();
    let mut out = ApproximationErrors {
        tracked_mean: vec![0.0],
        tracked_max: vec![0.0],
        nearest_mean: vec![0.0],
        nearest_max: vec![0.0],
    };
    // clustered state reached by each exact state of the current boundary
    let mut tracked = vec![0usize];
    for s in 0..epochs {
        let le = &exact.layers[s];
        let lc = &clustered.layers[s];
        let per = le.decisions.len();
        let mut next_tracked = vec![0usize; le.next_states()];
        let (mut t_sum, mut t_max, mut n_sum, mut n_max) = (0.0, 0.0f64, 0.0, 0.0f64);
        for (n, &c) in tracked.iter().enumerate() {
            for d in 0..per {
                let q = le.successors[n * per + d] as usize;
                let cq = lc.successors[c * per + d] as usize;
                next_tracked[q] = cq;
                let m = exact.state(s + 1, q);
                let e = linf(m, clustered.state(s + 1, cq));
                t_sum += e;
                t_max = t_max.max(e);
                let near = (0..clustered.states_at(s + 1))
                    .map(|k| linf(m, clustered.state(s + 1, k)))
                    .fold(f64::INFINITY, f64::min);
                n_sum += near;
                n_max = n_max.max(near);
            }
        }
        let count = le.next_states().max(1) as f64;
        out.tracked_mean.push(t_sum / count);
        out.tracked_max.push(t_max);
        out.nearest_mean.push(n_sum / count);
        out.nearest_max.push(n_max);
        tracked = next_tracked;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::pricing::{cluster_states, forward_enumerate};
    use crate::restrictions::Restrictions;

    #[test]
    fn bound_recursion() {
        let grid = EpochGrid::uniform(3, 0.5, 4).unwrap();
        let b = error_bounds(&[0.0, 2.0, 0.0], &grid, 0.1);
        assert_eq!(b.len(), 4);
        assert!((b[1] - 0.1).abs() < 1e-15);
        assert!((b[2] - (1f64.exp() * 0.1 + 0.1)).abs() < 1e-12);
        assert!((b[3] - (b[2] + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn linear_dynamics_lipschitz_is_matrix_norm() {
        let p = fixtures::random_generic(6, 1, 2, 2, false);
        let f = Restrictions::default().filtered(&p, 0);
        let space = forward_enumerate(&p, 0, &f, 1_000).unwrap();
        let l = lipschitz_estimates(&p, 0, &[&space]).unwrap();
        let crate::models::Model::Affine(m) = &p.segment(0).dynamics else {
            panic!("generic fixtures are affine")
        };
        let norm =
            m.a.iter()
                .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max);
        for v in l {
            assert!((v - norm).abs() < 1e-6 * norm.max(1.0));
        }
    }

    #[test]
    fn zero_tolerance_errors_vanish_and_positive_tolerance_respects_bound() {
        let p = fixtures::random_generic(9, 1, 4, 3, false);
        let f = Restrictions::default().filtered(&p, 0);
        let exact = forward_enumerate(&p, 0, &f, 10_000).unwrap();
        let same = cluster_states(&p, 0, &f, 0.0).unwrap();
        let e0 = approximation_errors(&exact, &same);
        assert!(e0.tracked_max.iter().all(|v| *v == 0.0));

        let eps = 0.05;
        let clustered = cluster_states(&p, 0, &f, eps).unwrap();
        let l = lipschitz_estimates(&p, 0, &[&exact, &clustered]).unwrap();
        let bound = error_bounds(&l, p.grid(), eps);
        let e = approximation_errors(&exact, &clustered);
        for s in 0..=4 {
            assert!(e.nearest_max[s] <= e.tracked_max[s] + 1e-15);
            assert!(
                e.tracked_max[s] <= bound[s] + 1e-9,
                "boundary {s}: {} > {}",
                e.tracked_max[s],
                bound[s]
            );
        }
    }
}
