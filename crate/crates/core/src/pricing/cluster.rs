use super::enumerate::{check_nonempty, expand, Candidates};
use super::{Layer, SpaceKind, StateSpace};
use crate::error::Result;
use crate::instance::Problem;
use crate::ode::Dynamics;
use crate::restrictions::Filtered;

/// Running summary of one cluster of successor states.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub count: usize,
    pub sum: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// `(predecessor state, decision position)` pairs leading here.
    pub members: Vec<(u32, u32)>,
    pub cost_sum: f64,
}

impl Cluster {
    fn open(point: &[f64], member: (u32, u32), cost: f64) -> Self {
        Cluster {
            count: 1,
            sum: point.to_vec(),
            min: point.to_vec(),
            max: point.to_vec(),
            members: vec![member],
            cost_sum: cost,
        }
    }

    fn absorb(&mut self, point: &[f64], member: (u32, u32), cost: f64) {
        self.count += 1;
        for (k, &v) in point.iter().enumerate() {
            self.sum[k] += v;
            self.min[k] = self.min[k].min(v);
            self.max[k] = self.max[k].max(v);
        }
        self.members.push(member);
        self.cost_sum += cost;
    }

    pub fn centroid(&self) -> Vec<f64> {
        self.sum.iter().map(|v| v / self.count as f64).collect()
    }

    pub fn mean_cost(&self) -> f64 {
        self.cost_sum / self.count as f64
    }

    pub fn diameter(&self) -> f64 {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }

    /// `max(‖p − min‖∞, ‖p − max‖∞)`, abandoning early once above `bound`.
    fn spread(&self, point: &[f64], bound: f64) -> f64 {
        let mut worst = 0.0f64;
        for (k, &v) in point.iter().enumerate() {
            worst = worst
                .max((v - self.min[k]).abs())
                .max((v - self.max[k]).abs());
            if worst > bound {
                return worst;
            }
        }
        worst
    }
}

/// Streams points into ε-diameter clusters; returns the label of every point.
pub(crate) fn stream(
    cand: &Candidates,
    dim: usize,
    per_state: usize,
    eps: f64,
) -> (Vec<u32>, Vec<Cluster>) {
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut labels = Vec::with_capacity(cand.len());
    for (q, point) in cand.next.chunks_exact(dim).enumerate() {
        let member = ((q / per_state) as u32, (q % per_state) as u32);
        let mut best = f64::INFINITY;
        let mut best_at = usize::MAX;
        for (l, c) in clusters.iter().enumerate() {
            let d = c.spread(point, best.min(eps));
            if d < best {
                best = d;
                best_at = l;
            }
        }
        if best_at != usize::MAX && best <= eps {
            clusters[best_at].absorb(point, member, cand.cost[q]);
            labels.push(best_at as u32);
        } else {
            labels.push(clusters.len() as u32);
            clusters.push(Cluster::open(point, member, cand.cost[q]));
        }
    }
    (labels, clusters)
}

/// Cluster labels of a stream of points under tolerance `eps`.
pub fn assign_stream(points: &[Vec<f64>], eps: f64) -> Vec<usize> {
    let dim = points.first().map_or(0, Vec::len);
    let cand = Candidates {
        next: points.concat(),
        cost: vec![0.0; points.len()],
    };
    stream(&cand, dim.max(1), 1, eps)
        .0
        .into_iter()
        .map(|l| l as usize)
        .collect()
}

pub(crate) fn layer_from_clusters(
    decisions: &[usize],
    labels: Vec<u32>,
    clusters: Vec<Cluster>,
    candidates: usize,
) -> Layer {
    let next = clusters.iter().flat_map(Cluster::centroid).collect();
    let next_cost = clusters.iter().map(Cluster::mean_cost).collect();
    Layer {
        decisions: decisions.to_vec(),
        successors: labels,
        next,
        next_cost,
        clusters: Some(clusters),
        candidates,
    }
}

/// Forward pass with ℓ∞ streaming aggregation of successors at every epoch.
pub fn cluster_states(
    problem: &Problem,
    i: usize,
    filtered: &Filtered,
    eps: f64,
) -> Result<StateSpace> {
    check_nonempty(filtered, i)?;
    let seg = problem.segment(i);
    let dim = seg.dynamics.dim();
    let mut layers: Vec<Layer> = Vec::with_capacity(filtered.len());
    let mut current = seg.initial_state.clone();
    for (s, decisions) in filtered.iter().enumerate() {
        let cand = expand(problem, i, s, &current, decisions)?;
        let (labels, clusters) = stream(&cand, dim, decisions.len(), eps);
        let layer = layer_from_clusters(decisions, labels, clusters, cand.len());
        current = layer.next.clone();
        layers.push(layer);
    }
    Ok(StateSpace {
        kind: SpaceKind::Linf { eps },
        dim,
        initial: seg.initial_state.clone(),
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::pricing::{backward_induct, forward_enumerate, Duals};
    use crate::restrictions::Restrictions;
    use proptest::prelude::*;

    #[test]
    fn hand_traced_stream() {
        let pts: Vec<Vec<f64>> = [0.0, 0.3, 1.0, 0.5, 2.0].iter().map(|v| vec![*v]).collect();
        assert_eq!(assign_stream(&pts, 0.6), vec![0, 0, 1, 0, 2]);
    }

    #[test]
    fn identical_points_share_a_cluster() {
        let pts = vec![vec![0.2, 0.4]; 5];
        assert_eq!(assign_stream(&pts, 0.0), vec![0; 5]);
    }

    #[test]
    fn zero_tolerance_on_distinct_successors_matches_exact_dp() {
        let p = fixtures::random_generic(11, 1, 3, 3, false);
        let f = Restrictions::default().filtered(&p, 0);
        let exact = forward_enumerate(&p, 0, &f, 1_000).unwrap();
        let clustered = cluster_states(&p, 0, &f, 0.0).unwrap();
        assert_eq!(exact.total_states(), clustered.total_states());
        let duals = Duals::zero(&p);
        let a = backward_induct(&exact, &duals.stage_weights(&p, 0, &exact));
        let b = backward_induct(&clustered, &duals.stage_weights(&p, 0, &clustered));
        assert_eq!(a.choices, b.choices);
        assert!((a.reduced_cost - b.reduced_cost).abs() < 1e-12);
    }

    #[test]
    fn clustering_is_deterministic() {
        let p = fixtures::random_generic(4, 1, 3, 4, false);
        let f = Restrictions::default().filtered(&p, 0);
        let a = cluster_states(&p, 0, &f, 0.05).unwrap();
        let b = cluster_states(&p, 0, &f, 0.05).unwrap();
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            assert_eq!(
                la.next.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                lb.next.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }

    proptest! {
        #[test]
        fn diameter_never_exceeds_tolerance(
            pts in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 1..200),
            eps in 0.0f64..0.5,
        ) {
            let labels = assign_stream(&pts, eps);
            let k = labels.iter().max().unwrap() + 1;
            for c in 0..k {
                for dim in 0..3 {
                    let vals: Vec<f64> = pts.iter().zip(&labels).filter(|(_, l)| **l == c).map(|(p, _)| p[dim]).collect();
                    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(hi - lo <= eps);
                }
            }
        }
    }
}
