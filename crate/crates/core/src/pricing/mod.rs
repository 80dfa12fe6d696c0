//! Pricing oracle: forward construction of a (possibly clustered) state space
//! for one segment, then backward induction under master duals.
//!
//! A [`StateSpace`] has one [`Layer`] per epoch. Layer `s` maps every pair
//! (state of epoch `s`, allowed decision) to a successor state of epoch `s+1`,
//! and stores for each successor the dynamics cost accrued over the epoch
//! (running cost, plus the terminal cost on the last epoch). Exact enumeration
//! keeps one successor per pair; clustering shares successors between pairs
//! and stores their mean cost.

mod backward;
mod bound;
mod cluster;
mod enumerate;
mod kmeans;

use serde::{Deserialize, Serialize};

pub use backward::{backward_induct, PricingResult, StageWeights};
pub use bound::{approximation_errors, error_bounds, lipschitz_estimates, ApproximationErrors};
pub use cluster::{assign_stream, cluster_states, Cluster};
pub use enumerate::{count_states, forward_enumerate, pair_count};
pub use kmeans::{kmeans_cluster, kmeans_partition};

use crate::error::Result;
use crate::instance::{Clustering, Problem};
use crate::restrictions::Filtered;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SpaceKind {
    Exact,
    Linf { eps: f64 },
    Kmeans,
}

#[derive(Debug, Clone)]
pub struct Layer {
    /// Allowed decisions of this epoch, as indices into `F_is`, in declared order.
    pub decisions: Vec<usize>,
    /// `successors[n * decisions.len() + d]` is the next-epoch state index.
    pub successors: Vec<u32>,
    /// Next-epoch states, row-major with stride `dim`.
    pub next: Vec<f64>,
    /// Dynamics cost attached to each next-epoch state.
    pub next_cost: Vec<f64>,
    /// Cluster records of the next-epoch states (clustered spaces only).
    pub clusters: Option<Vec<Cluster>>,
    /// Number of candidate successors generated before aggregation.
    pub candidates: usize,
}

impl Layer {
    pub fn next_states(&self) -> usize {
        self.next_cost.len()
    }

    /// Largest ℓ∞ cluster extent `‖max − min‖∞` in this layer (0 when exact).
    pub fn max_diameter(&self) -> f64 {
        self.clusters
            .as_ref()
            .map(|cs| cs.iter().map(Cluster::diameter).fold(0.0, f64::max))
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct StateSpace {
    pub kind: SpaceKind,
    pub dim: usize,
    pub initial: Vec<f64>,
    pub layers: Vec<Layer>,
}

impl StateSpace {
    pub fn epochs(&self) -> usize {
        self.layers.len()
    }

    /// Number of states at epoch boundary `s` (`0..=S`).
    pub fn states_at(&self, s: usize) -> usize {
        if s == 0 {
            1
        } else {
            self.layers[s - 1].next_states()
        }
    }

    pub fn total_states(&self) -> usize {
        (0..=self.epochs()).map(|s| self.states_at(s)).sum()
    }

    pub fn state(&self, s: usize, n: usize) -> &[f64] {
        if s == 0 {
            &self.initial
        } else {
            &self.layers[s - 1].next[n * self.dim..(n + 1) * self.dim]
        }
    }

    pub fn max_diameter(&self) -> f64 {
        self.layers
            .iter()
            .map(Layer::max_diameter)
            .fold(0.0, f64::max)
    }
}

/// Master duals: one price per coupling row and one per convexity row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Duals {
    pub rows: Vec<f64>,
    pub convexity: Vec<f64>,
}

impl Duals {
    pub fn zero(problem: &Problem) -> Self {
        Duals {
            rows: vec![0.0; problem.rows().len()],
            convexity: vec![0.0; problem.segments()],
        }
    }

    /// Stage weights `Γ(x) − π_s·x` and terminal value `−μ_i − offset_i` of segment `i`.
    pub fn stage_weights(&self, problem: &Problem, i: usize, space: &StateSpace) -> StageWeights {
        let seg = problem.segment(i);
        let epochs = problem.epochs();
        let k = seg.dynamics.control_dim();
        let mut pi = vec![vec![0.0; k]; epochs];
        for t in problem.terms(i) {
            pi[t.epoch][t.component] += self.rows[t.row] * t.coef;
        }
        let stage = space
            .layers
            .iter()
            .enumerate()
            .map(|(s, layer)| {
                layer
                    .decisions
                    .iter()
                    .map(|&d| {
                        let x = &seg.decisions[s][d];
                        let dual: f64 = pi[s].iter().zip(x).map(|(p, v)| p * v).sum();
                        seg.decision_cost(x) - dual
                    })
                    .collect()
            })
            .collect();
        StageWeights {
            stage,
            terminal: -self.convexity[i] - problem.offset(i),
        }
    }
}

/// Builds the pricing space of segment `i` under `filtered` according to the
/// instance configuration: exact when `eps == 0`, otherwise clustered.
pub fn build_space(problem: &Problem, i: usize, filtered: &Filtered) -> Result<StateSpace> {
    let cfg = &problem.instance.config;
    match &cfg.clustering {
        Clustering::Kmeans { clusters } => kmeans_cluster(problem, i, filtered, clusters, cfg.seed),
        Clustering::Linf if cfg.eps > 0.0 => cluster_states(problem, i, filtered, cfg.eps),
        Clustering::Linf => forward_enumerate(problem, i, filtered, cfg.state_cap),
    }
}

/// Per-epoch clustering diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStat {
    pub segment: usize,
    pub epoch: usize,
    pub candidates: usize,
    pub clusters: usize,
    pub max_diameter: f64,
}

pub fn cluster_stats(space: &StateSpace, segment: usize) -> Vec<ClusterStat> {
    space
        .layers
        .iter()
        .enumerate()
        .map(|(s, l)| ClusterStat {
            segment,
            epoch: s + 1,
            candidates: l.candidates,
            clusters: l.next_states(),
            max_diameter: l.max_diameter(),
        })
        .collect()
}
