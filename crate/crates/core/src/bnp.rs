//! Branch-and-price tree: node queue, branching rules and incumbent tracking.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::colgen::{ColgenOptions, ColgenResult, ColumnPool, IterationLog, Master};
use crate::error::Result;
use crate::instance::{Branching, NodeSelection, Problem};
use crate::lp::INTEGRALITY_TOL;
use crate::restrictions::{
    AuxRestriction, DecisionRestriction, Relation, Restrictions, RESTRICTION_TOL,
};

/// Absolute slack added to the relative pruning gap.
const PRUNE_ABS_TOL: f64 = 1e-9;
/// Node cap of the integer heuristic below the root.
const HEURISTIC_NODE_CAP: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Open,
    Branched,
    PrunedBound,
    PrunedInfeasible,
    Integral,
    /// Fractional leaf that bi-partite branching cannot split.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub action: String,
    pub bound: f64,
    pub ub: f64,
    pub status: NodeStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Prune,
    Infeasible,
    BranchAux {
        var: usize,
        value: f64,
    },
    BranchBi {
        segment: usize,
        epoch: usize,
        component: usize,
        value: f64,
        floor: f64,
        ceil: f64,
    },
    BranchTri {
        segment: usize,
        epoch: usize,
        component: usize,
        value: f64,
    },
    Integral {
        choices: Vec<Vec<usize>>,
        aux: Vec<f64>,
    },
    Unresolved,
}

impl Action {
    fn describe(&self) -> String {
        match self {
            Action::Prune => "prune_bound".into(),
            Action::Infeasible => "prune_infeasible".into(),
            Action::BranchAux { var, value } => format!("branch_y y[{var}]={value}"),
            Action::BranchBi {
                segment,
                epoch,
                component,
                value,
                floor,
                ceil,
            } => {
                format!("branch_bi x[{segment}][{epoch}][{component}]={value} floor={floor} ceil={ceil}")
            }
            Action::BranchTri {
                segment,
                epoch,
                component,
                value,
            } => {
                format!("branch_tri x[{segment}][{epoch}][{component}]={value}")
            }
            Action::Integral { .. } => "integral".into(),
            Action::Unresolved => "unresolved".into(),
        }
    }
}

/// Largest component value of `values` not above `a`.
pub fn discrete_floor(values: &[f64], a: f64) -> Option<f64> {
    values
        .iter()
        .copied()
        .filter(|v| *v <= a + RESTRICTION_TOL)
        .reduce(f64::max)
}

/// Smallest component value of `values` not below `a`.
pub fn discrete_ceil(values: &[f64], a: f64) -> Option<f64> {
    values
        .iter()
        .copied()
        .filter(|v| *v >= a - RESTRICTION_TOL)
        .reduce(f64::min)
}

/// `(floor, ceil, min(a − floor, ceil − a))` when `a` lies strictly between two values.
pub fn bipartite_score(values: &[f64], a: f64) -> Option<(f64, f64, f64)> {
    let lo = values
        .iter()
        .copied()
        .filter(|v| *v < a - RESTRICTION_TOL)
        .reduce(f64::max)?;
    let hi = values
        .iter()
        .copied()
        .filter(|v| *v > a + RESTRICTION_TOL)
        .reduce(f64::min)?;
    if values.iter().any(|v| (v - a).abs() <= RESTRICTION_TOL) {
        return None;
    }
    Some((lo, hi, (a - lo).min(hi - a)))
}

/// Whether a node with relaxation `bound` cannot improve on `ub` by more than the gap.
pub fn prune_by_bound(bound: f64, ub: f64, gap: f64) -> bool {
    ub.is_finite() && bound >= ub - gap * ub.abs().max(1e-9) - PRUNE_ABS_TOL * (1.0 + ub.abs())
}

pub fn relative_gap(ub: f64, lb: f64) -> f64 {
    if !ub.is_finite() {
        return f64::INFINITY;
    }
    ((ub - lb) / ub.abs().max(1e-9)).max(0.0)
}

fn fractionality(v: f64) -> f64 {
    (v - v.floor()).min(v.ceil() - v)
}

/// Routes a solved node to pruning, a branching rule or an incumbent update.
pub fn classify_node(
    problem: &Problem,
    pool: &ColumnPool,
    result: &ColgenResult,
    restrictions: &Restrictions,
    ub: f64,
) -> Action {
    let cfg = &problem.instance.config;
    if !result.feasible {
        return Action::Infeasible;
    }
    if prune_by_bound(result.objective, ub, cfg.gap) {
        return Action::Prune;
    }

    // fractional integer auxiliary variables
    let mut best: Option<(usize, f64)> = None;
    for (a, var) in problem.aux().iter().enumerate() {
        let f = fractionality(result.aux[a]);
        if var.integer && f > INTEGRALITY_TOL && best.map_or(true, |(_, g)| f > g + 1e-12) {
            best = Some((a, f));
        }
    }
    if let Some((var, _)) = best {
        return Action::BranchAux {
            var,
            value: result.aux[var],
        };
    }

    let xhat = result.implied_decisions(problem, pool);
    let mut outside = false;
    let mut bi: Option<(usize, usize, usize, f64, f64, f64, f64)> = None;
    for i in 0..problem.segments() {
        let filtered = restrictions.filtered(problem, i);
        for s in 0..problem.epochs() {
            let x = &xhat[i][s];
            let member = filtered[s].iter().any(|&d| {
                problem
                    .decision(i, s, d)
                    .iter()
                    .zip(x)
                    .all(|(a, b)| (a - b).abs() <= 1e-7)
            });
            if member {
                continue;
            }
            outside = true;
            for (k, &xv) in x.iter().enumerate() {
                let values: Vec<f64> = filtered[s]
                    .iter()
                    .map(|&d| problem.decision(i, s, d)[k])
                    .collect();
                if let Some((lo, hi, score)) = bipartite_score(&values, xv) {
                    if bi.map_or(true, |b| score > b.6 + 1e-12) {
                        bi = Some((i, s, k, xv, lo, hi, score));
                    }
                }
            }
        }
    }
    if let Some((segment, epoch, component, value, floor, ceil, _)) = bi {
        return Action::BranchBi {
            segment,
            epoch,
            component,
            value,
            floor,
            ceil,
        };
    }

    // fractional plan weights
    let mut tri: Option<(usize, usize, usize, f64, f64)> = None;
    let fractional_segments: Vec<bool> = (0..problem.segments())
        .map(|i| {
            result
                .z
                .iter()
                .filter(|(p, _)| pool.plans[*p].segment == i)
                .any(|(_, v)| *v > INTEGRALITY_TOL && *v < 1.0 - INTEGRALITY_TOL)
        })
        .collect();
    if outside || fractional_segments.iter().any(|f| *f) {
        if cfg.branching == Branching::Bi {
            return Action::Unresolved;
        }
        for i in (0..problem.segments()).filter(|&i| fractional_segments[i] || outside) {
            for s in 0..problem.epochs() {
                for k in 0..xhat[i][s].len() {
                    let xv = xhat[i][s][k];
                    let mut score = 0.0;
                    for &(p, z) in result.z.iter().filter(|(p, _)| pool.plans[*p].segment == i) {
                        let plan = &pool.plans[p];
                        score += z * (problem.decision(i, s, plan.choices[s])[k] - xv).abs();
                    }
                    if score > 1e-9 && tri.map_or(true, |t| score > t.4 + 1e-12) {
                        tri = Some((i, s, k, xv, score));
                    }
                }
            }
        }
        if let Some((segment, epoch, component, value, _)) = tri {
            return Action::BranchTri {
                segment,
                epoch,
                component,
                value,
            };
        }
        return Action::Unresolved;
    }

    let mut choices = vec![Vec::new(); problem.segments()];
    for &(p, v) in &result.z {
        if v > 0.5 {
            let plan = &pool.plans[p];
            choices[plan.segment] = plan.choices.clone();
        }
    }
    let aux = problem
        .aux()
        .iter()
        .zip(&result.aux)
        .map(|(var, v)| if var.integer { v.round() } else { *v })
        .collect();
    Action::Integral { choices, aux }
}

/// Restriction sets of the children of a branching action.
pub fn children(action: &Action, restrictions: &Restrictions) -> Vec<Restrictions> {
    match *action {
        Action::BranchAux { var, value } => vec![
            restrictions.with_aux(AuxRestriction {
                var,
                relation: Relation::Le,
                value: value.floor(),
            }),
            restrictions.with_aux(AuxRestriction {
                var,
                relation: Relation::Ge,
                value: value.ceil(),
            }),
        ],
        Action::BranchBi {
            segment,
            epoch,
            component,
            floor,
            ceil,
            ..
        } => {
            let r = |relation, value| DecisionRestriction {
                segment,
                epoch,
                component,
                relation,
                value,
            };
            vec![
                restrictions.with_decision(r(Relation::Le, floor)),
                restrictions.with_decision(r(Relation::Ge, ceil)),
            ]
        }
        Action::BranchTri {
            segment,
            epoch,
            component,
            value,
        } => [Relation::Lt, Relation::Eq, Relation::Gt]
            .into_iter()
            .map(|relation| {
                restrictions.with_decision(DecisionRestriction {
                    segment,
                    epoch,
                    component,
                    relation,
                    value,
                })
            })
            .collect(),
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub choices: Vec<Vec<usize>>,
    pub aux: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Search finished but bi-partite branching left fractional leaves.
    Unresolved,
    Infeasible,
    TimeLimit,
    NodeLimit,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    pub nodes: usize,
    pub max_depth: usize,
    pub pruned_bound: usize,
    pub pruned_infeasible: usize,
    pub integral: usize,
    pub unresolved: usize,
    pub columns: usize,
    pub colgen_iterations: usize,
    pub root_bound: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnpSolution {
    pub status: SolveStatus,
    pub incumbent: Option<Incumbent>,
    /// Lower bound on the min-form objective.
    pub bound: f64,
    pub gap: f64,
    /// Every bound came from exact pricing.
    pub proven: bool,
    pub stats: TreeStats,
    pub nodes: Vec<NodeRecord>,
    pub log: Vec<IterationLog>,
}

struct Queued {
    bound: f64,
    seq: usize,
    id: usize,
    depth: usize,
    restrictions: Restrictions,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // max-heap: smaller bound first, then earlier insertion
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

enum Queue {
    Best(BinaryHeap<Queued>),
    Depth(Vec<Queued>),
}

impl Queue {
    fn push(&mut self, q: Queued) {
        match self {
            Queue::Best(h) => h.push(q),
            Queue::Depth(v) => v.push(q),
        }
    }

    fn pop(&mut self) -> Option<Queued> {
        match self {
            Queue::Best(h) => h.pop(),
            Queue::Depth(v) => v.pop(),
        }
    }

    fn min_bound(&self) -> f64 {
        let it: Box<dyn Iterator<Item = &Queued>> = match self {
            Queue::Best(h) => Box::new(h.iter()),
            Queue::Depth(v) => Box::new(v.iter()),
        };
        it.map(|q| q.bound).fold(f64::INFINITY, f64::min)
    }
}

/// Upper-bounding heuristic at a node: integer master over the pool. For
/// facility instances the opening variables are fixed first at the LP's K
/// largest values.
fn heuristic(
    master: &Master,
    restrictions: &Restrictions,
    result: &ColgenResult,
    cap: usize,
) -> Result<Option<Incumbent>> {
    let problem = master.problem;
    let mut r = restrictions.clone();
    if let Some(fac) = &problem.instance.facility {
        let mut order: Vec<usize> = (0..fac.open_vars.len()).collect();
        order.sort_by(|&a, &b| {
            result.aux[fac.open_vars[b]]
                .total_cmp(&result.aux[fac.open_vars[a]])
                .then(a.cmp(&b))
        });
        for (rank, &j) in order.iter().enumerate() {
            let value = if rank < fac.open { 1.0 } else { 0.0 };
            r = r.with_aux(AuxRestriction {
                var: fac.open_vars[j],
                relation: Relation::Eq,
                value,
            });
        }
    }
    let Some((choices, aux, _)) = master.integer_heuristic_capped(&r, cap)? else {
        return Ok(None);
    };
    if problem.check_assignment(&choices, &aux).is_err() {
        return Ok(None);
    }
    let objective = problem.objective(&choices, &aux)?;
    Ok(Some(Incumbent {
        choices,
        aux,
        objective,
    }))
}

/// Runs branch-and-price to completion or until a limit is hit.
pub fn solve_tree(problem: &Problem) -> Result<BnpSolution> {
    let start = Instant::now();
    let cfg = &problem.instance.config;
    let deadline = cfg.time_limit.map(|t| start + Duration::from_secs_f64(t));
    let mut master = Master::new(problem)?;
    let mut queue = match cfg.node_selection {
        NodeSelection::BestFirst => Queue::Best(BinaryHeap::new()),
        NodeSelection::DepthFirst => Queue::Depth(Vec::new()),
    };
    let mut seq = 0usize;
    queue.push(Queued {
        bound: f64::NEG_INFINITY,
        seq,
        id: 0,
        depth: 0,
        restrictions: Restrictions::default(),
    });
    let mut next_id = 1usize;
    let mut parents: Vec<Option<usize>> = vec![None];
    let mut records: Vec<NodeRecord> = Vec::new();
    let mut log = Vec::new();
    let mut stats = TreeStats {
        root_bound: f64::NEG_INFINITY,
        ..TreeStats::default()
    };
    let mut incumbent: Option<Incumbent> = None;
    let mut unresolved_bound = f64::INFINITY;
    let mut proven = true;
    let mut status = SolveStatus::Optimal;
    let mut pending = VecDeque::new();

    while let Some(node) = queue.pop() {
        let ub = incumbent.as_ref().map_or(f64::INFINITY, |c| c.objective);
        if deadline.is_some_and(|d| Instant::now() >= d) {
            status = SolveStatus::TimeLimit;
            pending.push_back(node);
            break;
        }
        if cfg.max_nodes.is_some_and(|m| stats.nodes >= m) {
            status = SolveStatus::NodeLimit;
            pending.push_back(node);
            break;
        }
        // parent bound already beaten by the incumbent
        if prune_by_bound(node.bound, ub, cfg.gap) {
            stats.pruned_bound += 1;
            records.push(NodeRecord {
                id: node.id,
                parent: parents[node.id],
                depth: node.depth,
                action: "prune_bound".into(),
                bound: node.bound,
                ub,
                status: NodeStatus::PrunedBound,
            });
            continue;
        }
        stats.nodes += 1;
        stats.max_depth = stats.max_depth.max(node.depth);
        let result = master.solve_node(
            &node.restrictions,
            ColgenOptions {
                node: node.id,
                deadline,
            },
        )?;
        stats.colgen_iterations += result.iterations;
        log.extend(result.log.iter().cloned());
        proven &= result.proven || !result.feasible;
        if node.id == 0 {
            stats.root_bound = result.objective;
        }
        let mut bound = result.objective;
        if result.truncated {
            // the relaxation is not solved; only the parent bound is valid
            bound = node.bound;
            proven = false;
        }

        let mut ub = ub;
        if result.feasible && !prune_by_bound(bound, ub, cfg.gap) {
            let cap = if node.id == 0 {
                crate::lp::DEFAULT_NODE_CAP
            } else {
                HEURISTIC_NODE_CAP
            };
            if let Some(c) = heuristic(&master, &node.restrictions, &result, cap)? {
                if c.objective < ub - 1e-12 {
                    ub = c.objective;
                    incumbent = Some(c);
                }
            }
        }
        let action = if result.truncated && result.feasible {
            // unfinished relaxations are still branched on their current point
            match classify_node(
                problem,
                &master.pool,
                &result,
                &node.restrictions,
                f64::INFINITY,
            ) {
                Action::Integral { .. } | Action::Unresolved => Action::Unresolved,
                a => a,
            }
        } else {
            classify_node(problem, &master.pool, &result, &node.restrictions, ub)
        };
        let node_status = match &action {
            Action::Prune => {
                stats.pruned_bound += 1;
                NodeStatus::PrunedBound
            }
            Action::Infeasible => {
                stats.pruned_infeasible += 1;
                NodeStatus::PrunedInfeasible
            }
            Action::Integral { choices, aux } => {
                stats.integral += 1;
                if problem.check_assignment(choices, aux).is_ok() {
                    let objective = problem.objective(choices, aux)?;
                    if objective < ub - 1e-12 {
                        ub = objective;
                        incumbent = Some(Incumbent {
                            choices: choices.clone(),
                            aux: aux.clone(),
                            objective,
                        });
                    }
                }
                NodeStatus::Integral
            }
            Action::Unresolved => {
                stats.unresolved += 1;
                unresolved_bound = unresolved_bound.min(bound);
                NodeStatus::Unresolved
            }
            branch => {
                for child in children(branch, &node.restrictions) {
                    seq += 1;
                    let id = next_id;
                    next_id += 1;
                    parents.push(Some(node.id));
                    let empty = (0..problem.segments())
                        .any(|i| child.filtered(problem, i).iter().any(Vec::is_empty))
                        || child.aux_bounds(problem).iter().any(|(lo, hi)| lo > hi);
                    if empty {
                        stats.pruned_infeasible += 1;
                        records.push(NodeRecord {
                            id,
                            parent: Some(node.id),
                            depth: node.depth + 1,
                            action: "prune_infeasible".into(),
                            bound: f64::INFINITY,
                            ub,
                            status: NodeStatus::PrunedInfeasible,
                        });
                        continue;
                    }
                    queue.push(Queued {
                        bound,
                        seq,
                        id,
                        depth: node.depth + 1,
                        restrictions: child,
                    });
                }
                NodeStatus::Branched
            }
        };
        records.push(NodeRecord {
            id: node.id,
            parent: parents[node.id],
            depth: node.depth,
            action: action.describe(),
            bound: if result.feasible {
                bound
            } else {
                f64::INFINITY
            },
            ub,
            status: node_status,
        });
    }

    let ub = incumbent.as_ref().map_or(f64::INFINITY, |c| c.objective);
    let open_bound = queue.min_bound().min(
        pending
            .iter()
            .map(|q: &Queued| q.bound)
            .fold(f64::INFINITY, f64::min),
    );
    let mut bound = ub.min(open_bound).min(unresolved_bound);
    if status == SolveStatus::Optimal {
        if stats.unresolved > 0 {
            status = SolveStatus::Unresolved;
        } else if incumbent.is_none() {
            status = SolveStatus::Infeasible;
        }
    }
    if status != SolveStatus::Optimal
        && incumbent.is_none()
        && bound == f64::INFINITY
        && status != SolveStatus::Infeasible
    {
        bound = stats.root_bound;
    }
    stats.columns = master.pool.len();
    stats.seconds = start.elapsed().as_secs_f64();
    records.sort_by_key(|r| r.id);
    Ok(BnpSolution {
        status,
        gap: relative_gap(ub, bound),
        incumbent,
        bound,
        proven,
        stats,
        nodes: records,
        log,
    })
}
