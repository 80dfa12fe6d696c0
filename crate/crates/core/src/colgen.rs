//! Column generation over a global plan pool.
//!
//! The restricted master keeps one convexity row per segment and every
//! coupling row of the instance. Each iteration solves it, prices every
//! segment against the duals and appends the best plan of each segment whose
//! reduced cost is negative. Plans that violate a node's restrictions stay in
//! the pool but get an upper bound of zero in that node's master.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Problem, Sense};
use crate::lp::{solve_integer_restricted, Basis, LpColumn, LpProblem, LpStatus, DEFAULT_NODE_CAP};
use crate::pricing::{backward_induct, build_space, forward_enumerate, Duals, StateSpace};
use crate::restrictions::{fingerprint, Restrictions};

/// Columns with reduced cost below `-REDUCED_COST_TOL` enter the master.
pub const REDUCED_COST_TOL: f64 = 1e-7;
/// Total artificial activity above which a converged master is infeasible.
const ARTIFICIAL_TOL: f64 = 1e-6;
const CACHE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Seed,
    Node(usize),
}

/// A complete decision sequence for one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub segment: usize,
    pub choices: Vec<usize>,
    pub cost: f64,
    pub origin: Origin,
}

#[derive(Debug, Clone, Default)]
pub struct ColumnPool {
    pub plans: Vec<Plan>,
    seen: HashSet<(usize, Vec<usize>)>,
}

impl ColumnPool {
    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    pub fn contains(&self, segment: usize, choices: &[usize]) -> bool {
        self.seen.contains(&(segment, choices.to_vec()))
    }

    /// Adds a plan unless an identical one is pooled; returns its index when added.
    pub fn insert(&mut self, plan: Plan) -> Option<usize> {
        if !self.seen.insert((plan.segment, plan.choices.clone())) {
            return None;
        }
        self.plans.push(plan);
        Some(self.plans.len() - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub node: usize,
    pub iteration: usize,
    pub objective: f64,
    pub min_reduced_cost: f64,
    pub columns_added: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColgenResult {
    /// False when the master still needs artificial columns at convergence.
    pub feasible: bool,
    pub objective: f64,
    /// Pool indices of columns with positive value, and their values.
    pub z: Vec<(usize, f64)>,
    pub aux: Vec<f64>,
    pub duals: Duals,
    pub iterations: usize,
    /// The iteration cap or the deadline stopped the loop early.
    pub truncated: bool,
    /// Pricing was exact and converged, so `objective` is a valid bound.
    pub proven: bool,
    pub log: Vec<IterationLog>,
}

impl ColgenResult {
    /// `Σ_p α^p_is ẑ^p_i` for every segment and epoch.
    pub fn implied_decisions(&self, problem: &Problem, pool: &ColumnPool) -> Vec<Vec<Vec<f64>>> {
        let mut out: Vec<Vec<Vec<f64>>> = (0..problem.segments())
            .map(|i| vec![vec![0.0; problem.segment(i).dynamics.control_dim()]; problem.epochs()])
            .collect();
        for &(p, v) in &self.z {
            let plan = &pool.plans[p];
            for (s, &d) in plan.choices.iter().enumerate() {
                for (k, x) in problem.decision(plan.segment, s, d).iter().enumerate() {
                    out[plan.segment][s][k] += v * x;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ColgenOptions {
    pub node: usize,
    pub deadline: Option<Instant>,
}

/// Layout of the restricted master for one node.
struct Rmp {
    lp: LpProblem,
    /// Pool index of each plan column, in column order after the fixed block.
    plan_cols: Vec<usize>,
    fixed: usize,
    artificials: std::ops::Range<usize>,
}

/// Master problem state shared by all nodes of a tree.
pub struct Master<'a> {
    pub problem: &'a Problem,
    pub pool: ColumnPool,
    pub penalty: f64,
    cache: HashMap<(usize, u64, bool), Arc<StateSpace>>,
}

/// Index of the smallest decision (component sum, then position) among `allowed`.
fn minimal_decision(problem: &Problem, i: usize, s: usize, allowed: &[usize]) -> usize {
    let mut best = allowed[0];
    let mut best_sum = f64::INFINITY;
    for &d in allowed {
        let sum: f64 = problem.decision(i, s, d).iter().sum();
        if sum < best_sum {
            best = d;
            best_sum = sum;
        }
    }
    best
}

/// Per epoch, the decision closest to an equal split of every declared resource.
fn uniform_share(problem: &Problem, i: usize) -> Option<Vec<usize>> {
    let resources = &problem.instance.resources;
    if resources.is_empty() {
        return None;
    }
    let n = problem.segments() as f64;
    let seg = problem.segment(i);
    let choices = (0..problem.epochs())
        .map(|s| {
            let mut best = 0;
            let mut best_score = f64::INFINITY;
            for (d, x) in seg.decisions[s].iter().enumerate() {
                let mut score = 0.0;
                for r in resources {
                    let share = r.budget[s] / n;
                    let v = x[r.component];
                    if v > share + 1e-9 {
                        score = f64::INFINITY;
                        break;
                    }
                    score += share - v;
                }
                if score < best_score {
                    best = d;
                    best_score = score;
                }
            }
            best_score.is_finite().then_some(best)
        })
        .collect::<Option<Vec<_>>>()?;
    Some(choices)
}

impl<'a> Master<'a> {
    /// Seeds the pool with the do-nothing plan and, when resources are
    /// declared, the uniform-share plan of every segment.
    pub fn new(problem: &'a Problem) -> Result<Self> {
        let mut pool = ColumnPool::default();
        let mut max_cost = 0.0f64;
        for i in 0..problem.segments() {
            let all = Restrictions::default().filtered(problem, i);
            let idle: Vec<usize> = (0..problem.epochs())
                .map(|s| minimal_decision(problem, i, s, &all[s]))
                .collect();
            let mut seeds = vec![idle];
            if let Some(u) = uniform_share(problem, i) {
                seeds.push(u);
            }
            for choices in seeds {
                let cost = problem.plan_cost(i, &choices)?;
                max_cost = max_cost.max(cost.abs());
                pool.insert(Plan {
                    segment: i,
                    choices,
                    cost,
                    origin: Origin::Seed,
                });
            }
        }
        let aux_max = problem
            .aux()
            .iter()
            .fold(0.0f64, |a, v| a.max(v.cost.abs()));
        Ok(Master {
            problem,
            pool,
            penalty: 1e6 * (max_cost.max(aux_max) + 1.0),
            cache: HashMap::new(),
        })
    }

    fn plan_column(&self, p: usize, restrictions: &Restrictions) -> LpColumn {
        let problem = self.problem;
        let plan = &self.pool.plans[p];
        let rows = problem.rows().len();
        let mut entries = problem.plan_coefficients(plan.segment, &plan.choices);
        entries.retain(|(_, v)| *v != 0.0);
        entries.push((rows + plan.segment, 1.0));
        let upper = if restrictions.allows_plan(problem, plan.segment, &plan.choices) {
            f64::INFINITY
        } else {
            0.0
        };
        LpColumn::new(plan.cost, 0.0, upper, entries).named(format!("z{p}_s{}", plan.segment))
    }

    fn build_rmp(&self, restrictions: &Restrictions) -> Rmp {
        let problem = self.problem;
        let mut lp = LpProblem::new();
        for (r, row) in problem.rows().iter().enumerate() {
            let name = if row.name.is_empty() {
                format!("row{r}")
            } else {
                row.name.clone()
            };
            lp.add_row(name, row.sense, row.rhs);
        }
        for i in 0..problem.segments() {
            lp.add_row(format!("convexity{i}"), Sense::Eq, 1.0);
        }
        let bounds = restrictions.aux_bounds(problem);
        for (a, var) in problem.aux().iter().enumerate() {
            let mut entries = Vec::new();
            for (r, row) in problem.rows().iter().enumerate() {
                for t in row.aux_terms.iter().filter(|t| t.var == a) {
                    entries.push((r, t.coef));
                }
            }
            let name = if var.name.is_empty() {
                format!("y{a}")
            } else {
                var.name.clone()
            };
            lp.add_column(LpColumn::new(var.cost, bounds[a].0, bounds[a].1, entries).named(name))
                .expect("rows exist");
        }
        let start = lp.columns.len();
        let art = |lp: &mut LpProblem, r: usize, coef: f64| {
            lp.add_column(
                LpColumn::new(self.penalty, 0.0, f64::INFINITY, vec![(r, coef)])
                    .named(format!("art{r}")),
            )
            .expect("rows exist");
        };
        for (r, row) in problem.rows().iter().enumerate() {
            match row.sense {
                Sense::Ge => art(&mut lp, r, 1.0),
                Sense::Le => art(&mut lp, r, -1.0),
                Sense::Eq => {
                    art(&mut lp, r, 1.0);
                    art(&mut lp, r, -1.0);
                }
            }
        }
        for i in 0..problem.segments() {
            art(&mut lp, problem.rows().len() + i, 1.0);
        }
        let fixed = lp.columns.len();
        let mut rmp = Rmp {
            lp,
            plan_cols: Vec::new(),
            fixed,
            artificials: start..fixed,
        };
        for p in 0..self.pool.len() {
            let col = self.plan_column(p, restrictions);
            rmp.lp.add_column(col).expect("rows exist");
            rmp.plan_cols.push(p);
        }
        rmp
    }

    /// Pricing spaces of every segment under `restrictions`, built on demand.
    fn spaces(&mut self, restrictions: &Restrictions, exact: bool) -> Result<Vec<Arc<StateSpace>>> {
        let problem = self.problem;
        let keys: Vec<(usize, u64, bool)> = (0..problem.segments())
            .map(|i| (i, fingerprint(&restrictions.filtered(problem, i)), exact))
            .collect();
        let missing: Vec<usize> = (0..keys.len())
            .filter(|&i| !self.cache.contains_key(&keys[i]))
            .collect();
        let built: Vec<Result<StateSpace>> = missing
            .par_iter()
            .map(|&i| {
                let f = restrictions.filtered(problem, i);
                if exact {
                    forward_enumerate(problem, i, &f, problem.instance.config.state_cap)
                } else {
                    build_space(problem, i, &f)
                }
            })
            .collect();
        if self.cache.len() + missing.len() > CACHE_LIMIT {
            self.cache.clear();
        }
        let mut out: Vec<Option<Arc<StateSpace>>> =
            keys.iter().map(|k| self.cache.get(k).cloned()).collect();
        for (i, space) in missing.into_iter().zip(built) {
            let space = Arc::new(space?);
            self.cache.insert(keys[i], space.clone());
            out[i] = Some(space);
        }
        Ok(out.into_iter().map(|s| s.expect("filled")).collect())
    }

    /// Best plan per segment under `duals`; returns `(segment, choices, cost, reduced cost)`.
    fn price(
        &self,
        spaces: &[Arc<StateSpace>],
        duals: &Duals,
    ) -> Result<Vec<(usize, Vec<usize>, f64, f64)>> {
        let problem = self.problem;
        (0..problem.segments())
            .into_par_iter()
            .map(|i| {
                let space = &spaces[i];
                let res = backward_induct(space, &duals.stage_weights(problem, i, space));
                let cost = problem.plan_cost(i, &res.choices)?;
                let mut rc = cost - duals.convexity[i];
                for (r, v) in problem.plan_coefficients(i, &res.choices) {
                    rc -= duals.rows[r] * v;
                }
                Ok((i, res.choices, cost, rc))
            })
            .collect()
    }

    /// Runs column generation at a node with the given restrictions.
    pub fn solve_node(
        &mut self,
        restrictions: &Restrictions,
        opts: ColgenOptions,
    ) -> Result<ColgenResult> {
        let problem = self.problem;
        let cfg = &problem.instance.config;
        // make sure each segment has at least one admissible pooled plan
        for i in 0..problem.segments() {
            let allowed = restrictions.filtered(problem, i);
            if allowed.iter().any(Vec::is_empty) {
                return Ok(infeasible_result(problem));
            }
            let has = self
                .pool
                .plans
                .iter()
                .any(|p| p.segment == i && restrictions.allows_plan(problem, i, &p.choices));
            if !has {
                let choices: Vec<usize> = (0..problem.epochs())
                    .map(|s| minimal_decision(problem, i, s, &allowed[s]))
                    .collect();
                let cost = problem.plan_cost(i, &choices)?;
                self.pool.insert(Plan {
                    segment: i,
                    choices,
                    cost,
                    origin: Origin::Node(opts.node),
                });
            }
        }

        let clustered =
            cfg.eps > 0.0 || matches!(cfg.clustering, crate::instance::Clustering::Kmeans { .. });
        let mut exact_phase = !clustered;
        let mut rmp = self.build_rmp(restrictions);
        let mut basis: Option<Basis> = None;
        let mut log = Vec::new();
        let mut iterations = 0;
        let mut truncated = false;
        let mut proven = !clustered;
        let rows = problem.rows().len();
        let (sol, duals) = loop {
            iterations += 1;
            let sol = rmp.lp.solve(basis.as_ref())?;
            if sol.status != LpStatus::Optimal {
                return Err(Error::Lp(format!("restricted master is {:?}", sol.status)));
            }
            let duals = Duals {
                rows: sol.duals[..rows].to_vec(),
                convexity: sol.duals[rows..].to_vec(),
            };
            let spaces = match self.spaces(restrictions, exact_phase && clustered) {
                Ok(s) => s,
                Err(Error::StateSpaceTooLarge { .. }) if exact_phase && clustered => {
                    // exact re-pricing is out of reach; keep the clustered bound
                    proven = false;
                    break (sol, duals);
                }
                Err(e) => return Err(e),
            };
            let priced = self.price(&spaces, &duals)?;
            let min_rc = priced.iter().map(|p| p.3).fold(f64::INFINITY, f64::min);
            let mut added = 0;
            for (i, choices, cost, rc) in priced {
                if rc < -REDUCED_COST_TOL && !self.pool.contains(i, &choices) {
                    let p = self
                        .pool
                        .insert(Plan {
                            segment: i,
                            choices,
                            cost,
                            origin: Origin::Node(opts.node),
                        })
                        .expect("not pooled");
                    let col = self.plan_column(p, restrictions);
                    rmp.lp.add_column(col)?;
                    rmp.plan_cols.push(p);
                    added += 1;
                }
            }
            log.push(IterationLog {
                node: opts.node,
                iteration: iterations,
                objective: sol.objective,
                min_reduced_cost: min_rc,
                columns_added: added,
            });
            basis = Some(sol.basis.clone());
            if added == 0 {
                if clustered && cfg.exact_finish && !exact_phase {
                    exact_phase = true;
                    proven = true;
                    continue;
                }
                break (sol, duals);
            }
            let out_of_time = opts.deadline.is_some_and(|d| Instant::now() >= d);
            if iterations >= cfg.max_colgen_iterations || out_of_time {
                truncated = true;
                // columns were just added; re-solve so the reported point is optimal for the pool
                let sol = rmp.lp.solve(basis.as_ref())?;
                let duals = Duals {
                    rows: sol.duals[..rows].to_vec(),
                    convexity: sol.duals[rows..].to_vec(),
                };
                break (sol, duals);
            }
        };

        let art: f64 = rmp.artificials.clone().map(|j| sol.x[j]).sum();
        let aux = sol.x[..problem.aux().len()].to_vec();
        let z = rmp
            .plan_cols
            .iter()
            .enumerate()
            .filter_map(|(k, &p)| {
                let v = sol.x[rmp.fixed + k];
                (v > 1e-12).then_some((p, v))
            })
            .collect();
        Ok(ColgenResult {
            feasible: art <= ARTIFICIAL_TOL,
            objective: sol.objective,
            z,
            aux,
            duals,
            iterations,
            truncated,
            proven: proven && !truncated,
            log,
        })
    }

    /// Restricted master over the current pool with integral plan and integer
    /// auxiliary variables, artificials excluded.
    pub fn integer_heuristic(
        &self,
        restrictions: &Restrictions,
    ) -> Result<Option<(Vec<Vec<usize>>, Vec<f64>, f64)>> {
        self.integer_heuristic_capped(restrictions, DEFAULT_NODE_CAP)
    }

    pub fn integer_heuristic_capped(
        &self,
        restrictions: &Restrictions,
        cap: usize,
    ) -> Result<Option<(Vec<Vec<usize>>, Vec<f64>, f64)>> {
        let problem = self.problem;
        let mut rmp = self.build_rmp(restrictions);
        for j in rmp.artificials.clone() {
            rmp.lp.set_bounds(j, 0.0, 0.0);
        }
        let mut integer = vec![false; rmp.lp.columns.len()];
        for (a, var) in problem.aux().iter().enumerate() {
            integer[a] = var.integer;
        }
        for k in 0..rmp.plan_cols.len() {
            integer[rmp.fixed + k] = true;
        }
        let mip = solve_integer_restricted(&rmp.lp, &integer, cap)?;
        let Some(x) = mip.x else { return Ok(None) };
        let mut choices = vec![Vec::new(); problem.segments()];
        for (k, &p) in rmp.plan_cols.iter().enumerate() {
            if x[rmp.fixed + k] > 0.5 {
                let plan = &self.pool.plans[p];
                choices[plan.segment] = plan.choices.clone();
            }
        }
        let aux = x[..problem.aux().len()].to_vec();
        Ok(Some((choices, aux, mip.objective)))
    }

    /// LP text of the master at a node, for debugging.
    pub fn master_lp(&self, restrictions: &Restrictions) -> LpProblem {
        self.build_rmp(restrictions).lp
    }
}

fn infeasible_result(problem: &Problem) -> ColgenResult {
    ColgenResult {
        feasible: false,
        objective: f64::INFINITY,
        z: Vec::new(),
        aux: vec![0.0; problem.aux().len()],
        duals: Duals::zero(problem),
        iterations: 0,
        truncated: false,
        proven: true,
        log: Vec::new(),
    }
}
