//! Problem instances: segments with dynamics and finite decision sets, linear
//! coupling rows over decisions and auxiliary variables, and solver settings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Model;
use crate::ode::{integrate, Dynamics, EpochGrid};

pub const SCHEMA_VERSION: u32 = 1;

/// Row feasibility tolerance used when checking allocations.
pub const ROW_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Vaccine,
    Facility,
    Content,
    Congestion,
    Generic,
}

/// One independently evolving population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(default)]
    pub name: String,
    pub dynamics: Model,
    pub initial_state: Vec<f64>,
    /// `decisions[s]` lists the feasible decision vectors of epoch `s`.
    pub decisions: Vec<Vec<Vec<f64>>>,
    /// Linear decision cost per component, charged every epoch.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decision_cost: Vec<f64>,
}

impl Segment {
    pub fn decision_cost(&self, x: &[f64]) -> f64 {
        self.decision_cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanTerm {
    pub segment: usize,
    pub epoch: usize,
    #[serde(default)]
    pub component: usize,
    pub coef: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxTerm {
    pub var: usize,
    pub coef: f64,
}

/// `Σ coef·x[segment][epoch][component] + Σ coef·y[var]  (sense)  rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    #[serde(default)]
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plan_terms: Vec<PlanTerm>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aux_terms: Vec<AuxTerm>,
}

impl CouplingRow {
    pub fn new(name: impl Into<String>, sense: Sense, rhs: f64) -> Self {
        CouplingRow {
            name: name.into(),
            sense,
            rhs,
            plan_terms: Vec::new(),
            aux_terms: Vec::new(),
        }
    }

    pub fn plan(mut self, segment: usize, epoch: usize, component: usize, coef: f64) -> Self {
        self.plan_terms.push(PlanTerm {
            segment,
            epoch,
            component,
            coef,
        });
        self
    }

    pub fn aux(mut self, var: usize, coef: f64) -> Self {
        self.aux_terms.push(AuxTerm { var, coef });
        self
    }

    pub fn satisfied(&self, lhs: f64) -> bool {
        let tol = ROW_TOLERANCE * (1.0 + self.rhs.abs());
        match self.sense {
            Sense::Ge => lhs >= self.rhs - tol,
            Sense::Le => lhs <= self.rhs + tol,
            Sense::Eq => (lhs - self.rhs).abs() <= tol,
        }
    }
}

/// Auxiliary linear variable (facility opening, flows, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxVar {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub lower: f64,
    /// `None` means unbounded above.
    #[serde(default)]
    pub upper: Option<f64>,
    #[serde(default)]
    pub cost: f64,
    #[serde(default)]
    pub integer: bool,
}

impl AuxVar {
    pub fn upper_bound(&self) -> f64 {
        self.upper.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// Minimize raw cost.
    #[default]
    Cost,
    /// Minimize cost relative to the do-nothing trajectory (maximize savings).
    Savings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branching {
    #[default]
    Tri,
    Bi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeSelection {
    #[default]
    BestFirst,
    DepthFirst,
}

/// State-space aggregation used by pricing when `eps > 0` or k-means is chosen.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Clustering {
    #[default]
    Linf,
    /// k-means with a fixed cluster count for each epoch boundary `2..=S+1`.
    Kmeans { clusters: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// ℓ∞ cluster diameter; 0 means exact enumeration.
    pub eps: f64,
    /// Relative optimality gap for pruning.
    pub gap: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub seed: u64,
    pub branching: Branching,
    pub node_selection: NodeSelection,
    pub clustering: Clustering,
    /// Re-price with exact enumeration once clustered pricing converges.
    pub exact_finish: bool,
    pub max_colgen_iterations: usize,
    pub max_nodes: Option<usize>,
    /// Cap on state-decision pairs per segment for exact enumeration.
    pub state_cap: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps: 0.0,
            gap: 1e-3,
            time_limit: None,
            seed: 0,
            branching: Branching::Tri,
            node_selection: NodeSelection::BestFirst,
            clustering: Clustering::Linf,
            exact_finish: false,
            max_colgen_iterations: 500,
            max_nodes: None,
            state_cap: 10_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(Error::validation(
                "config.eps",
                "must be finite and non-negative",
            ));
        }
        if !(self.gap.is_finite() && self.gap >= 0.0) {
            return Err(Error::validation(
                "config.gap",
                "must be finite and non-negative",
            ));
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(Error::validation("config.time_limit", "must be positive"));
            }
        }
        if self.max_colgen_iterations == 0 {
            return Err(Error::validation(
                "config.max_colgen_iterations",
                "must be positive",
            ));
        }
        if let Clustering::Kmeans { clusters } = &self.clustering {
            if clusters.iter().any(|k| *k == 0) {
                return Err(Error::validation(
                    "config.clustering.clusters",
                    "counts must be positive",
                ));
            }
        }
        Ok(())
    }
}

/// Candidate facilities for the vaccination-center variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilityLayout {
    /// Number of facilities to open.
    pub open: usize,
    /// `capacity[j][s]`.
    pub capacity: Vec<Vec<f64>>,
    /// `coverage[i][j]`: residents of segment `i` reachable from facility `j`.
    pub coverage: Vec<Vec<f64>>,
    /// Per-epoch total budget.
    pub budget: Vec<f64>,
    /// Auxiliary index of `y_j`.
    pub open_vars: Vec<usize>,
    /// Auxiliary index of the flow `x_ijs`, laid out `[i][j][s]`.
    pub flow_vars: Vec<Vec<Vec<usize>>>,
}

impl FacilityLayout {
    pub fn facilities(&self) -> usize {
        self.capacity.len()
    }
}

/// A divisible resource shared by all segments, used by the benchmark heuristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    #[serde(default)]
    pub name: String,
    pub component: usize,
    /// Amount to distribute in each epoch.
    pub budget: Vec<f64>,
    /// Allocation granularity.
    pub step: f64,
}

/// At most `limit` segments may have a non-zero `component` in any epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sparsity {
    pub component: usize,
    pub limit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub kind: ProblemKind,
    pub grid: EpochGrid,
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub rows: Vec<CouplingRow>,
    #[serde(default)]
    pub aux: Vec<AuxVar>,
    #[serde(default)]
    pub objective: ObjectiveMode,
    #[serde(default)]
    pub config: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facility: Option<FacilityLayout>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub resources: Vec<Resource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<Sparsity>,
}

impl Instance {
    pub fn new(kind: ProblemKind, grid: EpochGrid, segments: Vec<Segment>) -> Self {
        Instance {
            schema_version: SCHEMA_VERSION,
            name: String::new(),
            kind,
            grid,
            segments,
            rows: Vec::new(),
            aux: Vec::new(),
            objective: ObjectiveMode::Cost,
            config: SolverConfig::default(),
            facility: None,
            resources: Vec::new(),
            sparsity: None,
        }
    }

    pub fn epochs(&self) -> usize {
        self.grid.epochs()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        self.grid.validate()?;
        self.config.validate()?;
        if self.segments.is_empty() {
            return Err(Error::validation(
                "segments",
                "at least one segment is required",
            ));
        }
        let epochs = self.epochs();
        for (i, seg) in self.segments.iter().enumerate() {
            let path = format!("segments[{i}]");
            seg.dynamics.validate(&format!("{path}.dynamics"))?;
            if seg.initial_state.len() != seg.dynamics.dim() {
                return Err(Error::validation(
                    format!("{path}.initial_state"),
                    format!(
                        "has {} entries, model {} expects {}",
                        seg.initial_state.len(),
                        seg.dynamics.name(),
                        seg.dynamics.dim()
                    ),
                ));
            }
            if seg.initial_state.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(
                    format!("{path}.initial_state"),
                    "non-finite entry",
                ));
            }
            if seg.decisions.len() != epochs {
                return Err(Error::validation(
                    format!("{path}.decisions"),
                    format!("has {} epochs, grid has {epochs}", seg.decisions.len()),
                ));
            }
            let k = seg.dynamics.control_dim();
            if !seg.decision_cost.is_empty() && seg.decision_cost.len() != k {
                return Err(Error::validation(
                    format!("{path}.decision_cost"),
                    format!("expected {k} entries"),
                ));
            }
            for (s, set) in seg.decisions.iter().enumerate() {
                let p = format!("{path}.decisions[{s}]");
                if set.is_empty() {
                    return Err(Error::validation(p, "empty decision set"));
                }
                for (d, x) in set.iter().enumerate() {
                    let pd = format!("{p}[{d}]");
                    if x.len() != k {
                        return Err(Error::validation(
                            pd,
                            format!("has {} components, expected {k}", x.len()),
                        ));
                    }
                    if x.iter().any(|v| !v.is_finite()) {
                        return Err(Error::validation(pd, "non-finite component"));
                    }
                    seg.dynamics
                        .check_decision(x)
                        .map_err(|e| Error::validation(pd.clone(), e.to_string()))?;
                    if set[..d].contains(x) {
                        return Err(Error::validation(pd, "duplicate decision"));
                    }
                }
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            let path = format!("rows[{r}]");
            if !row.rhs.is_finite() {
                return Err(Error::validation(format!("{path}.rhs"), "must be finite"));
            }
            for (t, term) in row.plan_terms.iter().enumerate() {
                let p = format!("{path}.plan_terms[{t}]");
                let seg = self.segments.get(term.segment).ok_or_else(|| {
                    Error::validation(p.clone(), format!("unknown segment {}", term.segment))
                })?;
                if term.epoch >= epochs {
                    return Err(Error::validation(
                        p,
                        format!("unknown epoch {}", term.epoch),
                    ));
                }
                if term.component >= seg.dynamics.control_dim() {
                    return Err(Error::validation(
                        p,
                        format!("unknown component {}", term.component),
                    ));
                }
                if !term.coef.is_finite() {
                    return Err(Error::validation(p, "non-finite coefficient"));
                }
            }
            for (t, term) in row.aux_terms.iter().enumerate() {
                let p = format!("{path}.aux_terms[{t}]");
                if term.var >= self.aux.len() {
                    return Err(Error::validation(
                        p,
                        format!("unknown auxiliary variable {}", term.var),
                    ));
                }
                if !term.coef.is_finite() {
                    return Err(Error::validation(p, "non-finite coefficient"));
                }
            }
        }
        for (a, var) in self.aux.iter().enumerate() {
            let path = format!("aux[{a}]");
            if !var.lower.is_finite() || !var.cost.is_finite() {
                return Err(Error::validation(
                    path,
                    "lower bound and cost must be finite",
                ));
            }
            if var.upper_bound() < var.lower {
                return Err(Error::validation(
                    format!("{path}.upper"),
                    "below lower bound",
                ));
            }
        }
        if let Some(f) = &self.facility {
            let nf = f.facilities();
            if f.open > nf {
                return Err(Error::validation(
                    "facility.open",
                    "exceeds the number of candidates",
                ));
            }
            if f.coverage.len() != self.segments.len() || f.coverage.iter().any(|r| r.len() != nf) {
                return Err(Error::validation(
                    "facility.coverage",
                    "must be segments × facilities",
                ));
            }
            if f.capacity.iter().any(|r| r.len() != epochs) || f.budget.len() != epochs {
                return Err(Error::validation(
                    "facility.capacity",
                    "must cover every epoch",
                ));
            }
            let all = f
                .capacity
                .iter()
                .chain(f.coverage.iter())
                .flatten()
                .chain(f.budget.iter());
            if all.clone().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::validation(
                    "facility",
                    "capacities, coverage and budgets must be non-negative",
                ));
            }
            let flows_ok = f.open_vars.len() == nf
                && f.flow_vars.len() == self.segments.len()
                && f.flow_vars
                    .iter()
                    .all(|r| r.len() == nf && r.iter().all(|c| c.len() == epochs));
            let idx_ok = f
                .open_vars
                .iter()
                .chain(f.flow_vars.iter().flatten().flatten())
                .all(|v| *v < self.aux.len());
            if !flows_ok || !idx_ok {
                return Err(Error::validation(
                    "facility.flow_vars",
                    "inconsistent auxiliary indices",
                ));
            }
        }
        for (r, res) in self.resources.iter().enumerate() {
            let path = format!("resources[{r}]");
            if res.budget.len() != epochs {
                return Err(Error::validation(
                    format!("{path}.budget"),
                    "must cover every epoch",
                ));
            }
            if !(res.step > 0.0 && res.step.is_finite()) {
                return Err(Error::validation(
                    format!("{path}.step"),
                    "must be positive",
                ));
            }
            if self
                .segments
                .iter()
                .any(|s| res.component >= s.dynamics.control_dim())
            {
                return Err(Error::validation(
                    format!("{path}.component"),
                    "out of range",
                ));
            }
        }
        if let Some(sp) = &self.sparsity {
            if self
                .segments
                .iter()
                .any(|s| sp.component >= s.dynamics.control_dim())
            {
                return Err(Error::validation("sparsity.component", "out of range"));
            }
        }
        Ok(())
    }
}

/// A plan-row coefficient of one segment: `(row, epoch, component, coef)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentTerm {
    pub row: usize,
    pub epoch: usize,
    pub component: usize,
    pub coef: f64,
}

/// A validated instance with precomputed do-nothing baselines and row indices.
#[derive(Debug, Clone)]
pub struct Problem {
    pub instance: Instance,
    baseline: Vec<f64>,
    terms: Vec<Vec<SegmentTerm>>,
}

impl Problem {
    pub fn new(instance: Instance) -> Result<Self> {
        instance.validate()?;
        let mut terms = vec![Vec::new(); instance.segments.len()];
        for (r, row) in instance.rows.iter().enumerate() {
            for t in &row.plan_terms {
                terms[t.segment].push(SegmentTerm {
                    row: r,
                    epoch: t.epoch,
                    component: t.component,
                    coef: t.coef,
                });
            }
        }
        let baseline = instance
            .segments
            .iter()
            .map(|seg| {
                let zero = vec![vec![0.0; seg.dynamics.control_dim()]; instance.epochs()];
                let traj = integrate(&seg.dynamics, &seg.initial_state, &zero, &instance.grid)?;
                Ok(traj.running_cost + seg.dynamics.terminal_cost(&traj.terminal))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Problem {
            instance,
            baseline,
            terms,
        })
    }

    pub fn segments(&self) -> usize {
        self.instance.segments.len()
    }

    pub fn epochs(&self) -> usize {
        self.instance.epochs()
    }

    pub fn segment(&self, i: usize) -> &Segment {
        &self.instance.segments[i]
    }

    pub fn grid(&self) -> &EpochGrid {
        &self.instance.grid
    }

    pub fn rows(&self) -> &[CouplingRow] {
        &self.instance.rows
    }

    pub fn aux(&self) -> &[AuxVar] {
        &self.instance.aux
    }

    pub fn decision(&self, i: usize, s: usize, d: usize) -> &[f64] {
        &self.instance.segments[i].decisions[s][d]
    }

    pub fn terms(&self, i: usize) -> &[SegmentTerm] {
        &self.terms[i]
    }

    /// Raw do-nothing cost of a segment (all-zero controls).
    pub fn baseline_cost(&self, i: usize) -> f64 {
        self.baseline[i]
    }

    /// Constant subtracted from every plan cost of segment `i`.
    pub fn offset(&self, i: usize) -> f64 {
        match self.instance.objective {
            ObjectiveMode::Cost => 0.0,
            ObjectiveMode::Savings => self.baseline[i],
        }
    }

    /// Index of `x` in `F_is`.
    pub fn decision_index(&self, i: usize, s: usize, x: &[f64]) -> Result<usize> {
        self.instance.segments[i].decisions[s]
            .iter()
            .position(|d| {
                d.len() == x.len() && d.iter().zip(x).all(|(a, b)| (a - b).abs() <= 1e-12)
            })
            .ok_or_else(|| Error::InfeasibleDecision {
                segment: i,
                epoch: s,
                decision: x.to_vec(),
            })
    }

    /// `∫g dt + h(M(T)) + Σ_s Γ_is(x_is)` for a sequence of decision indices.
    pub fn raw_cost(&self, i: usize, choices: &[usize]) -> Result<f64> {
        let seg = self.segment(i);
        if choices.len() != self.epochs() {
            return Err(Error::Config(format!(
                "plan has {} epochs, instance has {}",
                choices.len(),
                self.epochs()
            )));
        }
        let mut controls = Vec::with_capacity(choices.len());
        let mut gamma = 0.0;
        for (s, &d) in choices.iter().enumerate() {
            let x = seg.decisions[s]
                .get(d)
                .ok_or_else(|| Error::InfeasibleDecision {
                    segment: i,
                    epoch: s,
                    decision: vec![d as f64],
                })?;
            gamma += seg.decision_cost(x);
            controls.push(x.clone());
        }
        let traj = integrate(&seg.dynamics, &seg.initial_state, &controls, self.grid())?;
        Ok(traj.running_cost + seg.dynamics.terminal_cost(&traj.terminal) + gamma)
    }

    /// Plan cost `C^p_i` as used in the master problem.
    pub fn plan_cost(&self, i: usize, choices: &[usize]) -> Result<f64> {
        Ok(self.raw_cost(i, choices)? - self.offset(i))
    }

    /// Plan cost for explicit decision vectors; rejects decisions outside `F_is`.
    pub fn evaluate_plan(&self, i: usize, decisions: &[Vec<f64>]) -> Result<f64> {
        let choices = decisions
            .iter()
            .enumerate()
            .map(|(s, x)| self.decision_index(i, s, x))
            .collect::<Result<Vec<_>>>()?;
        self.plan_cost(i, &choices)
    }

    /// Row activity contributed by a segment's plan, as `(row, value)` pairs.
    pub fn plan_coefficients(&self, i: usize, choices: &[usize]) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for t in &self.terms[i] {
            let v = t.coef * self.decision(i, t.epoch, choices[t.epoch])[t.component];
            match out.iter_mut().find(|(r, _)| *r == t.row) {
                Some(e) => e.1 += v,
                None => out.push((t.row, v)),
            }
        }
        out.sort_by_key(|e| e.0);
        out
    }

    /// Left-hand sides of all rows for a full assignment.
    pub fn row_activity(&self, choices: &[Vec<usize>], aux: &[f64]) -> Vec<f64> {
        let mut lhs = vec![0.0; self.rows().len()];
        for (i, c) in choices.iter().enumerate() {
            for (r, v) in self.plan_coefficients(i, c) {
                lhs[r] += v;
            }
        }
        for (r, row) in self.rows().iter().enumerate() {
            for t in &row.aux_terms {
                lhs[r] += t.coef * aux[t.var];
            }
        }
        lhs
    }

    /// Checks rows, auxiliary bounds and integrality of a full assignment.
    pub fn check_assignment(&self, choices: &[Vec<usize>], aux: &[f64]) -> Result<()> {
        if choices.len() != self.segments() || aux.len() != self.aux().len() {
            return Err(Error::Structure("assignment has the wrong shape".into()));
        }
        for (i, c) in choices.iter().enumerate() {
            if c.len() != self.epochs() {
                return Err(Error::Structure(format!(
                    "segment {i} plan has the wrong length"
                )));
            }
            for (s, &d) in c.iter().enumerate() {
                if d >= self.segment(i).decisions[s].len() {
                    return Err(Error::InfeasibleDecision {
                        segment: i,
                        epoch: s,
                        decision: vec![d as f64],
                    });
                }
            }
        }
        for (a, (var, v)) in self.aux().iter().zip(aux).enumerate() {
            let tol = ROW_TOLERANCE * (1.0 + v.abs());
            if *v < var.lower - tol || *v > var.upper_bound() + tol {
                return Err(Error::validation(
                    format!("aux[{a}]"),
                    format!("value {v} outside its bounds"),
                ));
            }
            if var.integer && (v - v.round()).abs() > 1e-6 {
                return Err(Error::validation(
                    format!("aux[{a}]"),
                    format!("value {v} is not integral"),
                ));
            }
        }
        let lhs = self.row_activity(choices, aux);
        for (r, row) in self.rows().iter().enumerate() {
            if !row.satisfied(lhs[r]) {
                return Err(Error::validation(
                    format!("rows[{r}]"),
                    format!(
                        "{} violated: activity {} vs rhs {}",
                        row.name, lhs[r], row.rhs
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn aux_cost(&self, aux: &[f64]) -> f64 {
        self.aux().iter().zip(aux).map(|(v, y)| v.cost * y).sum()
    }

    /// Min-form objective of a full assignment.
    pub fn objective(&self, choices: &[Vec<usize>], aux: &[f64]) -> Result<f64> {
        let mut total = self.aux_cost(aux);
        for (i, c) in choices.iter().enumerate() {
            total += self.plan_cost(i, c)?;
        }
        Ok(total)
    }

    /// Savings relative to doing nothing: `Σ baseline − Σ raw − d·y`.
    pub fn savings(&self, choices: &[Vec<usize>], aux: &[f64]) -> Result<f64> {
        let mut total = -self.aux_cost(aux);
        for (i, c) in choices.iter().enumerate() {
            total += self.baseline[i] - self.raw_cost(i, c)?;
        }
        Ok(total)
    }

    /// Converts a min-form objective value to savings.
    pub fn objective_to_savings(&self, objective: f64) -> f64 {
        match self.instance.objective {
            ObjectiveMode::Savings => -objective,
            ObjectiveMode::Cost => self.baseline.iter().sum::<f64>() - objective,
        }
    }

    /// The problem with a different solver configuration.
    pub fn with_config(&self, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let mut p = self.clone();
        p.instance.config = config;
        Ok(p)
    }
}
