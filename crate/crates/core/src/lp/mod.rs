//! Dense bounded-variable revised simplex.
//!
//! Rows are `a·x ≥ b`, `a·x = b` or `a·x ≤ b`; the last kind is negated
//! internally and its dual is reported for the original orientation, so a
//! `≤` row has a non-positive dual in min form.

mod dump;
mod mip;

use serde::{Deserialize, Serialize};

pub use dump::write_lp;
pub use mip::{solve_integer_restricted, MipResult, DEFAULT_NODE_CAP};

use crate::error::{Error, Result};
use crate::instance::Sense;

pub const FEASIBILITY_TOL: f64 = 1e-8;
pub const OPTIMALITY_TOL: f64 = 1e-7;
pub const INTEGRALITY_TOL: f64 = 1e-6;

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpColumn {
    pub name: String,
    pub cost: f64,
    pub lower: f64,
    pub upper: f64,
    /// `(row, coefficient)` pairs.
    pub entries: Vec<(usize, f64)>,
}

impl LpColumn {
    pub fn new(cost: f64, lower: f64, upper: f64, entries: Vec<(usize, f64)>) -> Self {
        LpColumn {
            name: String::new(),
            cost,
            lower,
            upper,
            entries,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// `min c·x` subject to rows and column bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    pub rows: Vec<LpRow>,
    pub columns: Vec<LpColumn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// A variable of the internal standard form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    Column(usize),
    Slack(usize),
    Artificial(usize),
}

/// Final basis of a solve, reusable as a warm start after columns are appended.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Basis {
    pub basic: Vec<Var>,
    /// Nonbasic variables resting at their upper bound.
    pub at_upper: Vec<Var>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals in the orientation of the original rows.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub basis: Basis,
    pub iterations: usize,
    pub warm_started: bool,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_row(&mut self, name: impl Into<String>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(LpRow {
            name: name.into(),
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn add_column(&mut self, column: LpColumn) -> Result<usize> {
        if let Some((r, _)) = column.entries.iter().find(|(r, _)| *r >= self.rows.len()) {
            return Err(Error::Structure(format!(
                "column references row {r} but the problem has {} rows",
                self.rows.len()
            )));
        }
        self.columns.push(column);
        Ok(self.columns.len() - 1)
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.columns[j].lower = lower;
        self.columns[j].upper = upper;
    }

    fn check(&self) -> Result<()> {
        for (j, c) in self.columns.iter().enumerate() {
            if !c.cost.is_finite() || c.entries.iter().any(|(_, v)| !v.is_finite()) {
                return Err(Error::Lp(format!(
                    "column {j} has a non-finite coefficient"
                )));
            }
            if c.lower.is_nan()
                || c.upper.is_nan()
                || c.lower == f64::INFINITY
                || c.upper == f64::NEG_INFINITY
            {
                return Err(Error::Lp(format!("column {j} has invalid bounds")));
            }
            if let Some((r, _)) = c.entries.iter().find(|(r, _)| *r >= self.rows.len()) {
                return Err(Error::Structure(format!(
                    "column {j} references missing row {r}"
                )));
            }
        }
        if let Some(r) = self.rows.iter().position(|r| !r.rhs.is_finite()) {
            return Err(Error::Lp(format!(
                "row {r} has a non-finite right-hand side"
            )));
        }
        Ok(())
    }

    /// Solves the LP, trying `warm` first when given.
    pub fn solve(&self, warm: Option<&Basis>) -> Result<LpSolution> {
        self.check()?;
        let mut s = Simplex::new(self);
        if s.bounds_conflict() {
            return Ok(s.infeasible());
        }
        let mut warm_started = false;
        if let Some(b) = warm {
            warm_started = s.load_basis(b);
        }
        if !warm_started {
            s.cold_start();
            let status = s.optimize(Phase::One)?;
            debug_assert_eq!(status, LpStatus::Optimal);
            let infeas: f64 = (0..s.m).map(|r| s.x[s.art(r)]).sum();
            let scale = 1.0 + s.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if infeas > FEASIBILITY_TOL * scale {
                let mut sol = s.infeasible();
                sol.iterations = s.iterations;
                return Ok(sol);
            }
        }
        s.fix_artificials();
        let status = s.optimize(Phase::Two)?;
        let mut sol = s.solution(status);
        sol.warm_started = warm_started;
        Ok(sol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

struct Simplex<'a> {
    p: &'a LpProblem,
    m: usize,
    n: usize,
    /// Dense structural columns after row canonicalization, column-major.
    a: Vec<f64>,
    /// `+1` or `-1` per row.
    sign: Vec<f64>,
    b: Vec<f64>,
    /// Artificial column orientation.
    art_sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    head: Vec<usize>,
    /// Basis position of each variable, `usize::MAX` when nonbasic.
    pos: Vec<usize>,
    binv: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
}

impl<'a> Simplex<'a> {
    fn new(p: &'a LpProblem) -> Self {
        let m = p.rows.len();
        let n = p.columns.len();
        let sign: Vec<f64> = p
            .rows
            .iter()
            .map(|r| if r.sense == Sense::Le { -1.0 } else { 1.0 })
            .collect();
        let mut a = vec![0.0; m * n];
        for (j, c) in p.columns.iter().enumerate() {
            for &(r, v) in &c.entries {
                a[j * m + r] += sign[r] * v;
            }
        }
        let b = p.rows.iter().zip(&sign).map(|(r, s)| s * r.rhs).collect();
        let total = n + 2 * m;
        let mut lower = vec![0.0; total];
        let mut upper = vec![0.0; total];
        for (j, c) in p.columns.iter().enumerate() {
            lower[j] = c.lower;
            upper[j] = c.upper;
        }
        for (r, row) in p.rows.iter().enumerate() {
            upper[n + r] = if row.sense == Sense::Eq {
                0.0
            } else {
                f64::INFINITY
            };
        }
        Simplex {
            p,
            m,
            n,
            a,
            sign,
            b,
            art_sign: vec![1.0; m],
            lower,
            upper,
            cost: vec![0.0; total],
            x: vec![0.0; total],
            head: Vec::new(),
            pos: vec![usize::MAX; total],
            binv: vec![0.0; m * m],
            since_refactor: 0,
            iterations: 0,
        }
    }

    fn total(&self) -> usize {
        self.n + 2 * self.m
    }

    fn slack(&self, r: usize) -> usize {
        self.n + r
    }

    fn art(&self, r: usize) -> usize {
        self.n + self.m + r
    }

    fn var_of(&self, j: usize) -> Var {
        if j < self.n {
            Var::Column(j)
        } else if j < self.n + self.m {
            Var::Slack(j - self.n)
        } else {
            Var::Artificial(j - self.n - self.m)
        }
    }

    fn index_of(&self, v: Var) -> Option<usize> {
        match v {
            Var::Column(j) if j < self.n => Some(j),
            Var::Slack(r) if r < self.m => Some(self.slack(r)),
            Var::Artificial(r) if r < self.m => Some(self.art(r)),
            _ => None,
        }
    }

    fn bounds_conflict(&self) -> bool {
        (0..self.n).any(|j| self.lower[j] > self.upper[j] + FEASIBILITY_TOL)
    }

    /// Value of a nonbasic variable at its preferred bound.
    fn home(&self, j: usize) -> f64 {
        if self.lower[j].is_finite() {
            self.lower[j]
        } else if self.upper[j].is_finite() {
            self.upper[j]
        } else {
            0.0
        }
    }

    /// `y·a_j` for the current row prices `y`.
    fn dot_col(&self, y: &[f64], j: usize) -> f64 {
        if j < self.n {
            let col = &self.a[j * self.m..(j + 1) * self.m];
            col.iter().zip(y).map(|(a, y)| a * y).sum()
        } else if j < self.n + self.m {
            -y[j - self.n]
        } else {
            let r = j - self.n - self.m;
            self.art_sign[r] * y[r]
        }
    }

    /// `B⁻¹ a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        if j < self.n {
            let col = &self.a[j * m..(j + 1) * m];
            for (r, &v) in col.iter().enumerate() {
                if v != 0.0 {
                    for i in 0..m {
                        w[i] += self.binv[i * m + r] * v;
                    }
                }
            }
        } else {
            let (r, s) = if j < self.n + m {
                (j - self.n, -1.0)
            } else {
                let r = j - self.n - m;
                (r, self.art_sign[r])
            };
            for i in 0..m {
                w[i] = self.binv[i * m + r] * s;
            }
        }
        w
    }

    fn column_dense(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        if j < self.n {
            self.a[j * m..(j + 1) * m].to_vec()
        } else {
            let mut c = vec![0.0; m];
            if j < self.n + m {
                c[j - self.n] = -1.0;
            } else {
                let r = j - self.n - m;
                c[r] = self.art_sign[r];
            }
            c
        }
    }

    /// Inverts the basis matrix by Gauss-Jordan elimination with partial pivoting.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut mat = vec![0.0; m * m];
        for (k, &j) in self.head.iter().enumerate() {
            let c = self.column_dense(j);
            for r in 0..m {
                mat[r * m + k] = c[r];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&a, &b| mat[a * m + col].abs().total_cmp(&mat[b * m + col].abs()))
                .unwrap();
            if mat[piv * m + col].abs() < 1e-11 {
                return false;
            }
            if piv != col {
                for k in 0..m {
                    mat.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let d = mat[col * m + col];
            for k in 0..m {
                mat[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for r in 0..m {
                if r != col {
                    let f = mat[r * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            mat[r * m + k] -= f * mat[col * m + k];
                            inv[r * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        // rows of `inv` are indexed by basis position because column k of B is head[k]
        self.binv = inv;
        self.since_refactor = 0;
        true
    }

    fn recompute_basic(&mut self) {
        let m = self.m;
        let mut rhs = self.b.clone();
        for j in 0..self.total() {
            if self.pos[j] == usize::MAX && self.x[j] != 0.0 {
                let c = self.column_dense(j);
                for r in 0..m {
                    rhs[r] -= c[r] * self.x[j];
                }
            }
        }
        for i in 0..m {
            let v: f64 = (0..m).map(|r| self.binv[i * m + r] * rhs[r]).sum();
            self.x[self.head[i]] = v;
        }
    }

    fn set_basis(&mut self, head: Vec<usize>) {
        self.pos.iter_mut().for_each(|p| *p = usize::MAX);
        for (i, &j) in head.iter().enumerate() {
            self.pos[j] = i;
        }
        self.head = head;
    }

    fn cold_start(&mut self) {
        let (n, m) = (self.n, self.m);
        for j in 0..self.total() {
            let h = self.home(j);
            self.x[j] = h;
        }
        for r in 0..m {
            let a = self.art(r);
            self.x[a] = 0.0;
            let sl = self.slack(r);
            self.x[sl] = 0.0;
        }
        let mut res = self.b.clone();
        for j in 0..n {
            if self.x[j] != 0.0 {
                for r in 0..m {
                    res[r] -= self.a[j * m + r] * self.x[j];
                }
            }
        }
        let mut head = Vec::with_capacity(m);
        for r in 0..m {
            let ineq = self.p.rows[r].sense != Sense::Eq;
            if ineq && res[r] <= 0.0 {
                // satisfied inequality: the surplus slack starts basic
                head.push(self.slack(r));
                let sl = self.slack(r);
                self.x[sl] = -res[r];
                let a = self.art(r);
                self.upper[a] = 0.0;
            } else {
                self.art_sign[r] = if res[r] >= 0.0 { 1.0 } else { -1.0 };
                let a = self.art(r);
                head.push(a);
                self.upper[a] = f64::INFINITY;
                self.x[a] = res[r].abs();
            }
        }
        self.set_basis(head);
        let ok = self.refactor();
        debug_assert!(ok);
    }

    fn load_basis(&mut self, basis: &Basis) -> bool {
        if basis.basic.len() != self.m {
            return false;
        }
        let mut head = Vec::with_capacity(self.m);
        for v in &basis.basic {
            match self.index_of(*v) {
                Some(j) if !head.contains(&j) => head.push(j),
                _ => return false,
            }
        }
        for r in 0..self.m {
            let a = self.art(r);
            self.upper[a] = 0.0;
        }
        for j in 0..self.total() {
            let h = self.home(j);
            self.x[j] = h;
        }
        for v in &basis.at_upper {
            if let Some(j) = self.index_of(*v) {
                if self.upper[j].is_finite() {
                    self.x[j] = self.upper[j];
                }
            }
        }
        self.set_basis(head);
        if !self.refactor() {
            return false;
        }
        self.recompute_basic();
        self.head.iter().all(|&j| {
            self.x[j] >= self.lower[j] - FEASIBILITY_TOL
                && self.x[j] <= self.upper[j] + FEASIBILITY_TOL
        })
    }

    fn fix_artificials(&mut self) {
        for r in 0..self.m {
            let a = self.art(r);
            self.upper[a] = 0.0;
            if self.pos[a] == usize::MAX {
                self.x[a] = 0.0;
            }
        }
    }

    fn set_costs(&mut self, phase: Phase) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        match phase {
            Phase::One => {
                for r in 0..self.m {
                    let a = self.art(r);
                    self.cost[a] = 1.0;
                }
            }
            Phase::Two => {
                for (j, c) in self.p.columns.iter().enumerate() {
                    self.cost[j] = c.cost;
                }
            }
        }
    }

    fn prices(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &j) in self.head.iter().enumerate() {
            let c = self.cost[j];
            if c != 0.0 {
                for r in 0..m {
                    y[r] += c * self.binv[i * m + r];
                }
            }
        }
        y
    }

    /// Entering variable and its direction (`+1` increase, `-1` decrease).
    fn choose_entering(&self, y: &[f64], bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.total() {
            if self.pos[j] != usize::MAX || self.upper[j] - self.lower[j] <= 0.0 {
                continue;
            }
            let d = self.cost[j] - self.dot_col(y, j);
            let tol = OPTIMALITY_TOL * (1.0 + self.cost[j].abs());
            let can_up = self.x[j] < self.upper[j];
            let can_down = self.x[j] > self.lower[j];
            let dir = if d < -tol && can_up {
                1.0
            } else if d > tol && can_down {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            let score = d.abs();
            if best.map_or(true, |(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn optimize(&mut self, phase: Phase) -> Result<LpStatus> {
        self.set_costs(phase);
        let limit = 50_000 + 200 * (self.n + self.m);
        let mut degenerate = 0usize;
        loop {
            if self.since_refactor >= REFACTOR_EVERY {
                if !self.refactor() {
                    return Err(Error::Lp("singular basis".into()));
                }
                self.recompute_basic();
            }
            let y = self.prices();
            let bland = degenerate >= DEGENERATE_STREAK;
            let Some((q, dir)) = self.choose_entering(&y, bland) else {
                // confirm optimality on a fresh factorization
                if self.since_refactor > 0 {
                    if !self.refactor() {
                        return Err(Error::Lp("singular basis".into()));
                    }
                    self.recompute_basic();
                    let y = self.prices();
                    if self.choose_entering(&y, bland).is_some() {
                        continue;
                    }
                }
                return Ok(LpStatus::Optimal);
            };
            self.iterations += 1;
            if self.iterations > limit {
                return Err(Error::Lp("iteration limit reached".into()));
            }
            let w = self.ftran(q);
            match self.ratio_test(q, dir, &w, bland) {
                Step::Unbounded => return Ok(LpStatus::Unbounded),
                Step::Flip(t) => {
                    self.move_basic(&w, dir * t);
                    self.x[q] = if dir > 0.0 {
                        self.upper[q]
                    } else {
                        self.lower[q]
                    };
                    degenerate = if t <= 1e-12 { degenerate + 1 } else { 0 };
                }
                Step::Pivot { row, t, to_upper } => {
                    self.move_basic(&w, dir * t);
                    self.x[q] += dir * t;
                    let leaving = self.head[row];
                    self.x[leaving] = if to_upper {
                        self.upper[leaving]
                    } else {
                        self.lower[leaving]
                    };
                    self.pivot(row, q, &w);
                    degenerate = if t <= 1e-12 { degenerate + 1 } else { 0 };
                }
            }
        }
    }

    fn move_basic(&mut self, w: &[f64], delta: f64) {
        if delta == 0.0 {
            return;
        }
        for (i, &j) in self.head.iter().enumerate() {
            self.x[j] -= delta * w[i];
        }
    }

    fn ratio_test(&self, q: usize, dir: f64, w: &[f64], bland: bool) -> Step {
        let range = self.upper[q] - self.lower[q];
        // rate of change of each basic variable per unit step
        let rate = |i: usize| -dir * w[i];
        let limit = |i: usize, relax: f64| -> Option<(f64, bool)> {
            let j = self.head[i];
            let r = rate(i);
            if r < -PIVOT_TOL && self.lower[j].is_finite() {
                Some(((self.x[j] - self.lower[j] + relax) / -r, false))
            } else if r > PIVOT_TOL && self.upper[j].is_finite() {
                Some(((self.upper[j] - self.x[j] + relax) / r, true))
            } else {
                None
            }
        };
        let mut choice: Option<(usize, f64, bool)> = None;
        if bland {
            for i in 0..self.m {
                if let Some((t, up)) = limit(i, 0.0) {
                    let t = t.max(0.0);
                    let better = match choice {
                        None => true,
                        Some((ci, ct, _)) => {
                            t < ct - 1e-12 || (t <= ct + 1e-12 && self.head[i] < self.head[ci])
                        }
                    };
                    if better {
                        choice = Some((i, t, up));
                    }
                }
            }
        } else {
            // Harris: largest pivot among rows within the relaxed step
            let mut t_max = f64::INFINITY;
            for i in 0..self.m {
                if let Some((t, _)) = limit(i, FEASIBILITY_TOL) {
                    t_max = t_max.min(t);
                }
            }
            if t_max.is_finite() {
                let mut best_pivot = 0.0;
                for i in 0..self.m {
                    if let Some((t, up)) = limit(i, 0.0) {
                        if t <= t_max && w[i].abs() > best_pivot {
                            best_pivot = w[i].abs();
                            choice = Some((i, t.max(0.0), up));
                        }
                    }
                }
            }
        }
        match choice {
            Some((_, t, _)) if range.is_finite() && range <= t => Step::Flip(range),
            Some((row, t, to_upper)) => Step::Pivot { row, t, to_upper },
            None if range.is_finite() => Step::Flip(range),
            None => Step::Unbounded,
        }
    }

    fn pivot(&mut self, row: usize, q: usize, w: &[f64]) {
        let m = self.m;
        let leaving = self.head[row];
        let piv = w[row];
        for k in 0..m {
            self.binv[row * m + k] /= piv;
        }
        for i in 0..m {
            if i != row && w[i] != 0.0 {
                let f = w[i];
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[row * m + k];
                }
            }
        }
        self.pos[leaving] = usize::MAX;
        self.pos[q] = row;
        self.head[row] = q;
        self.since_refactor += 1;
    }

    fn infeasible(&self) -> LpSolution {
        LpSolution {
            status: LpStatus::Infeasible,
            x: vec![0.0; self.n],
            objective: f64::INFINITY,
            duals: vec![0.0; self.m],
            reduced_costs: vec![0.0; self.n],
            basis: Basis::default(),
            iterations: self.iterations,
            warm_started: false,
        }
    }

    fn solution(&self, status: LpStatus) -> LpSolution {
        let y = self.prices();
        let x: Vec<f64> = (0..self.n)
            .map(|j| self.x[j].clamp(self.lower[j], self.upper[j]))
            .collect();
        let objective = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => x.iter().zip(&self.p.columns).map(|(v, c)| v * c.cost).sum(),
        };
        let reduced_costs = (0..self.n)
            .map(|j| self.cost[j] - self.dot_col(&y, j))
            .collect();
        let duals = y.iter().zip(&self.sign).map(|(y, s)| y * s).collect();
        let basis = Basis {
            basic: self.head.iter().map(|&j| self.var_of(j)).collect(),
            at_upper: (0..self.total())
                .filter(|&j| {
                    self.pos[j] == usize::MAX
                        && self.upper[j].is_finite()
                        && self.upper[j] > self.lower[j]
                        && self.x[j] == self.upper[j]
                })
                .map(|j| self.var_of(j))
                .collect(),
        };
        LpSolution {
            status,
            x,
            objective,
            duals,
            reduced_costs,
            basis,
            iterations: self.iterations,
            warm_started: false,
        }
    }
}

enum Step {
    Unbounded,
    Flip(f64),
    Pivot { row: usize, t: f64, to_upper: bool },
}

#[cfg(test)]
mod tests;
