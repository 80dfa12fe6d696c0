//! Branching restrictions. Decision restrictions shrink the feasible sets
//! `F_is` seen by pricing; auxiliary restrictions tighten variable bounds.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::instance::Problem;

/// Comparison tolerance for restriction values.
pub const RESTRICTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Le,
    Ge,
    Lt,
    Gt,
    Eq,
}

impl Relation {
    pub fn holds(self, lhs: f64, value: f64) -> bool {
        match self {
            Relation::Le => lhs <= value + RESTRICTION_TOL,
            Relation::Ge => lhs >= value - RESTRICTION_TOL,
            Relation::Lt => lhs < value - RESTRICTION_TOL,
            Relation::Gt => lhs > value + RESTRICTION_TOL,
            Relation::Eq => (lhs - value).abs() <= RESTRICTION_TOL,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Lt => "<",
            Relation::Gt => ">",
            Relation::Eq => "=",
        }
    }
}

/// `x[segment][epoch][component] (relation) value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRestriction {
    pub segment: usize,
    pub epoch: usize,
    pub component: usize,
    pub relation: Relation,
    pub value: f64,
}

/// `y[var] (relation) value`; only `Le` and `Ge` are meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxRestriction {
    pub var: usize,
    pub relation: Relation,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Restrictions {
    pub decisions: Vec<DecisionRestriction>,
    pub aux: Vec<AuxRestriction>,
}

/// Per-epoch lists of allowed indices into `F_is`.
pub type Filtered = Vec<Vec<usize>>;

impl Restrictions {
    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty() && self.aux.is_empty()
    }

    pub fn with_decision(&self, r: DecisionRestriction) -> Self {
        let mut out = self.clone();
        out.decisions.push(r);
        out
    }

    pub fn with_aux(&self, r: AuxRestriction) -> Self {
        let mut out = self.clone();
        out.aux.push(r);
        out
    }

    pub fn allows(&self, segment: usize, epoch: usize, x: &[f64]) -> bool {
        self.decisions
            .iter()
            .filter(|r| r.segment == segment && r.epoch == epoch)
            .all(|r| r.relation.holds(x[r.component], r.value))
    }

    /// Allowed decisions of `segment` in every epoch.
    pub fn filtered(&self, problem: &Problem, segment: usize) -> Filtered {
        let seg = problem.segment(segment);
        seg.decisions
            .iter()
            .enumerate()
            .map(|(s, set)| {
                (0..set.len())
                    .filter(|&d| self.allows(segment, s, &set[d]))
                    .collect()
            })
            .collect()
    }

    pub fn allows_plan(&self, problem: &Problem, segment: usize, choices: &[usize]) -> bool {
        choices
            .iter()
            .enumerate()
            .all(|(s, &d)| self.allows(segment, s, problem.decision(segment, s, d)))
    }

    /// Bounds of every auxiliary variable after applying the restrictions.
    pub fn aux_bounds(&self, problem: &Problem) -> Vec<(f64, f64)> {
        let mut b: Vec<(f64, f64)> = problem
            .aux()
            .iter()
            .map(|v| (v.lower, v.upper_bound()))
            .collect();
        for r in &self.aux {
            let (lo, hi) = &mut b[r.var];
            match r.relation {
                Relation::Le | Relation::Lt => *hi = hi.min(r.value),
                Relation::Ge | Relation::Gt => *lo = lo.max(r.value),
                Relation::Eq => {
                    *lo = lo.max(r.value);
                    *hi = hi.min(r.value);
                }
            }
        }
        b
    }
}

/// Stable key for a filtered decision structure, used to cache pricing spaces.
pub fn fingerprint(filtered: &Filtered) -> u64 {
    let mut h = DefaultHasher::new();
    filtered.hash(&mut h);
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations_respect_tolerance() {
        assert!(Relation::Le.holds(2.0 + 1e-12, 2.0));
        assert!(!Relation::Lt.holds(2.0, 2.0));
        assert!(Relation::Lt.holds(1.9, 2.0));
        assert!(Relation::Eq.holds(6.0, 6.0 + 1e-12));
        assert!(!Relation::Gt.holds(6.0, 6.0));
    }

    #[test]
    fn tri_partition_covers_each_value_once() {
        let values = [0.0, 2.0, 4.0, 6.0, 8.0];
        for v in values {
            let hits = [Relation::Lt, Relation::Eq, Relation::Gt]
                .iter()
                .filter(|r| r.holds(v, 6.0))
                .count();
            assert_eq!(hits, 1);
        }
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = vec![vec![0, 1], vec![2]];
        let b = vec![vec![0, 1], vec![1]];
        assert_eq!(fingerprint(&a), fingerprint(&a.clone()));
        assert_ne!(fingerprint(&a), fingerprint(&b));
    }
}
