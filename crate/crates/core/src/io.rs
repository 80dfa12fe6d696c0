//! Instance and solution files, and CSV exports for plots and diagnostics.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bnp::{BnpSolution, NodeRecord, SolveStatus, TreeStats};
use crate::colgen::IterationLog;
use crate::error::{Error, Result};
use crate::instance::{Instance, Problem, SCHEMA_VERSION};
use crate::ode::integrate;

/// Byte offset of a 1-based line/column position.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (start + column.saturating_sub(1)).min(text.len())
}

fn parse_error(text: &str, e: &serde_json::Error) -> Error {
    let offset = if e.is_eof() {
        text.len()
    } else {
        byte_offset(text, e.line(), e.column())
    };
    Error::Parse {
        offset,
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Deserializes JSON; syntax errors carry a position, type errors a field path.
pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let inner = e.inner();
        if inner.is_data() {
            Error::Validation {
                path: e.path().to_string(),
                message: inner.to_string(),
            }
        } else {
            parse_error(text, inner)
        }
    })?;
    de.end().map_err(|e| parse_error(text, &e))?;
    Ok(value)
}

/// Parses and validates an instance.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let inst: Instance = from_json(text)?;
    inst.validate()?;
    Ok(inst)
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem> {
    Problem::new(load_instance(path)?)
}

pub fn save_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, instance)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub segment: usize,
    #[serde(default)]
    pub name: String,
    /// One decision vector per epoch.
    pub decisions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTrajectory {
    pub segment: usize,
    pub times: Vec<f64>,
    pub compartments: Vec<String>,
    pub states: Vec<Vec<f64>>,
}

/// A solved allocation that can be re-checked against its instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub schema_version: u32,
    #[serde(default)]
    pub instance: String,
    pub status: SolveStatus,
    pub plans: Vec<SegmentPlan>,
    #[serde(default)]
    pub aux: Vec<f64>,
    /// Min-form objective.
    pub objective: f64,
    pub savings: f64,
    pub bound: f64,
    pub gap: f64,
    #[serde(default)]
    pub proven: bool,
    #[serde(default)]
    pub stats: TreeStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<Vec<SegmentTrajectory>>,
}

impl SolutionFile {
    /// Builds the file from a solver result; `None` when there is no incumbent.
    pub fn from_solution(
        problem: &Problem,
        sol: &BnpSolution,
        trajectories: bool,
    ) -> Result<Option<Self>> {
        let Some(inc) = &sol.incumbent else {
            return Ok(None);
        };
        let mut file = Self::from_assignment(problem, &inc.choices, &inc.aux, trajectories)?;
        file.status = sol.status;
        file.bound = sol.bound;
        file.gap = sol.gap;
        file.proven = sol.proven;
        file.stats = sol.stats.clone();
        Ok(Some(file))
    }

    /// A file for an arbitrary feasible assignment (benchmarks, simulations).
    pub fn from_assignment(
        problem: &Problem,
        choices: &[Vec<usize>],
        aux: &[f64],
        trajectories: bool,
    ) -> Result<Self> {
        let plans = choices
            .iter()
            .enumerate()
            .map(|(i, c)| SegmentPlan {
                segment: i,
                name: problem.segment(i).name.clone(),
                decisions: c
                    .iter()
                    .enumerate()
                    .map(|(s, &d)| problem.decision(i, s, d).to_vec())
                    .collect(),
            })
            .collect::<Vec<_>>();
        let objective = problem.objective(choices, aux)?;
        let mut file = SolutionFile {
            schema_version: SCHEMA_VERSION,
            instance: problem.instance.name.clone(),
            status: SolveStatus::Optimal,
            plans,
            aux: aux.to_vec(),
            objective,
            savings: problem.savings(choices, aux)?,
            bound: objective,
            gap: 0.0,
            proven: false,
            stats: TreeStats::default(),
            trajectories: None,
        };
        if trajectories {
            file.trajectories = Some(file.simulate(problem)?);
        }
        Ok(file)
    }

    /// Decision indices of every plan; fails on decisions outside the sets.
    pub fn choices(&self, problem: &Problem) -> Result<Vec<Vec<usize>>> {
        if self.plans.len() != problem.segments() {
            return Err(Error::validation(
                "plans",
                format!(
                    "{} plans for {} segments",
                    self.plans.len(),
                    problem.segments()
                ),
            ));
        }
        self.plans
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if p.decisions.len() != problem.epochs() {
                    return Err(Error::validation(
                        format!("plans[{i}].decisions"),
                        "wrong number of epochs",
                    ));
                }
                p.decisions
                    .iter()
                    .enumerate()
                    .map(|(s, x)| problem.decision_index(i, s, x))
                    .collect()
            })
            .collect()
    }

    /// Recomputes the objective from the decisions alone and checks every row;
    /// returns the recomputed objective.
    pub fn verify(&self, problem: &Problem) -> Result<f64> {
        let choices = self.choices(problem)?;
        problem.check_assignment(&choices, &self.aux)?;
        let objective = problem.objective(&choices, &self.aux)?;
        if (objective - self.objective).abs() > 1e-6 * objective.abs().max(1.0) {
            return Err(Error::validation(
                "objective",
                format!(
                    "stated {} but the decisions give {objective}",
                    self.objective
                ),
            ));
        }
        Ok(objective)
    }

    pub fn simulate(&self, problem: &Problem) -> Result<Vec<SegmentTrajectory>> {
        self.plans
            .iter()
            .map(|p| {
                let seg = problem.segment(p.segment);
                let traj = integrate(
                    &seg.dynamics,
                    &seg.initial_state,
                    &p.decisions,
                    problem.grid(),
                )?;
                Ok(SegmentTrajectory {
                    segment: p.segment,
                    times: traj.times,
                    compartments: seg.dynamics.compartments(),
                    states: traj.states,
                })
            })
            .collect()
    }
}

pub fn load_solution(path: impl AsRef<Path>) -> Result<SolutionFile> {
    from_json(&std::fs::read_to_string(path)?)
}

pub fn save_solution(solution: &SolutionFile, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, solution)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Resource names per decision component; components without a declared
/// resource are called `x{k}`.
fn resource_names(problem: &Problem) -> Vec<(usize, String)> {
    if !problem.instance.resources.is_empty() {
        return problem
            .instance
            .resources
            .iter()
            .map(|r| {
                (
                    r.component,
                    if r.name.is_empty() {
                        format!("x{}", r.component)
                    } else {
                        r.name.clone()
                    },
                )
            })
            .collect();
    }
    let k = problem.segment(0).dynamics.control_dim();
    (0..k).map(|c| (c, format!("x{c}"))).collect()
}

/// Long-format allocation table: `segment, epoch, resource, amount`.
pub fn write_allocation_csv<W: Write>(
    problem: &Problem,
    plans: &[SegmentPlan],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["segment", "epoch", "resource", "amount"])?;
    for (component, name) in resource_names(problem) {
        for p in plans {
            for (s, x) in p.decisions.iter().enumerate() {
                w.write_record([
                    p.segment.to_string(),
                    s.to_string(),
                    name.clone(),
                    x[component].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Long-format trajectories: `segment, time, compartment, value`.
pub fn write_trajectory_csv<W: Write>(trajectories: &[SegmentTrajectory], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["segment", "time", "compartment", "value"])?;
    for t in trajectories {
        for (time, state) in t.times.iter().zip(&t.states) {
            for (name, v) in t.compartments.iter().zip(state) {
                w.write_record([
                    t.segment.to_string(),
                    time.to_string(),
                    name.clone(),
                    v.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_tree_csv<W: Write>(nodes: &[NodeRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "parent", "depth", "action", "bound", "ub", "status"])?;
    for n in nodes {
        let status = serde_json::to_value(n.status)?;
        w.write_record([
            n.id.to_string(),
            n.parent.map(|p| p.to_string()).unwrap_or_default(),
            n.depth.to_string(),
            n.action.clone(),
            n.bound.to_string(),
            n.ub.to_string(),
            status.as_str().unwrap_or_default().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_colgen_csv<W: Write>(log: &[IterationLog], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in log {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
