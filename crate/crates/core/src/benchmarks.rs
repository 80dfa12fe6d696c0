//! Practical allocation baselines and the parameter-perturbation protocol.

use std::io::Write;
use std::time::Instant;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use crate::bnp::solve_tree;
use crate::error::{Error, Result};
use crate::instance::{ObjectiveMode, Problem};
use crate::models::Model;
use crate::ode::integrate;
use crate::oracle::best_aux;
use crate::rng::{stream, Purpose};

/// Seeds averaged by the random-K content baseline.
pub const CONTENT_RANDOM_SEEDS: u64 = 100;
/// Default number of perturbation samples.
pub const DEFAULT_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub method: String,
    /// Min-form objective.
    pub objective: f64,
    /// Improvement over doing nothing, in the problem's native sense.
    pub savings: f64,
    pub seconds: f64,
    /// Decision indices per segment and epoch (first seed for randomized methods).
    pub choices: Vec<Vec<usize>>,
    pub aux: Vec<f64>,
}

impl BenchmarkReport {
    /// Decision vectors per segment and epoch.
    pub fn allocation(&self, problem: &Problem) -> Vec<Vec<Vec<f64>>> {
        self.choices
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.iter()
                    .enumerate()
                    .map(|(s, &d)| problem.decision(i, s, d).to_vec())
                    .collect()
            })
            .collect()
    }
}

/// Splits `units` proportionally to `weights`; leftover units go to the
/// largest fractional parts, ties to the lower index.
pub fn largest_remainder(units: u64, weights: &[f64]) -> Vec<u64> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || weights.is_empty() {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| units as f64 * w / total).collect();
    let mut out: Vec<u64> = quotas.iter().map(|q| (q + 1e-9).floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    let frac = |i: usize| (quotas[i] - out[i] as f64).max(0.0);
    order.sort_by(|&a, &b| {
        let (fa, fb) = (frac(a), frac(b));
        if (fa - fb).abs() <= 1e-9 {
            a.cmp(&b)
        } else {
            fb.total_cmp(&fa)
        }
    });
    for &i in order.iter().take(units.saturating_sub(assigned) as usize) {
        out[i] += 1;
    }
    out
}

/// Decision of `F_is` closest to `targets` in ℓ1 over the targeted components;
/// ties go to the lexicographically lower decision.
fn snap(problem: &Problem, i: usize, s: usize, targets: &[(usize, f64)]) -> usize {
    let set = &problem.segment(i).decisions[s];
    let dist = |x: &[f64]| targets.iter().map(|&(k, t)| (x[k] - t).abs()).sum::<f64>();
    let mut best = 0;
    for d in 1..set.len() {
        let (a, b) = (dist(&set[d]), dist(&set[best]));
        let lower = set[d]
            .iter()
            .zip(&set[best])
            .find(|(x, y)| x != y)
            .is_some_and(|(x, y)| x < y);
        if a < b - 1e-12 || ((a - b).abs() <= 1e-12 && lower) {
            best = d;
        }
    }
    best
}

/// Allocates every declared resource by `weights(resource, epoch)`.
fn allocate(
    problem: &Problem,
    weights: impl Fn(usize, usize) -> Vec<f64>,
) -> Result<Vec<Vec<usize>>> {
    let resources = &problem.instance.resources;
    if resources.is_empty() {
        return Err(Error::Config(
            "instance declares no divisible resources".into(),
        ));
    }
    let (n, epochs) = (problem.segments(), problem.epochs());
    let mut targets = vec![vec![Vec::new(); epochs]; n];
    for (r, res) in resources.iter().enumerate() {
        for s in 0..epochs {
            let units = (res.budget[s] / res.step + 1e-9).floor() as u64;
            let split = largest_remainder(units, &weights(r, s));
            for i in 0..n {
                targets[i][s].push((res.component, split[i] as f64 * res.step));
            }
        }
    }
    Ok((0..n)
        .map(|i| {
            (0..epochs)
                .map(|s| snap(problem, i, s, &targets[i][s]))
                .collect()
        })
        .collect())
}

/// Problem with facility openings fixed to `open`.
fn with_open(problem: &Problem, open: &[usize]) -> Result<Problem> {
    let mut inst = problem.instance.clone();
    let Some(fac) = inst.facility.clone() else {
        return Ok(problem.clone());
    };
    for (j, &v) in fac.open_vars.iter().enumerate() {
        let value = if open.contains(&j) { 1.0 } else { 0.0 };
        inst.aux[v].lower = value;
        inst.aux[v].upper = Some(value);
    }
    Problem::new(inst)
}

/// Completes `choices` with the cheapest auxiliary values. When no completion
/// exists, the largest allocation (latest epoch, then highest segment on ties)
/// steps down one decision until one does.
fn complete(
    problem: &Problem,
    mut choices: Vec<Vec<usize>>,
) -> Result<(Vec<Vec<usize>>, Vec<f64>)> {
    loop {
        let activity = problem.row_activity(&choices, &vec![0.0; problem.aux().len()]);
        if let Some((aux, _)) = best_aux(problem, &activity)? {
            if problem.check_assignment(&choices, &aux).is_ok() {
                return Ok((choices, aux));
            }
        }
        let mut pick: Option<(usize, usize, f64)> = None;
        for (i, c) in choices.iter().enumerate() {
            for (s, &d) in c.iter().enumerate() {
                if d == 0 {
                    continue;
                }
                let size: f64 = problem.decision(i, s, d).iter().map(|v| v.abs()).sum();
                if pick.map_or(true, |(_, _, b)| size >= b) {
                    pick = Some((i, s, size));
                }
            }
        }
        let Some((i, s, _)) = pick else {
            return Err(Error::BenchmarkInfeasible(
                "no feasible completion of the allocation".into(),
            ));
        };
        choices[i][s] -= 1;
    }
}

fn report(
    problem: &Problem,
    method: &str,
    start: Instant,
    choices: Vec<Vec<usize>>,
    aux: Vec<f64>,
) -> Result<BenchmarkReport> {
    Ok(BenchmarkReport {
        method: method.into(),
        objective: problem.objective(&choices, &aux)?,
        savings: problem.savings(&choices, &aux)?,
        seconds: start.elapsed().as_secs_f64(),
        choices,
        aux,
    })
}

/// Facilities ranked by total reachable residents, lowest id first on ties.
pub fn top_k_facilities(problem: &Problem) -> Option<Vec<usize>> {
    let fac = problem.instance.facility.as_ref()?;
    let reach = |j: usize| fac.coverage.iter().map(|row| row[j]).sum::<f64>();
    let mut order: Vec<usize> = (0..fac.facilities()).collect();
    order.sort_by(|&a, &b| reach(b).total_cmp(&reach(a)).then(a.cmp(&b)));
    order.truncate(fac.open);
    order.sort_unstable();
    Some(order)
}

/// Segments served by at least one open facility (all segments otherwise).
fn served(problem: &Problem, open: Option<&[usize]>) -> Vec<bool> {
    match (&problem.instance.facility, open) {
        (Some(fac), Some(open)) => fac
            .coverage
            .iter()
            .map(|row| open.iter().any(|&j| row[j] > 0.0))
            .collect(),
        _ => vec![true; problem.segments()],
    }
}

/// Keeps the `limit` largest weights (lowest index on ties), zeroing the rest.
fn keep_largest(weights: &[f64], limit: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut out = vec![0.0; weights.len()];
    for &i in order.iter().take(limit) {
        out[i] = weights[i];
    }
    out
}

fn split_run(problem: &Problem, method: &str, base: Vec<f64>) -> Result<BenchmarkReport> {
    let start = Instant::now();
    let open = top_k_facilities(problem);
    let fixed = match &open {
        Some(o) => with_open(problem, o)?,
        None => problem.clone(),
    };
    let reach = served(problem, open.as_deref());
    let mut w: Vec<f64> = base
        .iter()
        .zip(&reach)
        .map(|(w, ok)| if *ok { *w } else { 0.0 })
        .collect();
    if let Some(sp) = &problem.instance.sparsity {
        w = keep_largest(&w, sp.limit);
    }
    let choices = allocate(&fixed, |_, _| w.clone())?;
    let (choices, aux) = complete(&fixed, choices)?;
    report(problem, method, start, choices, aux)
}

/// Equal split per epoch. Content instances instead promote `K` random
/// products per epoch; the report averages over 100 seeds.
pub fn uniform_allocation(problem: &Problem) -> Result<BenchmarkReport> {
    let Some(sp) = problem.instance.sparsity.clone() else {
        let method = if problem.instance.facility.is_some() {
            "top-k uniform"
        } else {
            "uniform"
        };
        return split_run(problem, method, vec![1.0; problem.segments()]);
    };
    let start = Instant::now();
    let n = problem.segments();
    let seed = problem.instance.config.seed;
    let runs = (0..CONTENT_RANDOM_SEEDS)
        .into_par_iter()
        .map(|k| {
            let picks: Vec<Vec<f64>> = (0..problem.epochs())
                .map(|s| {
                    let mut rng = stream(seed, Purpose::ContentUniform, k * 1024 + s as u64);
                    let mut w = vec![0.0; n];
                    for i in sample(&mut rng, n, sp.limit.min(n)) {
                        w[i] = 1.0;
                    }
                    w
                })
                .collect();
            let choices = allocate(problem, |_, s| picks[s].clone())?;
            let (choices, aux) = complete(problem, choices)?;
            Ok((
                problem.objective(&choices, &aux)?,
                problem.savings(&choices, &aux)?,
                choices,
                aux,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let count = runs.len() as f64;
    let objective = runs.iter().map(|r| r.0).sum::<f64>() / count;
    let savings = runs.iter().map(|r| r.1).sum::<f64>() / count;
    let (_, _, choices, aux) = runs.into_iter().next().expect("at least one seed");
    Ok(BenchmarkReport {
        method: "uniform".into(),
        objective,
        savings,
        seconds: start.elapsed().as_secs_f64(),
        choices,
        aux,
    })
}

/// What a segment loses under the do-nothing trajectory. For adoption models
/// the min-form cost is a negated gain, so the loss is the adoption forgone.
fn baseline_loss(problem: &Problem, i: usize) -> Result<f64> {
    let seg = problem.segment(i);
    match &seg.dynamics {
        Model::Bass(m) => {
            let idle = vec![vec![0.0; seg.dynamics.control_dim()]; problem.epochs()];
            let traj = integrate(&seg.dynamics, &seg.initial_state, &idle, problem.grid())?;
            Ok(m.adoption_weight * traj.terminal[0])
        }
        _ => Ok(problem.baseline_cost(i).abs()),
    }
}

/// Constant shares proportional to each segment's do-nothing loss.
pub fn cost_based_allocation(problem: &Problem) -> Result<BenchmarkReport> {
    let costs = (0..problem.segments())
        .map(|i| baseline_loss(problem, i))
        .collect::<Result<Vec<f64>>>()?;
    if costs.iter().sum::<f64>() <= 0.0 {
        let mut r = uniform_allocation(problem)?;
        r.method = "cost-based".into();
        return Ok(r);
    }
    let method = if problem.instance.facility.is_some() {
        "top-k cost-based"
    } else {
        "cost-based"
    };
    split_run(problem, method, costs)
}

/// Branch-and-price on the full problem.
pub fn optimized(problem: &Problem) -> Result<BenchmarkReport> {
    let start = Instant::now();
    let sol = solve_tree(problem)?;
    let inc = sol.incumbent.ok_or_else(|| {
        Error::BenchmarkInfeasible("branch-and-price found no feasible allocation".into())
    })?;
    report(problem, "optimized", start, inc.choices, inc.aux)
}

/// Top-K facilities with uniform (`optimize = false`) or optimized downstream
/// allocation.
pub fn top_k(problem: &Problem, optimize: bool) -> Result<BenchmarkReport> {
    let open = top_k_facilities(problem)
        .ok_or_else(|| Error::Config("top-K needs a facility layout".into()))?;
    if !optimize {
        return split_run(problem, "top-k uniform", vec![1.0; problem.segments()]);
    }
    let start = Instant::now();
    let fixed = with_open(problem, &open)?;
    let sol = solve_tree(&fixed)?;
    let inc = sol.incumbent.ok_or_else(|| {
        Error::BenchmarkInfeasible("no allocation serves the top-K facilities".into())
    })?;
    report(problem, "top-k optimized", start, inc.choices, inc.aux)
}

/// Runs the named methods: `uniform`, `cost`, `topk`, `optimized`.
pub fn run_methods(problem: &Problem, methods: &[&str]) -> Result<Vec<BenchmarkReport>> {
    let mut out = Vec::new();
    for m in methods {
        match *m {
            "uniform" => out.push(uniform_allocation(problem)?),
            "cost" | "cost-based" => out.push(cost_based_allocation(problem)?),
            "topk" | "top-k" => {
                if problem.instance.facility.is_some() {
                    // plain uniform already runs on the top-K facilities
                    if !methods.contains(&"uniform") {
                        out.push(top_k(problem, false)?);
                    }
                    out.push(top_k(problem, true)?);
                }
            }
            "optimized" | "bnp" => out.push(optimized(problem)?),
            other => return Err(Error::Config(format!("unknown benchmark method `{other}`"))),
        }
    }
    Ok(out)
}

pub fn write_report_csv<W: Write>(reports: &[BenchmarkReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "seconds", "objective", "savings"])?;
    for r in reports {
        w.write_record([
            r.method.clone(),
            format!("{:.3}", r.seconds),
            format!("{}", r.objective),
            format!("{}", r.savings),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessReport {
    pub magnitude: f64,
    pub nominal: f64,
    /// Savings of every sample that integrated successfully, in sample order.
    pub values: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Samples excluded because the perturbed dynamics diverged.
    pub diverged: usize,
}

/// Re-evaluates a fixed allocation under multiplicatively perturbed model
/// parameters; savings are measured against the perturbed do-nothing run.
pub fn perturb_and_evaluate(
    problem: &Problem,
    choices: &[Vec<usize>],
    aux: &[f64],
    magnitude: f64,
    samples: usize,
    seed: u64,
) -> Result<RobustnessReport> {
    if !(0.0..1.0).contains(&magnitude) {
        return Err(Error::Config(format!(
            "perturbation magnitude {magnitude} outside [0, 1)"
        )));
    }
    let nominal = problem.savings(choices, aux)?;
    let outcomes: Vec<Option<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, Purpose::Perturbation, k);
            let mut inst = problem.instance.clone();
            for seg in &mut inst.segments {
                seg.dynamics = seg.dynamics.perturbed(&mut rng, magnitude);
            }
            // savings are relative, so the objective mode does not matter here
            inst.objective = ObjectiveMode::Cost;
            match Problem::new(inst).and_then(|p| p.savings(choices, aux)) {
                Ok(v) => Ok(Some(v)),
                Err(Error::Divergence { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let diverged = outcomes.len() - values.len();
    let (mean, min, max) = if values.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            values.iter().sum::<f64>() / values.len() as f64,
            values.iter().copied().fold(f64::INFINITY, f64::min),
            values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    Ok(RobustnessReport {
        magnitude,
        nominal,
        values,
        mean,
        min,
        max,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn largest_remainder_examples() {
        assert_eq!(largest_remainder(10, &[1.0; 5]), vec![2; 5]);
        assert_eq!(largest_remainder(7, &[1.0; 3]), vec![3, 2, 2]);
        assert_eq!(largest_remainder(5, &[30.0, 10.0, 10.0]), vec![3, 1, 1]);
        assert_eq!(
            largest_remainder(4, &[0.0, 1.0, 0.0, 1.0]),
            vec![0, 2, 0, 2]
        );
        assert_eq!(largest_remainder(3, &[0.0, 0.0]), vec![0, 0]);
    }

    #[test]
    fn equal_costs_make_cost_based_equal_uniform() {
        let mut p = fixtures::vaccine_desk();
        let seg = p.instance.segments[0].clone();
        for s in &mut p.instance.segments {
            *s = seg.clone();
        }
        let p = Problem::new(p.instance).unwrap();
        assert_eq!(
            uniform_allocation(&p).unwrap().choices,
            cost_based_allocation(&p).unwrap().choices
        );
    }

    #[test]
    fn uniform_vaccine_split_follows_largest_remainder() {
        let p = fixtures::vaccine_desk();
        let r = uniform_allocation(&p).unwrap();
        // 8 pallets over 6 regions: two each for the first two, one for the rest
        for s in 0..p.epochs() {
            let col: Vec<usize> = r.choices.iter().map(|c| c[s]).collect();
            assert_eq!(col, vec![2, 2, 1, 1, 1, 1]);
        }
        assert!(p.check_assignment(&r.choices, &r.aux).is_ok());
    }

    #[test]
    fn baselines_pass_the_validator() {
        for (name, p) in fixtures::desks() {
            for r in [
                uniform_allocation(&p).unwrap(),
                cost_based_allocation(&p).unwrap(),
            ] {
                assert!(
                    p.check_assignment(&r.choices, &r.aux).is_ok(),
                    "{name} {}",
                    r.method
                );
            }
        }
    }

    #[test]
    fn top_k_ranks_by_coverage() {
        let p = fixtures::facility_desk();
        assert_eq!(top_k_facilities(&p).unwrap(), vec![0, 1]);
        let mut inst = p.instance.clone();
        let fac = inst.facility.as_mut().unwrap();
        fac.open = fac.facilities();
        let all = Problem::new(inst).unwrap();
        assert_eq!(top_k_facilities(&all).unwrap(), vec![0, 1, 2, 3]);
        let mut inst = p.instance.clone();
        let fac = inst.facility.as_mut().unwrap();
        fac.open = 1;
        fac.coverage[3][3] = 5_000.0;
        assert_eq!(
            top_k_facilities(&Problem::new(inst).unwrap()).unwrap(),
            vec![3]
        );
    }

    #[test]
    fn zero_magnitude_reproduces_nominal() {
        let p = fixtures::vaccine_desk();
        let r = cost_based_allocation(&p).unwrap();
        let rob = perturb_and_evaluate(&p, &r.choices, &r.aux, 0.0, 5, 1).unwrap();
        assert_eq!(rob.values.len(), 5);
        assert!(rob.values.iter().all(|v| (v - r.savings).abs() < 1e-9));
    }

    #[test]
    fn perturbation_is_seeded() {
        let p = fixtures::vaccine_desk();
        let r = uniform_allocation(&p).unwrap();
        let a = perturb_and_evaluate(&p, &r.choices, &r.aux, 0.2, 8, 11).unwrap();
        let b = perturb_and_evaluate(&p, &r.choices, &r.aux, 0.2, 8, 11).unwrap();
        assert_eq!(a, b);
        assert!(perturb_and_evaluate(&p, &r.choices, &r.aux, 1.0, 8, 11).is_err());
    }
}
