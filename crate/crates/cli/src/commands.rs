use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use contagion_bnp::benchmarks::{self, perturb_and_evaluate};
use contagion_bnp::bnp::{solve_tree, SolveStatus};
use contagion_bnp::colgen::Master;
use contagion_bnp::instance::{Branching, Problem};
use contagion_bnp::io::{self, SolutionFile};
use contagion_bnp::lp::write_lp;
use contagion_bnp::oracle::best_aux;
use contagion_bnp::pricing::{self, build_space, ClusterStat};
use contagion_bnp::restrictions::Restrictions;
use contagion_bnp::{fixtures, Error, Result};

use crate::{
    BenchmarkArgs, BranchingArg, ClusterArgs, SimulateArgs, SolveArgs, EXIT_INFEASIBLE,
    EXIT_TIME_LIMIT,
};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn solve(a: SolveArgs) -> Result<u8> {
    let mut inst = io::load_instance(&a.instance)?;
    let cfg = &mut inst.config;
    if let Some(e) = a.eps {
        cfg.eps = e;
    }
    if let Some(g) = a.gap {
        cfg.gap = g;
    }
    if let Some(t) = a.time_limit {
        cfg.time_limit = Some(t);
    }
    if let Some(b) = a.branching {
        cfg.branching = match b {
            BranchingArg::Tri => Branching::Tri,
            BranchingArg::Bi => Branching::Bi,
        };
    }
    let problem = Problem::new(inst)?;
    if let Some(path) = &a.dump_lp {
        let master = Master::new(&problem)?;
        write_lp(&master.master_lp(&Restrictions::default()), create(path)?)?;
    }
    let sol = solve_tree(&problem)?;
    println!("instance   {}", problem.instance.name);
    println!("status     {:?}", sol.status);
    match &sol.incumbent {
        Some(inc) => {
            println!("objective  {:.6}", inc.objective);
            println!(
                "savings    {:.6}",
                problem.objective_to_savings(inc.objective)
            );
        }
        None => println!("objective  none"),
    }
    println!("bound      {:.6}", sol.bound);
    println!("gap        {:.3}%", 100.0 * sol.gap);
    println!(
        "nodes      {} (max depth {}), columns {}, colgen iterations {}",
        sol.stats.nodes, sol.stats.max_depth, sol.stats.columns, sol.stats.colgen_iterations
    );
    if !sol.proven {
        println!("note       bounds come from clustered pricing and are heuristic");
    }
    println!("time       {:.2}s", sol.stats.seconds);
    if let Some(path) = &a.tree_csv {
        io::write_tree_csv(&sol.nodes, create(path)?)?;
    }
    if let Some(path) = &a.log_csv {
        io::write_colgen_csv(&sol.log, create(path)?)?;
    }
    let with_traj = a.trajectories || a.plot_dir.is_some();
    if let Some(file) = SolutionFile::from_solution(&problem, &sol, with_traj)? {
        if let Some(dir) = &a.plot_dir {
            io::write_allocation_csv(&problem, &file.plans, create(&dir.join("allocation.csv"))?)?;
            let traj = file.trajectories.as_deref().unwrap_or_default();
            io::write_trajectory_csv(traj, create(&dir.join("trajectories.csv"))?)?;
        }
        if let Some(path) = &a.out {
            let mut file = file;
            if !a.trajectories {
                file.trajectories = None;
            }
            io::save_solution(&file, path)?;
        }
    }
    Ok(match sol.status {
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::TimeLimit => EXIT_TIME_LIMIT,
        _ => 0,
    })
}

pub fn simulate(a: SimulateArgs) -> Result<u8> {
    let problem = io::load_problem(&a.instance)?;
    let file = match &a.plan {
        Some(path) => {
            let mut file = io::load_solution(path)?;
            let choices = file.choices(&problem)?;
            if file.aux.len() != problem.aux().len() {
                let activity = problem.row_activity(&choices, &vec![0.0; problem.aux().len()]);
                let (aux, _) = best_aux(&problem, &activity)?.ok_or_else(|| Error::Validation {
                    path: "plans".into(),
                    message: "no feasible auxiliary completion".into(),
                })?;
                file.aux = aux;
            }
            SolutionFile::from_assignment(&problem, &choices, &file.aux, a.csv.is_some())?
        }
        None => {
            let idle = (0..problem.segments())
                .map(|i| {
                    (0..problem.epochs())
                        .map(|s| {
                            let zero = vec![0.0; problem.segment(i).dynamics.control_dim()];
                            problem.decision_index(i, s, &zero)
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            SolutionFile::from_assignment(
                &problem,
                &idle,
                &vec![0.0; problem.aux().len()],
                a.csv.is_some(),
            )?
        }
    };
    let feasible = file
        .choices(&problem)
        .and_then(|c| problem.check_assignment(&c, &file.aux));
    println!("instance   {}", problem.instance.name);
    println!("objective  {:.6}", file.objective);
    println!("savings    {:.6}", file.savings);
    match feasible {
        Ok(()) => println!("rows       satisfied"),
        Err(e) => println!("rows       violated: {e}"),
    }
    if let (Some(path), Some(traj)) = (&a.csv, &file.trajectories) {
        io::write_trajectory_csv(traj, create(path)?)?;
    }
    Ok(0)
}

pub fn benchmark(a: BenchmarkArgs) -> Result<u8> {
    let problem = io::load_problem(&a.instance)?;
    let methods: Vec<&str> = a
        .methods
        .iter()
        .map(|m| m.trim())
        .filter(|m| !m.is_empty())
        .collect();
    let reports = benchmarks::run_methods(&problem, &methods)?;
    let seed = a.seed.unwrap_or(problem.instance.config.seed);
    println!(
        "{:<20} {:>10} {:>16} {:>16}",
        "method", "seconds", "objective", "savings"
    );
    for r in &reports {
        println!(
            "{:<20} {:>10.3} {:>16.6} {:>16.6}",
            r.method, r.seconds, r.objective, r.savings
        );
    }
    if a.samples > 0 {
        println!();
        println!(
            "perturbation ±{:.0}%, {} samples, seed {seed}",
            100.0 * a.magnitude,
            a.samples
        );
        println!(
            "{:<20} {:>12} {:>12} {:>12} {:>9}",
            "method", "mean", "min", "max", "diverged"
        );
        for r in &reports {
            let rob =
                perturb_and_evaluate(&problem, &r.choices, &r.aux, a.magnitude, a.samples, seed)?;
            println!(
                "{:<20} {:>12.6} {:>12.6} {:>12.6} {:>9}",
                r.method, rob.mean, rob.min, rob.max, rob.diverged
            );
        }
    }
    if let Some(path) = &a.csv {
        benchmarks::write_report_csv(&reports, create(path)?)?;
    }
    Ok(0)
}

pub fn cluster_stats(a: ClusterArgs) -> Result<u8> {
    let mut inst = io::load_instance(&a.instance)?;
    inst.config.eps = a.eps;
    let problem = Problem::new(inst)?;
    let mut stats: Vec<ClusterStat> = Vec::new();
    for i in 0..problem.segments() {
        let f = Restrictions::default().filtered(&problem, i);
        stats.extend(pricing::cluster_stats(&build_space(&problem, i, &f)?, i));
    }
    println!(
        "{:>8} {:>6} {:>11} {:>9} {:>13}",
        "segment", "epoch", "candidates", "clusters", "max diameter"
    );
    for s in &stats {
        println!(
            "{:>8} {:>6} {:>11} {:>9} {:>13.3e}",
            s.segment, s.epoch, s.candidates, s.clusters, s.max_diameter
        );
    }
    let max = stats.iter().map(|s| s.max_diameter).fold(0.0, f64::max);
    let total: usize = stats.iter().map(|s| s.clusters).sum();
    println!("states {total}, max diameter {max}");
    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_writer(create(path)?);
        for s in &stats {
            w.serialize(s)?;
        }
        w.flush()?;
    }
    Ok(0)
}

pub fn gen_fixtures(dir: &Path) -> Result<u8> {
    fs::create_dir_all(dir)?;
    let mut all = fixtures::desks();
    all.push(("tripartite_concave", fixtures::tripartite_concave()));
    for (name, p) in all {
        let path = dir.join(format!("{name}.json"));
        io::save_instance(&p.instance, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}
