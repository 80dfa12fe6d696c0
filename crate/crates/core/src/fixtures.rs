//! Small deterministic instances used by tests, benches and the CLI.

use rand::Rng;

use crate::instance::{
    AuxVar, CouplingRow, FacilityLayout, Instance, ObjectiveMode, Problem, ProblemKind, Resource,
    Segment, Sense, Sparsity,
};
use crate::models::{Affine, Bass, DelphiV, Model, Sair2};
use crate::ode::EpochGrid;
use crate::rng::{stream, Purpose};

/// Random two-dimensional affine segments with `decisions` two-component
/// decisions per epoch (the first is always zero). With `coupled`, adds a
/// capacity row per epoch on component 0 and a coverage row on component 1,
/// both satisfied by a hidden reference assignment.
pub fn random_generic(
    seed: u64,
    segments: usize,
    epochs: usize,
    decisions: usize,
    coupled: bool,
) -> Problem {
    let mut rng = stream(seed, Purpose::Fixture, 0);
    let grid = EpochGrid::uniform(epochs, 0.5, 8).expect("valid grid");
    let mut segs = Vec::with_capacity(segments);
    for i in 0..segments {
        let a = (0..2)
            .map(|_| (0..2).map(|_| rng.gen_range(-0.6..0.6)).collect())
            .collect();
        let b = (0..2)
            .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut m = Affine::new(a, b);
        m.running = (0..2).map(|_| rng.gen_range(0.2..1.0)).collect();
        m.terminal_linear = (0..2).map(|_| rng.gen_range(-0.5..0.5)).collect();
        m.terminal_quadratic = (0..2).map(|_| rng.gen_range(0.0..0.5)).collect();
        let sets = (0..epochs)
            .map(|_| {
                (0..decisions)
                    .map(|d| {
                        if d == 0 {
                            vec![0.0, 0.0]
                        } else {
                            vec![d as f64 * 0.5, rng.gen_range(0..3) as f64 * 0.5]
                        }
                    })
                    .collect()
            })
            .collect();
        segs.push(Segment {
            name: format!("g{i}"),
            dynamics: Model::Affine(m),
            initial_state: (0..2).map(|_| rng.gen_range(0.5..1.5)).collect(),
            decisions: sets,
            decision_cost: (0..2).map(|_| rng.gen_range(0.0..0.3)).collect(),
        });
    }
    let mut inst = Instance::new(ProblemKind::Generic, grid, segs);
    inst.name = format!("generic-{seed}");
    if coupled {
        let reference: Vec<Vec<usize>> = (0..segments)
            .map(|_| (0..epochs).map(|_| rng.gen_range(0..decisions)).collect())
            .collect();
        let x = |i: usize, s: usize, k: usize| inst.segments[i].decisions[s][reference[i][s]][k];
        let mut rows = Vec::new();
        for s in 0..epochs {
            let used: f64 = (0..segments).map(|i| x(i, s, 0)).sum();
            let mut row = CouplingRow::new(format!("cap{s}"), Sense::Le, used + 0.25);
            for i in 0..segments {
                row = row.plan(i, s, 0, 1.0);
            }
            rows.push(row);
        }
        let covered: f64 = (0..segments)
            .flat_map(|i| (0..epochs).map(move |s| (i, s)))
            .map(|(i, s)| x(i, s, 1))
            .sum();
        let mut row = CouplingRow::new("cover", Sense::Ge, (covered - 0.25).max(0.0));
        for i in 0..segments {
            for s in 0..epochs {
                row = row.plan(i, s, 1, 1.0);
            }
        }
        rows.push(row);
        inst.rows = rows;
    }
    Problem::new(inst).expect("generated instance is valid")
}

/// Residents in thousands; doses in thousands, shipped in pallets of 20.
const PALLET: f64 = 20.0;

fn delphi_segment(
    name: &str,
    severe: bool,
    population: f64,
    infected: f64,
    pallets: usize,
    epochs: usize,
) -> Segment {
    let base = if severe { DelphiV::p1() } else { DelphiV::p0() };
    let mut m = base.with_population(population, PALLET);
    // terminal weights counted in thousands of people
    m.weights.deaths *= population;
    m.weights.exposed *= population;
    m.weights.hospitalized *= population;
    m.weights.quarantined *= population;
    let mut m0 = vec![0.0; 11];
    m0[DelphiV::E] = infected;
    m0[DelphiV::I] = infected;
    m0[DelphiV::S] = 1.0 - 2.0 * infected;
    let set: Vec<Vec<f64>> = (0..pallets).map(|d| vec![d as f64 * PALLET]).collect();
    Segment {
        name: name.into(),
        dynamics: Model::DelphiV(m),
        initial_state: m0,
        decisions: vec![set; epochs],
        decision_cost: vec![],
    }
}

fn budget_rows(inst: &mut Instance, name: &str, component: usize, budget: f64, step: f64) {
    for s in 0..inst.epochs() {
        let mut row = CouplingRow::new(format!("{name}{s}"), Sense::Le, budget);
        for i in 0..inst.segments.len() {
            row = row.plan(i, s, component, 1.0);
        }
        inst.rows.push(row);
    }
    inst.resources.push(Resource {
        name: name.into(),
        component,
        budget: vec![budget; inst.epochs()],
        step,
    });
}

/// Vaccine allocation over six regions and four weekly epochs, 0 to 5 pallets
/// per region and week, 8 pallets available per week.
pub fn vaccine_desk() -> Problem {
    let regions = [
        ("north", true, 1000.0, 0.004),
        ("south", false, 800.0, 0.010),
        ("east", true, 1500.0, 0.002),
        ("west", false, 600.0, 0.015),
        ("central", true, 1200.0, 0.006),
        ("coast", false, 900.0, 0.008),
    ];
    vaccine_from(&regions, 4, 6, 8.0)
}

fn vaccine_from(
    regions: &[(&str, bool, f64, f64)],
    epochs: usize,
    pallets: usize,
    weekly: f64,
) -> Problem {
    let grid = EpochGrid::uniform(epochs, 7.0, 20).expect("valid grid");
    let segs = regions
        .iter()
        .map(|&(n, sev, pop, inf)| delphi_segment(n, sev, pop, inf, pallets, epochs))
        .collect();
    let mut inst = Instance::new(ProblemKind::Vaccine, grid, segs);
    inst.objective = ObjectiveMode::Savings;
    budget_rows(&mut inst, "vaccines", 0, weekly * PALLET, PALLET);
    inst.name = format!("vaccine-{}x{}x{}", regions.len(), epochs, pallets);
    Problem::new(inst).expect("valid vaccine instance")
}

/// Two regions, two epochs, three decisions each: 81 joint sequences.
pub fn tiny_81() -> Problem {
    let mut p = vaccine_from(
        &[("a", true, 1000.0, 0.006), ("b", false, 700.0, 0.012)],
        2,
        3,
        2.0,
    );
    p.instance.name = "tiny-81".into();
    p.instance.config.gap = 0.0;
    p
}

/// Vaccination centers: four regions, four candidate centers of which two open.
pub fn facility_desk() -> Problem {
    let epochs = 3;
    let regions = [
        ("north", true, 1000.0, 0.005),
        ("south", false, 1400.0, 0.010),
        ("east", true, 700.0, 0.004),
        ("west", false, 1100.0, 0.012),
    ];
    let segs: Vec<Segment> = regions
        .iter()
        .map(|&(n, sev, pop, inf)| delphi_segment(n, sev, pop, inf, 5, epochs))
        .collect();
    let n = segs.len();
    let grid = EpochGrid::uniform(epochs, 7.0, 20).expect("valid grid");
    let mut inst = Instance::new(ProblemKind::Facility, grid, segs);
    inst.objective = ObjectiveMode::Savings;
    let capacity = vec![
        vec![80.0; epochs],
        vec![100.0; epochs],
        vec![60.0; epochs],
        vec![80.0; epochs],
    ];
    // coverage[i][j], thousands of residents within reach of center j
    let coverage = vec![
        vec![300.0, 0.0, 120.0, 0.0],
        vec![200.0, 300.0, 0.0, 0.0],
        vec![0.0, 100.0, 0.0, 160.0],
        vec![0.0, 0.0, 200.0, 180.0],
    ];
    let budget = vec![6.0 * PALLET; epochs];
    let open = 2;
    let nf = capacity.len();
    let open_vars: Vec<usize> = (0..nf).collect();
    for j in 0..nf {
        inst.aux.push(AuxVar {
            name: format!("open{j}"),
            lower: 0.0,
            upper: Some(1.0),
            cost: 0.0,
            integer: true,
        });
    }
    let mut flow_vars = vec![vec![Vec::new(); nf]; n];
    for (i, fi) in flow_vars.iter_mut().enumerate() {
        for (j, fij) in fi.iter_mut().enumerate() {
            for s in 0..epochs {
                fij.push(inst.aux.len());
                inst.aux.push(AuxVar {
                    name: format!("flow{i}_{j}_{s}"),
                    lower: 0.0,
                    upper: None,
                    cost: 0.0,
                    integer: false,
                });
            }
        }
    }
    let mut rows = vec![open_vars
        .iter()
        .fold(CouplingRow::new("open", Sense::Eq, open as f64), |r, &v| {
            r.aux(v, 1.0)
        })];
    for s in 0..epochs {
        rows.push((0..n).fold(
            CouplingRow::new(format!("budget{s}"), Sense::Le, budget[s]),
            |r, i| r.plan(i, s, 0, 1.0),
        ));
        for j in 0..nf {
            let row = (0..n).fold(
                CouplingRow::new(format!("cap{j}_{s}"), Sense::Le, capacity[j][s]),
                |r, i| r.aux(flow_vars[i][j][s], 1.0),
            );
            rows.push(row);
        }
    }
    for i in 0..n {
        for j in 0..nf {
            let row = (0..epochs).fold(
                CouplingRow::new(format!("reach{i}_{j}"), Sense::Le, coverage[i][j]),
                |r, s| r.aux(flow_vars[i][j][s], 1.0),
            );
            rows.push(row);
            for s in 0..epochs {
                let bound = capacity[j][s].min(coverage[i][j]);
                rows.push(
                    CouplingRow::new(format!("link{i}_{j}_{s}"), Sense::Le, 0.0)
                        .aux(flow_vars[i][j][s], 1.0)
                        .aux(open_vars[j], -bound),
                );
            }
        }
        for s in 0..epochs {
            let row = (0..nf).fold(
                CouplingRow::new(format!("supply{i}_{s}"), Sense::Eq, 0.0).plan(i, s, 0, 1.0),
                |r, j| r.aux(flow_vars[i][j][s], -1.0),
            );
            rows.push(row);
        }
    }
    inst.rows = rows;
    inst.resources.push(Resource {
        name: "vaccines".into(),
        component: 0,
        budget: budget.clone(),
        step: PALLET,
    });
    inst.facility = Some(FacilityLayout {
        open,
        capacity,
        coverage,
        budget,
        open_vars,
        flow_vars,
    });
    inst.name = "facility-desk".into();
    Problem::new(inst).expect("valid facility instance")
}

/// Content promotion: four products, three epochs, promotion shares in steps
/// of 0.25, at most two products promoted per epoch, full cover every epoch.
pub fn content_desk() -> Problem {
    let epochs = 3;
    let step = 0.25;
    let limit = 2;
    // (alpha, beta, adopters at start), market of 100
    let products = [
        (0.5, 0.3, 1.0),
        (0.4, 0.5, 20.0),
        (0.6, 0.2, 2.0),
        (0.3, 0.4, 30.0),
    ];
    let mut set = vec![vec![0.0, 0.0]];
    for k in 1..=4 {
        set.push(vec![1.0, k as f64 * step]);
    }
    let segs = products
        .iter()
        .enumerate()
        .map(|(i, &(a, b, b0))| Segment {
            name: format!("product{i}"),
            dynamics: Model::Bass(Bass::new(a, b, 100.0, step, limit)),
            initial_state: vec![100.0 - b0, b0],
            decisions: vec![set.clone(); epochs],
            decision_cost: vec![],
        })
        .collect();
    let grid = EpochGrid::uniform(epochs, 1.0, 20).expect("valid grid");
    let mut inst = Instance::new(ProblemKind::Content, grid, segs);
    inst.objective = ObjectiveMode::Savings;
    let n = products.len();
    for s in 0..epochs {
        inst.rows.push((0..n).fold(
            CouplingRow::new(format!("promote{s}"), Sense::Le, limit as f64),
            |r, i| r.plan(i, s, 0, 1.0),
        ));
        inst.rows.push((0..n).fold(
            CouplingRow::new(format!("cover{s}"), Sense::Eq, 1.0),
            |r, i| r.plan(i, s, 1, 1.0),
        ));
    }
    inst.resources.push(Resource {
        name: "share".into(),
        component: 1,
        budget: vec![1.0; epochs],
        step,
    });
    inst.sparsity = Some(Sparsity {
        component: 0,
        limit,
    });
    inst.name = "content-desk".into();
    Problem::new(inst).expect("valid content instance")
}

/// Congestion mitigation in five neighborhoods over three one-hour epochs,
/// 0 to 2 treatment and prevention vehicles each, five of each per epoch.
pub fn congestion_desk() -> Problem {
    let epochs = 3;
    // Several tabulated calibrations have clearance splits above one, which
    // drive compartments negative; these three stay non-negative under every plan.
    let regions = [
        ("morning", "West", [0.70, 0.10, 0.05, 0.03, 0.12, 0.0]),
        ("morning", "Northeast", [0.80, 0.05, 0.04, 0.01, 0.10, 0.0]),
        ("evening", "North", [0.60, 0.15, 0.06, 0.04, 0.15, 0.0]),
        ("morning", "West", [0.75, 0.08, 0.05, 0.02, 0.10, 0.0]),
        ("morning", "Northeast", [0.65, 0.12, 0.08, 0.05, 0.10, 0.0]),
    ];
    let n = regions.len();
    let (b1, b2) = (5.0, 5.0);
    let set: Vec<Vec<f64>> = (0..3)
        .flat_map(|a| (0..3).map(move |b| vec![a as f64, b as f64]))
        .collect();
    let segs = regions
        .iter()
        .enumerate()
        .map(|(i, (period, r, m0))| Segment {
            name: format!("{}-{period}-{i}", r.to_lowercase()),
            dynamics: Model::Sair2(Sair2::new(
                Sair2::city_rates(period, r).expect("tabulated"),
                n,
                b1,
                b2,
            )),
            initial_state: m0.to_vec(),
            decisions: vec![set.clone(); epochs],
            decision_cost: vec![],
        })
        .collect();
    let grid = EpochGrid::uniform(epochs, 1.0, 20).expect("valid grid");
    let mut inst = Instance::new(ProblemKind::Congestion, grid, segs);
    inst.objective = ObjectiveMode::Savings;
    budget_rows(&mut inst, "treatment", 0, b1, 1.0);
    budget_rows(&mut inst, "prevention", 1, b2, 1.0);
    inst.name = "congestion-desk".into();
    Problem::new(inst).expect("valid congestion instance")
}

/// The four shipped desk instances plus the 81-sequence one.
pub fn desks() -> Vec<(&'static str, Problem)> {
    vec![
        ("vaccine_desk", vaccine_desk()),
        ("facility_desk", facility_desk()),
        ("content_desk", content_desk()),
        ("congestion_desk", congestion_desk()),
        ("tiny_81", tiny_81()),
    ]
}

/// One segment, one epoch, decisions {0,2,4,6,8}, `x ≥ 6`, concave terminal
/// cost `2x - 0.1x²`. The relaxation mixes 0 and 8 (average 6, which is in the
/// set), so only a three-way split on the value 6 closes the gap.
pub fn tripartite_concave() -> Problem {
    let mut m = Affine::new(vec![vec![0.0]], vec![vec![1.0]]);
    m.terminal_linear = vec![2.0];
    m.terminal_quadratic = vec![-0.1];
    let seg = Segment {
        name: "concave".into(),
        dynamics: Model::Affine(m),
        initial_state: vec![0.0],
        decisions: vec![(0..5).map(|k| vec![2.0 * k as f64]).collect()],
        decision_cost: vec![],
    };
    let grid = EpochGrid::uniform(1, 1.0, 4).expect("valid grid");
    let mut inst = Instance::new(ProblemKind::Generic, grid, vec![seg]);
    inst.rows
        .push(CouplingRow::new("floor", Sense::Ge, 6.0).plan(0, 0, 0, 1.0));
    inst.config.gap = 0.0;
    inst.name = "tripartite-concave".into();
    Problem::new(inst).expect("valid instance")
}

/// A desk instance with every model parameter scaled by an independent draw in
/// `[0.8, 1.2]` and initial conditions jittered; used for randomized sweeps.
pub fn randomized(base: &Problem, seed: u64) -> Problem {
    let mut rng = stream(seed, Purpose::Fixture, 1);
    let mut inst = base.instance.clone();
    for seg in &mut inst.segments {
        seg.dynamics = seg.dynamics.perturbed(&mut rng, 0.2);
        let total: f64 = seg.initial_state.iter().sum();
        let mut m0: Vec<f64> = seg
            .initial_state
            .iter()
            .map(|v| v * rng.gen_range(0.8..1.2))
            .collect();
        // keep the total mass of the compartments
        let scaled: f64 = m0.iter().sum();
        if scaled > 0.0 {
            m0.iter_mut().for_each(|v| *v *= total / scaled);
        }
        seg.initial_state = m0;
    }
    inst.name = format!("{}-r{seed}", inst.name);
    Problem::new(inst).expect("perturbed instance stays valid")
}
