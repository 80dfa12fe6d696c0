//! Fixed-step RK4 integration of segment dynamics under piecewise-constant controls.
//!
//! Each epoch `[τ_s, τ_{s+1}]` is split into `substeps` equal steps. The decision of
//! the epoch is held constant over it; models flagged as rate-normalized receive
//! `x / (τ_{s+1} - τ_s)` instead of `x`. The running cost is accumulated with the
//! trapezoid rule on the substep grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Any state component larger than this in magnitude aborts integration.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

pub const DEFAULT_SUBSTEPS: usize = 20;

/// Epoch boundaries `τ_1 < τ_2 < ... < τ_{S+1}` plus the RK4 resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochGrid {
    timestamps: Vec<f64>,
    #[serde(default = "default_substeps")]
    substeps: usize,
}

fn default_substeps() -> usize {
    DEFAULT_SUBSTEPS
}

impl EpochGrid {
    pub fn new(timestamps: Vec<f64>, substeps: usize) -> Result<Self> {
        let grid = EpochGrid {
            timestamps,
            substeps,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// `epochs` epochs of equal `length` starting at 0.
    pub fn uniform(epochs: usize, length: f64, substeps: usize) -> Result<Self> {
        Self::new((0..=epochs).map(|s| s as f64 * length).collect(), substeps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.timestamps.len() < 2 {
            return Err(Error::validation(
                "grid.timestamps",
                "need at least two timestamps (one epoch)",
            ));
        }
        if self.substeps == 0 {
            return Err(Error::validation("grid.substeps", "must be positive"));
        }
        for (s, w) in self.timestamps.windows(2).enumerate() {
            if !(w[0].is_finite() && w[1].is_finite()) || w[1] <= w[0] {
                return Err(Error::validation(
                    format!("grid.timestamps[{}]", s + 1),
                    "timestamps must be finite and strictly increasing",
                ));
            }
        }
        Ok(())
    }

    pub fn epochs(&self) -> usize {
        self.timestamps.len() - 1
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn with_substeps(&self, substeps: usize) -> Result<Self> {
        Self::new(self.timestamps.clone(), substeps)
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn start(&self, epoch: usize) -> f64 {
        self.timestamps[epoch]
    }

    pub fn length(&self, epoch: usize) -> f64 {
        self.timestamps[epoch + 1] - self.timestamps[epoch]
    }

    pub fn horizon(&self) -> f64 {
        self.timestamps[self.timestamps.len() - 1]
    }
}

/// Per-epoch information a transition function may need.
#[derive(Debug, Clone, Copy)]
pub struct EpochContext {
    pub index: usize,
    pub length: f64,
}

/// Continuous-time dynamics `dM/dt = f(M, x)` with running cost `g` and terminal cost `h`.
pub trait Dynamics {
    fn dim(&self) -> usize;

    /// Whether decisions are converted to rates by dividing by the epoch length.
    fn rate_normalized(&self) -> bool;

    fn derivative(
        &self,
        ctx: EpochContext,
        t: f64,
        state: &[f64],
        control: &[f64],
        out: &mut [f64],
    );

    fn running_cost(&self, _t: f64, _state: &[f64]) -> f64 {
        0.0
    }

    fn terminal_cost(&self, _state: &[f64]) -> f64 {
        0.0
    }
}

/// Result of integrating a single epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStep {
    pub end: Vec<f64>,
    pub running_cost: f64,
}

/// Scratch buffers reused across RK4 steps.
#[derive(Debug, Clone, Default)]
pub struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
    control: Vec<f64>,
}

impl Rk4Workspace {
    pub fn new(dim: usize) -> Self {
        let mut ws = Self::default();
        ws.resize(dim);
        ws
    }

    fn resize(&mut self, dim: usize) {
        for v in [
            &mut self.k1,
            &mut self.k2,
            &mut self.k3,
            &mut self.k4,
            &mut self.tmp,
        ] {
            v.resize(dim, 0.0);
        }
    }
}

fn check_state(state: &[f64], epoch: usize, substep: usize) -> Result<()> {
    if state
        .iter()
        .all(|v| v.is_finite() && v.abs() <= DIVERGENCE_THRESHOLD)
    {
        Ok(())
    } else {
        Err(Error::Divergence { epoch, substep })
    }
}

/// Integrates one epoch from `start` under `decision`.
///
/// When `samples` is given, the state after every substep is appended to it
/// (the start state is not).
pub fn integrate_epoch<M: Dynamics + ?Sized>(
    model: &M,
    grid: &EpochGrid,
    epoch: usize,
    start: &[f64],
    decision: &[f64],
    ws: &mut Rk4Workspace,
    mut samples: Option<&mut Vec<Vec<f64>>>,
) -> Result<EpochStep> {
    let dim = model.dim();
    debug_assert_eq!(start.len(), dim);
    ws.resize(dim);
    let length = grid.length(epoch);
    let ctx = EpochContext {
        index: epoch,
        length,
    };
    ws.control.clear();
    if model.rate_normalized() {
        ws.control.extend(decision.iter().map(|x| x / length));
    } else {
        ws.control.extend_from_slice(decision);
    }
    let substeps = grid.substeps();
    let h = length / substeps as f64;
    let t0 = grid.start(epoch);

    let mut state = start.to_vec();
    let mut cost = 0.0;
    let mut g_prev = model.running_cost(t0, &state);
    let Rk4Workspace {
        k1,
        k2,
        k3,
        k4,
        tmp,
        control,
    } = ws;
    for step in 0..substeps {
        let t = t0 + step as f64 * h;
        model.derivative(ctx, t, &state, control, k1);
        for j in 0..dim {
            tmp[j] = state[j] + 0.5 * h * k1[j];
        }
        model.derivative(ctx, t + 0.5 * h, tmp, control, k2);
        for j in 0..dim {
            tmp[j] = state[j] + 0.5 * h * k2[j];
        }
        model.derivative(ctx, t + 0.5 * h, tmp, control, k3);
        for j in 0..dim {
            tmp[j] = state[j] + h * k3[j];
        }
        model.derivative(ctx, t + h, tmp, control, k4);
        for j in 0..dim {
            state[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        check_state(&state, epoch, step)?;
        // the last substep lands exactly on the epoch boundary
        let t_next = if step + 1 == substeps {
            grid.start(epoch + 1)
        } else {
            t0 + (step + 1) as f64 * h
        };
        let g_next = model.running_cost(t_next, &state);
        cost += 0.5 * h * (g_prev + g_next);
        g_prev = g_next;
        if let Some(out) = samples.as_deref_mut() {
            out.push(state.clone());
        }
    }
    Ok(EpochStep {
        end: state,
        running_cost: cost,
    })
}

/// Full-horizon trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Time of every sample; `S * substeps + 1` entries.
    pub times: Vec<f64>,
    /// State at every sample; the first entry is the initial condition.
    pub states: Vec<Vec<f64>>,
    /// Running cost accrued in each epoch.
    pub epoch_costs: Vec<f64>,
    /// `∫ g dt` over the horizon.
    pub running_cost: f64,
    pub terminal: Vec<f64>,
}

impl Trajectory {
    /// States at the epoch boundaries `τ_1..τ_{S+1}`.
    pub fn epoch_states(&self, substeps: usize) -> Vec<&[f64]> {
        self.states
            .iter()
            .step_by(substeps)
            .map(|s| s.as_slice())
            .collect()
    }
}

/// Integrates the whole horizon, one decision per epoch.
pub fn integrate<M: Dynamics + ?Sized>(
    model: &M,
    m0: &[f64],
    controls: &[Vec<f64>],
    grid: &EpochGrid,
) -> Result<Trajectory> {
    if controls.len() != grid.epochs() {
        return Err(Error::Config(format!(
            "expected {} epoch decisions, got {}",
            grid.epochs(),
            controls.len()
        )));
    }
    if m0.len() != model.dim() {
        return Err(Error::Config(format!(
            "initial state has dimension {}, model expects {}",
            m0.len(),
            model.dim()
        )));
    }
    check_state(m0, 0, 0)?;
    let mut ws = Rk4Workspace::new(model.dim());
    let mut times = vec![grid.start(0)];
    let mut states = vec![m0.to_vec()];
    let mut epoch_costs = Vec::with_capacity(controls.len());
    let mut current = m0.to_vec();
    for (s, x) in controls.iter().enumerate() {
        let step = integrate_epoch(model, grid, s, &current, x, &mut ws, Some(&mut states))?;
        let h = grid.length(s) / grid.substeps() as f64;
        times.extend((1..=grid.substeps()).map(|k| {
            if k == grid.substeps() {
                grid.start(s + 1)
            } else {
                grid.start(s) + k as f64 * h
            }
        }));
        epoch_costs.push(step.running_cost);
        current = step.end;
    }
    let running_cost = epoch_costs.iter().sum();
    Ok(Trajectory {
        times,
        states,
        epoch_costs,
        running_cost,
        terminal: current,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant;
    impl Dynamics for Constant {
        fn dim(&self) -> usize {
            2
        }
        fn rate_normalized(&self) -> bool {
            false
        }
        fn derivative(&self, _: EpochContext, _: f64, _: &[f64], _: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        fn running_cost(&self, _: f64, _: &[f64]) -> f64 {
            1.0
        }
    }

    struct Decay;
    impl Dynamics for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rate_normalized(&self) -> bool {
            false
        }
        fn derivative(&self, _: EpochContext, _: f64, s: &[f64], _: &[f64], out: &mut [f64]) {
            out[0] = -s[0];
        }
    }

    struct Blowup;
    impl Dynamics for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn rate_normalized(&self) -> bool {
            false
        }
        fn derivative(&self, _: EpochContext, _: f64, s: &[f64], _: &[f64], out: &mut [f64]) {
            out[0] = s[0] * s[0];
        }
    }

    #[test]
    fn constant_dynamics_accumulate_time() {
        let grid = EpochGrid::uniform(2, 1.0, 20).unwrap();
        let traj = integrate(&Constant, &[0.3, 0.7], &[vec![], vec![]], &grid).unwrap();
        assert_eq!(traj.terminal, vec![0.3, 0.7]);
        assert!((traj.running_cost - 2.0).abs() < 1e-12);
        assert_eq!(traj.states[0], vec![0.3, 0.7]);
        assert_eq!(traj.states.len(), 41);
        assert_eq!(traj.times.len(), 41);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let grid = EpochGrid::uniform(1, 1.0, 100).unwrap();
        let traj = integrate(&Decay, &[1.0], &[vec![]], &grid).unwrap();
        assert!((traj.terminal[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn refinement_is_fourth_order() {
        let err = |n: usize| {
            let grid = EpochGrid::uniform(1, 2.0, n).unwrap();
            let traj = integrate(&Decay, &[1.0], &[vec![]], &grid).unwrap();
            (traj.terminal[0] - (-2.0f64).exp()).abs()
        };
        let (e1, e2, e3) = (err(4), err(8), err(16));
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
        assert!(e2 / e3 >= 8.0, "ratio {}", e2 / e3);
    }

    #[test]
    fn divergence_names_epoch_and_substep() {
        let grid = EpochGrid::uniform(3, 1.0, 10).unwrap();
        let err = integrate(&Blowup, &[2.0], &[vec![], vec![], vec![]], &grid).unwrap_err();
        match err {
            Error::Divergence { epoch, .. } => assert_eq!(epoch, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn grid_rejects_non_increasing() {
        assert!(EpochGrid::new(vec![0.0, 1.0, 1.0], 4).is_err());
        assert!(EpochGrid::new(vec![0.0], 4).is_err());
        assert!(EpochGrid::new(vec![0.0, 1.0], 0).is_err());
    }

    #[test]
    fn control_count_must_match_epochs() {
        let grid = EpochGrid::uniform(2, 1.0, 4).unwrap();
        assert!(integrate(&Decay, &[1.0], &[vec![]], &grid).is_err());
    }
}
