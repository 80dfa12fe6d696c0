//! Contagion models plugged into the integrator and the pricing DP.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{Dynamics, EpochContext};

mod affine;
mod bass;
mod delphi;
mod sair2;

pub use affine::Affine;
pub use bass::Bass;
pub use delphi::{DelphiV, DelphiWeights};
pub use sair2::{Sair2, Sair2Rates, CITY_RATES};

/// A parameter that is either constant or given per epoch (last value repeats).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Series {
    Constant(f64),
    PerEpoch(Vec<f64>),
}

impl Series {
    pub fn at(&self, epoch: usize) -> f64 {
        match self {
            Series::Constant(v) => *v,
            Series::PerEpoch(values) => values[epoch.min(values.len() - 1)],
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            Series::Constant(v) => vec![*v],
            Series::PerEpoch(v) => v.clone(),
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        match self {
            Series::PerEpoch(v) if v.is_empty() => {
                Err(Error::validation(path, "per-epoch series is empty"))
            }
            _ => {
                if self.values().iter().all(|v| v.is_finite() && *v >= 0.0) {
                    Ok(())
                } else {
                    Err(Error::validation(path, "must be finite and non-negative"))
                }
            }
        }
    }

    fn scale_each(&mut self, mut factor: impl FnMut() -> f64) {
        match self {
            Series::Constant(v) => *v *= factor(),
            Series::PerEpoch(values) => values.iter_mut().for_each(|v| *v *= factor()),
        }
    }
}

impl From<f64> for Series {
    fn from(v: f64) -> Self {
        Series::Constant(v)
    }
}

pub(crate) fn check_rate(path: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation(path, "must be finite and non-negative"))
    }
}

/// The dynamics of one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    DelphiV(DelphiV),
    Bass(Bass),
    Sair2(Sair2),
    Affine(Affine),
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::DelphiV(_) => "delphi_v",
            Model::Bass(_) => "bass",
            Model::Sair2(_) => "sair2",
            Model::Affine(_) => "affine",
        }
    }

    pub fn compartments(&self) -> Vec<String> {
        match self {
            Model::DelphiV(_) => DelphiV::COMPARTMENTS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            Model::Bass(_) => vec!["A".into(), "B".into()],
            Model::Sair2(_) => Sair2::COMPARTMENTS.iter().map(|s| s.to_string()).collect(),
            Model::Affine(m) => (0..m.dim()).map(|k| format!("m{k}")).collect(),
        }
    }

    /// Number of decision components the model reads.
    pub fn control_dim(&self) -> usize {
        match self {
            Model::DelphiV(_) => 1,
            Model::Bass(_) => 2,
            Model::Sair2(_) => 2,
            Model::Affine(m) => m.control_dim(),
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        match self {
            Model::DelphiV(m) => m.validate(path),
            Model::Bass(m) => m.validate(path),
            Model::Sair2(m) => m.validate(path),
            Model::Affine(m) => m.validate(path),
        }
    }

    /// Checks a decision against the model's domain (e.g. non-negative vaccines).
    pub fn check_decision(&self, decision: &[f64]) -> Result<()> {
        if decision.len() != self.control_dim() {
            return Err(Error::Domain(format!(
                "decision has {} components, model {} expects {}",
                decision.len(),
                self.name(),
                self.control_dim()
            )));
        }
        match self {
            Model::DelphiV(_) => {
                if decision[0] < 0.0 {
                    return Err(Error::Domain("negative vaccine allocation".into()));
                }
            }
            Model::Bass(_) => {
                let share = decision[1];
                if !(0.0..=1.0).contains(&share) {
                    return Err(Error::Domain(format!(
                        "promoted share {share} outside [0,1]"
                    )));
                }
            }
            Model::Sair2(_) => {
                if decision.iter().any(|x| *x < 0.0) {
                    return Err(Error::Domain("negative vehicle allocation".into()));
                }
            }
            Model::Affine(_) => {}
        }
        Ok(())
    }

    /// Multiplies every dynamics parameter by an independent draw in `[1-m, 1+m]`.
    pub fn perturbed<R: Rng + ?Sized>(&self, rng: &mut R, magnitude: f64) -> Model {
        let mut factor = || {
            if magnitude == 0.0 {
                1.0
            } else {
                rng.gen_range(1.0 - magnitude..=1.0 + magnitude)
            }
        };
        let mut m = self.clone();
        match &mut m {
            Model::DelphiV(p) => p.scale_parameters(&mut factor),
            Model::Bass(p) => p.scale_parameters(&mut factor),
            Model::Sair2(p) => p.scale_parameters(&mut factor),
            Model::Affine(p) => p.scale_parameters(&mut factor),
        }
        m
    }
}

impl Dynamics for Model {
    fn dim(&self) -> usize {
        match self {
            Model::DelphiV(m) => m.dim(),
            Model::Bass(m) => m.dim(),
            Model::Sair2(m) => m.dim(),
            Model::Affine(m) => m.dim(),
        }
    }

    fn rate_normalized(&self) -> bool {
        match self {
            Model::DelphiV(m) => m.rate_normalized(),
            Model::Bass(m) => m.rate_normalized(),
            Model::Sair2(m) => m.rate_normalized(),
            Model::Affine(m) => m.rate_normalized(),
        }
    }

    #[inline]
    fn derivative(
        &self,
        ctx: EpochContext,
        t: f64,
        state: &[f64],
        control: &[f64],
        out: &mut [f64],
    ) {
        match self {
            Model::DelphiV(m) => m.derivative(ctx, t, state, control, out),
            Model::Bass(m) => m.derivative(ctx, t, state, control, out),
            Model::Sair2(m) => m.derivative(ctx, t, state, control, out),
            Model::Affine(m) => m.derivative(ctx, t, state, control, out),
        }
    }

    fn running_cost(&self, t: f64, state: &[f64]) -> f64 {
        match self {
            Model::DelphiV(m) => m.running_cost(t, state),
            Model::Bass(m) => m.running_cost(t, state),
            Model::Sair2(m) => m.running_cost(t, state),
            Model::Affine(m) => m.running_cost(t, state),
        }
    }

    fn terminal_cost(&self, state: &[f64]) -> f64 {
        match self {
            Model::DelphiV(m) => m.terminal_cost(state),
            Model::Bass(m) => m.terminal_cost(state),
            Model::Sair2(m) => m.terminal_cost(state),
            Model::Affine(m) => m.terminal_cost(state),
        }
    }
}

/// Savings of a solution relative to the do-nothing baseline (both in min form).
pub fn lives_saved_objective(baseline: &[f64], solution: &[f64]) -> Result<f64> {
    if baseline.len() != solution.len() {
        return Err(Error::Config(format!(
            "baseline covers {} segments, solution {}",
            baseline.len(),
            solution.len()
        )));
    }
    Ok(baseline.iter().sum::<f64>() - solution.iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn savings_is_baseline_minus_solution() {
        assert_eq!(
            lives_saved_objective(&[1.0, 2.0], &[1.0, 2.0]).unwrap(),
            0.0
        );
        let s = lives_saved_objective(&[0.05], &[0.03]).unwrap();
        assert!((s - 0.02).abs() < 1e-15);
        assert!(lives_saved_objective(&[0.05], &[0.03, 0.01]).is_err());
    }

    #[test]
    fn series_lookup_repeats_last() {
        let s = Series::PerEpoch(vec![1.0, 2.0]);
        assert_eq!(s.at(0), 1.0);
        assert_eq!(s.at(5), 2.0);
        assert_eq!(Series::Constant(3.0).at(9), 3.0);
    }
}
