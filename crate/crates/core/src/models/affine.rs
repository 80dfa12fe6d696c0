use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{Dynamics, EpochContext};

/// Generic linear dynamics `dM/dt = A·M + B·x + c`.
///
/// Running cost `q·M`; terminal cost `t·M + Σ_k w_k·M_k²`. Negative
/// quadratic weights give concave terminal costs, which is useful for
/// fixtures whose LP relaxation lands on a convex combination of plans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    /// Row-major `dim × dim`.
    pub a: Vec<Vec<f64>>,
    /// Row-major `dim × control_dim`.
    pub b: Vec<Vec<f64>>,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub running: Vec<f64>,
    #[serde(default)]
    pub terminal_linear: Vec<f64>,
    #[serde(default)]
    pub terminal_quadratic: Vec<f64>,
    #[serde(default)]
    pub rate_normalized: bool,
}

impl Affine {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Self {
        let dim = a.len();
        Affine {
            a,
            b,
            c: vec![0.0; dim],
            running: vec![0.0; dim],
            terminal_linear: vec![0.0; dim],
            terminal_quadratic: vec![0.0; dim],
            rate_normalized: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn control_dim(&self) -> usize {
        self.b.first().map_or(0, Vec::len)
    }

    pub fn rate_normalized(&self) -> bool {
        self.rate_normalized
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::validation(format!("{path}.a"), "empty state"));
        }
        if self.a.iter().any(|row| row.len() != n) {
            return Err(Error::validation(format!("{path}.a"), "must be square"));
        }
        if self.b.len() != n {
            return Err(Error::validation(
                format!("{path}.b"),
                "row count must match state dimension",
            ));
        }
        let m = self.control_dim();
        if m == 0 || self.b.iter().any(|row| row.len() != m) {
            return Err(Error::validation(
                format!("{path}.b"),
                "ragged or empty control matrix",
            ));
        }
        for (name, v) in [
            ("c", &self.c),
            ("running", &self.running),
            ("terminal_linear", &self.terminal_linear),
            ("terminal_quadratic", &self.terminal_quadratic),
        ] {
            if !v.is_empty() && v.len() != n {
                return Err(Error::validation(
                    format!("{path}.{name}"),
                    format!("expected {n} entries"),
                ));
            }
        }
        let finite = self
            .a
            .iter()
            .chain(self.b.iter())
            .flatten()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::validation(path, "non-finite coefficient"));
        }
        Ok(())
    }

    pub(crate) fn scale_parameters(&mut self, factor: &mut impl FnMut() -> f64) {
        for v in self.a.iter_mut().chain(self.b.iter_mut()).flatten() {
            *v *= factor();
        }
        for v in self.c.iter_mut() {
            *v *= factor();
        }
    }
}

fn dot(w: &[f64], m: &[f64]) -> f64 {
    w.iter().zip(m).map(|(a, b)| a * b).sum()
}

impl Dynamics for Affine {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn rate_normalized(&self) -> bool {
        self.rate_normalized
    }

    fn derivative(
        &self,
        _ctx: EpochContext,
        _t: f64,
        state: &[f64],
        control: &[f64],
        out: &mut [f64],
    ) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = dot(&self.a[k], state)
                + dot(&self.b[k], control)
                + self.c.get(k).copied().unwrap_or(0.0);
        }
    }

    fn running_cost(&self, _t: f64, state: &[f64]) -> f64 {
        dot(&self.running, state)
    }

    fn terminal_cost(&self, state: &[f64]) -> f64 {
        dot(&self.terminal_linear, state)
            + self
                .terminal_quadratic
                .iter()
                .zip(state)
                .map(|(w, m)| w * m * m)
                .sum::<f64>()
    }
}
