use serde::{Deserialize, Serialize};

use super::check_rate;
use crate::error::{Error, Result};
use crate::ode::{Dynamics, EpochContext};

/// Bass adoption model with promotion.
///
/// State `(A, B)`: non-adopters and adopters, `A + B = m`. Decisions are
/// `(promoted, share)`; only the share drives the dynamics:
/// `dA/dt = -α·share^p·A - (β/m)·A·B`, `dB/dt = -dA/dt`, with `p = promotion_exponent`.
/// The min-form cost is `-adoption_weight · B(T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bass {
    /// Promotion conversion rate.
    pub alpha: f64,
    /// Imitation rate.
    pub beta: f64,
    /// Market size.
    pub market: f64,
    /// Promotion increment (population-share step).
    pub increment: f64,
    /// Maximum number of products promoted per epoch.
    pub sparsity: usize,
    #[serde(default = "one")]
    pub promotion_exponent: f64,
    #[serde(default = "one")]
    pub adoption_weight: f64,
    #[serde(default = "yes")]
    pub rate_normalized: bool,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

impl Bass {
    pub fn new(alpha: f64, beta: f64, market: f64, increment: f64, sparsity: usize) -> Self {
        Bass {
            alpha,
            beta,
            market,
            increment,
            sparsity,
            promotion_exponent: 1.0,
            adoption_weight: 1.0,
            rate_normalized: true,
        }
    }

    pub fn dim(&self) -> usize {
        2
    }

    pub fn rate_normalized(&self) -> bool {
        self.rate_normalized
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        check_rate(&format!("{path}.alpha"), self.alpha)?;
        check_rate(&format!("{path}.beta"), self.beta)?;
        check_rate(
            &format!("{path}.promotion_exponent"),
            self.promotion_exponent,
        )?;
        if !(self.market.is_finite() && self.market > 0.0) {
            return Err(Error::validation(
                format!("{path}.market"),
                "must be positive",
            ));
        }
        if !(self.increment > 0.0 && self.increment <= 1.0) {
            return Err(Error::validation(
                format!("{path}.increment"),
                "must lie in (0, 1]",
            ));
        }
        Ok(())
    }

    /// Derivative of `(A, B)` for a promoted share in `[0, 1]` applied as-is.
    pub fn transition(&self, state: &[f64], promoted_share: f64) -> Result<[f64; 2]> {
        if !(0.0..=1.0).contains(&promoted_share) {
            return Err(Error::Domain(format!(
                "promoted share {promoted_share} outside [0,1]"
            )));
        }
        let mut out = [0.0; 2];
        self.flow(state, promoted_share, &mut out);
        Ok(out)
    }

    #[inline]
    fn flow(&self, state: &[f64], share: f64, out: &mut [f64]) {
        let (a, b) = (state[0], state[1]);
        let promotion = if share == 0.0 {
            0.0
        } else {
            share.powf(self.promotion_exponent)
        };
        let d_a = -self.alpha * promotion * a - self.beta / self.market * a * b;
        out[0] = d_a;
        out[1] = -d_a;
    }

    pub(crate) fn scale_parameters(&mut self, factor: &mut impl FnMut() -> f64) {
        self.alpha *= factor();
        self.beta *= factor();
    }
}

impl Dynamics for Bass {
    fn dim(&self) -> usize {
        2
    }

    fn rate_normalized(&self) -> bool {
        self.rate_normalized
    }

    #[inline]
    fn derivative(
        &self,
        _ctx: EpochContext,
        _t: f64,
        state: &[f64],
        control: &[f64],
        out: &mut [f64],
    ) {
        self.flow(state, control[control.len() - 1], out);
    }

    fn terminal_cost(&self, state: &[f64]) -> f64 {
        -self.adoption_weight * state[1]
    }
}
