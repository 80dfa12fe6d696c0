use serde::{Deserialize, Serialize};

use super::{check_rate, Series};
use crate::error::{Error, Result};
use crate::ode::{Dynamics, EpochContext};

/// Terminal cost weights on deaths, exposed, hospitalized and quarantined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelphiWeights {
    pub deaths: f64,
    pub exposed: f64,
    pub hospitalized: f64,
    pub quarantined: f64,
}

impl Default for DelphiWeights {
    fn default() -> Self {
        DelphiWeights {
            deaths: 1.0,
            exposed: 0.0,
            hospitalized: 0.0,
            quarantined: 0.0,
        }
    }
}

/// Eleven-compartment COVID model with vaccination.
///
/// State order: `S, E, I, U, H, Q, D, M, S', E', I'`, as population fractions.
/// Vaccine decisions are dose counts; `population` converts them to fractions.
///
/// The vaccinated branch `S' → E' → I' → M` has no inflow from the vaccination
/// term (effective doses go straight to `M`), so it only evolves from a non-zero
/// initial condition. `r_u + r_h + r_q` must equal `r_d` per epoch, which makes the
/// total population an invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelphiV {
    /// Infection rate.
    pub alpha: f64,
    /// Government-response multiplier.
    #[serde(default = "one")]
    pub gamma: Series,
    /// Vaccine effectiveness.
    pub beta: f64,
    /// Exposed → infected.
    pub r_i: f64,
    /// Infected → detected (U, H, Q).
    pub r_d: f64,
    pub r_u: Series,
    pub r_h: Series,
    pub r_q: Series,
    /// Detected → death.
    pub r_death: f64,
    #[serde(default)]
    pub weights: DelphiWeights,
    #[serde(default = "unit_population")]
    pub population: f64,
    /// Doses per pallet.
    #[serde(default = "unit_population")]
    pub pallet: f64,
    #[serde(default = "yes")]
    pub rate_normalized: bool,
}

fn one() -> Series {
    Series::Constant(1.0)
}
fn unit_population() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

impl DelphiV {
    pub const COMPARTMENTS: [&'static str; 11] =
        ["S", "E", "I", "U", "H", "Q", "D", "M", "S'", "E'", "I'"];
    pub const S: usize = 0;
    pub const E: usize = 1;
    pub const I: usize = 2;
    pub const U: usize = 3;
    pub const H: usize = 4;
    pub const Q: usize = 5;
    pub const D: usize = 6;
    pub const M: usize = 7;

    /// Mild synthetic parameter set, R0 ≈ 1.5 (rates per day).
    pub fn p0() -> Self {
        Self::synthetic(0.3)
    }

    /// Severe synthetic parameter set, R0 ≈ 3.0 (rates per day).
    pub fn p1() -> Self {
        Self::synthetic(0.6)
    }

    // R0 ≈ alpha * gamma / r_d with S ≈ 1.
    fn synthetic(alpha: f64) -> Self {
        DelphiV {
            alpha,
            gamma: Series::Constant(1.0),
            beta: 0.9,
            r_i: 0.25,
            r_d: 0.2,
            r_u: Series::Constant(0.12),
            r_h: Series::Constant(0.02),
            r_q: Series::Constant(0.06),
            r_death: 0.02,
            weights: DelphiWeights {
                deaths: 1.0,
                exposed: 0.02,
                hospitalized: 0.1,
                quarantined: 0.05,
            },
            population: 1.0,
            pallet: 0.01,
            rate_normalized: true,
        }
    }

    pub fn with_population(mut self, population: f64, pallet: f64) -> Self {
        self.population = population;
        self.pallet = pallet;
        self
    }

    pub fn basic_reproduction_number(&self) -> f64 {
        self.alpha * self.gamma.at(0) / self.r_d
    }

    pub fn dim(&self) -> usize {
        11
    }

    pub fn rate_normalized(&self) -> bool {
        self.rate_normalized
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("r_i", self.r_i),
            ("r_d", self.r_d),
            ("r_death", self.r_death),
        ] {
            check_rate(&format!("{path}.{name}"), v)?;
        }
        for (name, s) in [
            ("gamma", &self.gamma),
            ("r_u", &self.r_u),
            ("r_h", &self.r_h),
            ("r_q", &self.r_q),
        ] {
            s.validate(&format!("{path}.{name}"))?;
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::validation(
                format!("{path}.beta"),
                "must lie in [0, 1]",
            ));
        }
        if !(self.population.is_finite() && self.population > 0.0) {
            return Err(Error::validation(
                format!("{path}.population"),
                "must be positive",
            ));
        }
        if !(self.pallet.is_finite() && self.pallet > 0.0) {
            return Err(Error::validation(
                format!("{path}.pallet"),
                "must be positive",
            ));
        }
        let epochs = [&self.r_u, &self.r_h, &self.r_q]
            .iter()
            .map(|s| s.values().len())
            .max()
            .unwrap_or(1);
        for s in 0..epochs {
            let total = self.r_u.at(s) + self.r_h.at(s) + self.r_q.at(s);
            if (total - self.r_d).abs() > 1e-9 * (1.0 + self.r_d) {
                return Err(Error::validation(
                    format!("{path}.r_u"),
                    format!("r_u + r_h + r_q = {total} must equal r_d = {}", self.r_d),
                ));
            }
        }
        Ok(())
    }

    /// Derivative for a vaccination rate given in doses per unit time.
    pub fn transition(&self, ctx: EpochContext, state: &[f64], dose_rate: f64) -> Result<Vec<f64>> {
        if dose_rate < 0.0 || !dose_rate.is_finite() {
            return Err(Error::Domain(format!(
                "vaccination rate {dose_rate} is negative"
            )));
        }
        if state.len() != 11 {
            return Err(Error::Domain(format!(
                "state has dimension {}, expected 11",
                state.len()
            )));
        }
        let mut out = vec![0.0; 11];
        self.derivative(ctx, 0.0, state, &[dose_rate], &mut out);
        Ok(out)
    }

    pub(crate) fn scale_parameters(&mut self, factor: &mut impl FnMut() -> f64) {
        self.alpha *= factor();
        self.gamma.scale_each(&mut *factor);
        self.beta = (self.beta * factor()).min(1.0);
        self.r_i *= factor();
        self.r_d *= factor();
        self.r_u.scale_each(&mut *factor);
        self.r_h.scale_each(&mut *factor);
        self.r_q.scale_each(&mut *factor);
        self.r_death *= factor();
        // keep the detection split summing to r_d so the population stays conserved
        let epochs = [&self.r_u, &self.r_h, &self.r_q]
            .iter()
            .map(|s| s.values().len())
            .max()
            .unwrap_or(1);
        let per_epoch = |s: &Series| (0..epochs).map(|e| s.at(e)).collect::<Vec<_>>();
        let (u, h, q) = (
            per_epoch(&self.r_u),
            per_epoch(&self.r_h),
            per_epoch(&self.r_q),
        );
        let norm = |v: &[f64], e: usize| {
            let total = u[e] + h[e] + q[e];
            if total > 0.0 {
                v[e] * self.r_d / total
            } else {
                self.r_d / 3.0
            }
        };
        let rebuild = |v: &[f64]| {
            let vals: Vec<f64> = (0..epochs).map(|e| norm(v, e)).collect();
            if vals.len() == 1 {
                Series::Constant(vals[0])
            } else {
                Series::PerEpoch(vals)
            }
        };
        let (nu, nh, nq) = (rebuild(&u), rebuild(&h), rebuild(&q));
        self.r_u = nu;
        self.r_h = nh;
        self.r_q = nq;
    }
}

impl Dynamics for DelphiV {
    fn dim(&self) -> usize {
        11
    }

    fn rate_normalized(&self) -> bool {
        self.rate_normalized
    }

    #[inline]
    fn derivative(&self, ctx: EpochContext, _t: f64, m: &[f64], control: &[f64], out: &mut [f64]) {
        let s = ctx.index;
        let infect = self.alpha * self.gamma.at(s);
        let susceptible = m[0];
        // vaccination transfer, capped so the epoch cannot vaccinate more than remain
        let requested = self.beta * control[0] / self.population;
        let cap = susceptible.max(0.0) / ctx.length;
        let vaccinated = requested.min(cap);
        let new_infections = infect * (susceptible - vaccinated).max(0.0) * m[2];
        let infected_v = infect * m[8].max(0.0) * m[2];
        out[0] = -new_infections - vaccinated;
        out[1] = new_infections - self.r_i * m[1];
        out[2] = self.r_i * m[1] - self.r_d * m[2];
        out[3] = self.r_u.at(s) * m[2] - self.r_death * m[3];
        out[4] = self.r_h.at(s) * m[2] - self.r_death * m[4];
        out[5] = self.r_q.at(s) * m[2] - self.r_death * m[5];
        out[6] = self.r_death * (m[3] + m[4] + m[5]);
        out[7] = vaccinated + self.r_d * m[10];
        out[8] = -infected_v;
        out[9] = infected_v - self.r_i * m[9];
        out[10] = self.r_i * m[9] - self.r_d * m[10];
    }

    fn terminal_cost(&self, m: &[f64]) -> f64 {
        let w = &self.weights;
        w.deaths * m[6] + w.hospitalized * m[4] + w.quarantined * m[5] + w.exposed * m[1]
    }
}
