use serde::{Deserialize, Serialize};

use super::check_rate;
use crate::error::{Error, Result};
use crate::ode::{Dynamics, EpochContext};

/// Calibrated rates of the congestion model for one region and time period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sair2Rates {
    pub alpha_f: f64,
    pub beta_f: f64,
    pub rho_f: f64,
    pub zeta_f: f64,
    pub alpha_w: f64,
    pub beta_w: f64,
    pub rho_w: f64,
    pub zeta_w: f64,
    pub theta: f64,
}

const fn rates(v: [f64; 9]) -> Sair2Rates {
    Sair2Rates {
        alpha_f: v[0],
        beta_f: v[1],
        rho_f: v[2],
        zeta_f: v[3],
        alpha_w: v[4],
        beta_w: v[5],
        rho_w: v[6],
        zeta_w: v[7],
        theta: v[8],
    }
}

/// Calibrated 2-SAIR rates for Singapore: `(period, region, rates)`.
pub const CITY_RATES: [(&str, &str, Sair2Rates); 15] = [
    (
        "morning",
        "West",
        rates([
            0.531, 0.578, 1.126, 0.569, 3.966, 1.585, 0.411, 4.835, 10.354,
        ]),
    ),
    (
        "morning",
        "Central",
        rates([
            0.000, 0.048, 0.034, 0.076, 1.224, 0.875, 1.180, 1.544, 2.135,
        ]),
    ),
    (
        "morning",
        "Northeast",
        rates([
            0.000, 0.137, 0.345, 0.078, 1.240, 0.198, 1.023, 2.273, 4.742,
        ]),
    ),
    (
        "morning",
        "East",
        rates([
            0.052, 0.041, 0.432, 0.086, 2.745, 3.086, 1.201, 1.934, 3.950,
        ]),
    ),
    (
        "morning",
        "North",
        rates([
            0.492, 0.562, 1.450, 2.043, 1.396, 0.896, 2.162, 1.878, 1.113,
        ]),
    ),
    (
        "afternoon",
        "West",
        rates([
            0.897, 0.180, 1.913, 3.180, 2.852, 1.321, 1.208, 3.444, 2.512,
        ]),
    ),
    (
        "afternoon",
        "Central",
        rates([
            0.862, 0.070, 3.259, 1.144, 1.098, 1.026, 0.338, 1.831, 3.477,
        ]),
    ),
    (
        "afternoon",
        "Northeast",
        rates([
            0.782, 0.024, 5.786, 0.283, 1.215, 2.360, 0.002, 3.555, 1.381,
        ]),
    ),
    (
        "afternoon",
        "East",
        rates([
            0.838, 0.115, 2.143, 1.260, 0.000, 0.288, 0.000, 0.137, 1.283,
        ]),
    ),
    (
        "afternoon",
        "North",
        rates([
            1.538, 0.196, 1.856, 1.656, 0.987, 1.085, 0.996, 0.930, 1.111,
        ]),
    ),
    (
        "evening",
        "West",
        rates([
            0.091, 0.448, 1.249, 1.176, 0.568, 0.990, 2.194, 1.264, 3.775,
        ]),
    ),
    (
        "evening",
        "Central",
        rates([
            0.024, 0.331, 1.176, 0.793, 0.068, 0.733, 1.873, 1.335, 3.350,
        ]),
    ),
    (
        "evening",
        "Northeast",
        rates([
            0.018, 0.304, 1.247, 1.326, 0.116, 1.514, 1.728, 1.123, 2.861,
        ]),
    ),
    (
        "evening",
        "East",
        rates([
            0.603, 0.191, 2.255, 1.141, 0.962, 0.985, 1.527, 1.517, 6.799,
        ]),
    ),
    (
        "evening",
        "North",
        rates([
            0.001, 0.580, 0.905, 0.698, 1.148, 1.110, 1.136, 1.142, 4.264,
        ]),
    ),
];

/// Six-compartment congestion model (2-SAIR).
///
/// State order `S, W, A, A', I, R` as road-segment fractions. Decisions are
/// `(treatment vehicles, prevention vehicles)`. Interventions shift clearance
/// rates through the linear forms `ψ(x, ζ) = nζ/(2D_x)(x - B¹/n)` and
/// `φ(x, ζ) = nζ/(2D_y)(x - B²/n)`, which vanish at the even allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sair2 {
    pub rates: Sair2Rates,
    /// Number of neighborhoods sharing the fleets.
    pub neighborhoods: usize,
    pub treatment_budget: f64,
    pub prevention_budget: f64,
    /// Normalizer of ψ; defaults to the treatment budget.
    #[serde(default)]
    pub d_x: Option<f64>,
    /// Normalizer of φ; defaults to the prevention budget.
    #[serde(default)]
    pub d_y: Option<f64>,
    #[serde(default = "one")]
    pub c_congested: f64,
    #[serde(default = "one")]
    pub c_accident: f64,
    #[serde(default = "one")]
    pub c_accident_roadwork: f64,
    #[serde(default = "yes")]
    pub rate_normalized: bool,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

impl Sair2 {
    pub const COMPARTMENTS: [&'static str; 6] = ["S", "W", "A", "A'", "I", "R"];

    pub fn new(
        rates: Sair2Rates,
        neighborhoods: usize,
        treatment_budget: f64,
        prevention_budget: f64,
    ) -> Self {
        Sair2 {
            rates,
            neighborhoods,
            treatment_budget,
            prevention_budget,
            d_x: None,
            d_y: None,
            c_congested: 1.0,
            c_accident: 1.0,
            c_accident_roadwork: 1.0,
            rate_normalized: true,
        }
    }

    /// Rates of the given period/region from the calibrated table.
    pub fn city_rates(period: &str, region: &str) -> Option<Sair2Rates> {
        CITY_RATES
            .iter()
            .find(|(p, r, _)| p.eq_ignore_ascii_case(period) && r.eq_ignore_ascii_case(region))
            .map(|(_, _, rates)| *rates)
    }

    pub fn dim(&self) -> usize {
        6
    }

    pub fn rate_normalized(&self) -> bool {
        self.rate_normalized
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let r = &self.rates;
        for (name, v) in [
            ("alpha_f", r.alpha_f),
            ("beta_f", r.beta_f),
            ("rho_f", r.rho_f),
            ("zeta_f", r.zeta_f),
            ("alpha_w", r.alpha_w),
            ("beta_w", r.beta_w),
            ("rho_w", r.rho_w),
            ("zeta_w", r.zeta_w),
            ("theta", r.theta),
        ] {
            check_rate(&format!("{path}.rates.{name}"), v)?;
        }
        check_rate(&format!("{path}.treatment_budget"), self.treatment_budget)?;
        check_rate(&format!("{path}.prevention_budget"), self.prevention_budget)?;
        if self.neighborhoods == 0 {
            return Err(Error::validation(
                format!("{path}.neighborhoods"),
                "must be positive",
            ));
        }
        Ok(())
    }

    fn psi(&self, x: f64, zeta: f64) -> f64 {
        let d = self.d_x.unwrap_or(self.treatment_budget);
        if d == 0.0 {
            return 0.0;
        }
        let n = self.neighborhoods as f64;
        n * zeta / (2.0 * d) * (x - self.treatment_budget / n)
    }

    fn phi(&self, x: f64, zeta: f64) -> f64 {
        let d = self.d_y.unwrap_or(self.prevention_budget);
        if d == 0.0 {
            return 0.0;
        }
        let n = self.neighborhoods as f64;
        n * zeta / (2.0 * d) * (x - self.prevention_budget / n)
    }

    /// Derivative for treatment and prevention intensities applied as-is.
    pub fn transition(&self, state: &[f64], treatment: f64, prevention: f64) -> Result<[f64; 6]> {
        if treatment < 0.0 || prevention < 0.0 {
            return Err(Error::Domain(
                "vehicle allocations must be non-negative".into(),
            ));
        }
        let mut out = [0.0; 6];
        self.flow(state, treatment, prevention, &mut out);
        Ok(out)
    }

    #[inline]
    fn flow(&self, m: &[f64], x1: f64, x2: f64, out: &mut [f64]) {
        let r = &self.rates;
        let (s, w, a, ap, i) = (m[0], m[1], m[2], m[3], m[4]);
        let pressure = i + a + ap;
        let clear_f = r.rho_f * (r.zeta_f + self.psi(x1, r.zeta_f)) * a;
        let congest_f = (1.0 - r.rho_f) * (r.zeta_f + self.phi(x2, r.zeta_f)) * a;
        let clear_w = r.rho_w * (r.zeta_w + self.psi(x1, r.zeta_w)) * ap;
        let congest_w = (1.0 - r.rho_w) * (r.zeta_w + self.phi(x2, r.zeta_w)) * ap;
        let d_s = -r.alpha_f * s * pressure - r.beta_f * s + clear_f;
        let d_a = r.beta_f * s - clear_f - congest_f;
        let d_w = -r.alpha_w * w * pressure - r.beta_w * w + clear_w;
        let d_ap = r.beta_w * w - clear_w - congest_w;
        let d_r = r.theta * i;
        out[0] = d_s;
        out[1] = d_w;
        out[2] = d_a;
        out[3] = d_ap;
        out[5] = d_r;
        out[4] = -(d_s + d_w + d_a + d_ap + d_r);
    }

    pub(crate) fn scale_parameters(&mut self, factor: &mut impl FnMut() -> f64) {
        let r = &mut self.rates;
        for v in [
            &mut r.alpha_f,
            &mut r.beta_f,
            &mut r.rho_f,
            &mut r.zeta_f,
            &mut r.alpha_w,
            &mut r.beta_w,
            &mut r.rho_w,
            &mut r.zeta_w,
            &mut r.theta,
        ] {
            *v *= factor();
        }
    }
}

impl Dynamics for Sair2 {
    fn dim(&self) -> usize {
        6
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
        self.flow(state, control[0], control[1], out);
    }

    fn running_cost(&self, _t: f64, m: &[f64]) -> f64 {
        self.c_congested * m[4] + self.c_accident * m[2] + self.c_accident_roadwork * m[3]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn west() -> Sair2 {
        Sair2::new(Sair2::city_rates("morning", "West").unwrap(), 5, 10.0, 5.0)
    }

    #[test]
    fn table_row_morning_west() {
        let r = Sair2::city_rates("morning", "west").unwrap();
        assert_eq!(r.alpha_f, 0.531);
        assert_eq!(r.beta_f, 0.578);
        assert_eq!(r.rho_f, 1.126);
        assert_eq!(r.zeta_f, 0.569);
        assert_eq!(r.alpha_w, 3.966);
        assert_eq!(r.beta_w, 1.585);
        assert_eq!(r.rho_w, 0.411);
        assert_eq!(r.zeta_w, 4.835);
        assert_eq!(r.theta, 10.354);
        assert_eq!(CITY_RATES.len(), 15);
    }

    #[test]
    fn accident_inflow_at_neutral_allocation() {
        let m = west();
        let d = m
            .transition(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 2.0, 1.0)
            .unwrap();
        assert!((d[2] - 0.578).abs() < 1e-12);
    }

    #[test]
    fn even_split_zeroes_interventions() {
        let m = west();
        assert_eq!(m.psi(10.0 / 5.0, 0.7), 0.0);
        assert_eq!(m.phi(5.0 / 5.0, 0.7), 0.0);
    }

    #[test]
    fn zero_budget_disables_intervention() {
        let m = Sair2::new(Sair2::city_rates("evening", "East").unwrap(), 5, 0.0, 0.0);
        assert_eq!(m.psi(3.0, 1.0), 0.0);
    }

    proptest! {
        #[test]
        fn six_derivatives_sum_to_zero(
            state in proptest::collection::vec(0.0f64..1.0, 6),
            x1 in 0.0f64..5.0,
            x2 in 0.0f64..5.0,
            row in 0usize..15,
        ) {
            let m = Sair2::new(CITY_RATES[row].2, 5, 10.0, 5.0);
            let d = m.transition(&state, x1, x2).unwrap();
            prop_assert!(d.iter().sum::<f64>().abs() < 1e-12);
        }
    }
}
