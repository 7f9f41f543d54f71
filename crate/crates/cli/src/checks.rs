//! Invariant suite behind `faraday validate`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use faraday_cavity::lindblad::{master_transmittance, steady_state, LindbladModel};
use faraday_cavity::measurement::{
    conditional_population, kraus, no_click_population, Port,
};
use faraday_cavity::optics::{transmittance, transmittance_detuned, Transmittance};
use faraday_cavity::params::{mhz, SystemParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ORACLE_TOL: f64 = 1e-6;
pub const ALGEBRA_TOL: f64 = 1e-12;
pub const STATE_TOL: f64 = 1e-10;
pub const RANDOM_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: &'static str, measured: f64, tolerance: f64) -> Self {
        Self {
            name,
            measured,
            tolerance,
            pass: measured.is_finite() && measured < tolerance,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<34} measured {:.3e}  tolerance {:.1e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance
        )
    }
}

/// 25 detunings across |δ| ≤ 2π × 6 MHz.
pub fn oracle_detunings() -> Vec<f64> {
    (0..25).map(|i| mhz(-6.0 + 0.5 * i as f64)).collect()
}

/// Largest relative deviation of the master-equation transmittance from
/// the closed form, probe resonant with the cavity.
pub fn weak_drive_oracle_error(params: &SystemParams) -> f64 {
    oracle_detunings()
        .into_iter()
        .map(|d| match master_transmittance(d, 0.0, params.g0, params) {
            Ok(t) => {
                let exact = transmittance(d, params.g0, params).t_minus;
                (t.t_minus - exact).norm() / exact.norm()
            }
            Err(_) => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

pub fn two_detuning_oracle_error(params: &SystemParams) -> f64 {
    let points = [(-2.0, 1.0), (0.5, -0.5), (1.3, 1.3), (-1.37, -1.37), (3.0, 0.0)];
    points
        .iter()
        .map(|&(da, dc)| {
            let (da, dc) = (mhz(da), mhz(dc));
            match master_transmittance(da, dc, params.g0, params) {
                Ok(t) => {
                    let exact = transmittance_detuned(da, dc, params.g0, params).t_minus;
                    (t.t_minus - exact).norm() / exact.norm()
                }
                Err(_) => f64::INFINITY,
            }
        })
        .fold(0.0, f64::max)
}

/// max over draws of |M†M + M'†M' − I| for the two PBS ports.
pub fn completeness_error(rng: &mut impl Rng) -> f64 {
    (0..RANDOM_DRAWS)
        .map(|_| {
            let theta = rng.random_range(-PI..PI);
            let phi = rng.random_range(-PI..PI);
            let m = kraus(theta, phi);
            let e = m.effect();
            let f = m.partner().effect();
            (e[0] + f[0] - 1.0).abs().max((e[1] + f[1] - 1.0).abs())
        })
        .fold(0.0, f64::max)
}

/// max over draws of the off-identity part of M(−θ)_{Δ−θ} M(θ)_Δ.
pub fn reversal_error(rng: &mut impl Rng) -> f64 {
    (0..RANDOM_DRAWS)
        .map(|_| {
            let theta = rng.random_range(-PI..PI);
            let delta = rng.random_range(-PI..PI);
            let prod = kraus(-theta, delta - theta).after(&kraus(theta, delta));
            let expected = delta.cos() * (delta - theta).cos();
            (prod[0].re - expected)
                .abs()
                .max((prod[1].re - expected).abs())
                .max(prod[0].im.abs())
                .max(prod[1].im.abs())
        })
        .fold(0.0, f64::max)
}

/// max over draws of |Σ_outcomes P(outcome) P(↓|outcome) − prior|, the
/// outcomes being a click at either port or the photon being lost.
pub fn total_probability_error(rng: &mut impl Rng) -> f64 {
    (0..RANDOM_DRAWS)
        .map(|_| {
            let prior = rng.random_range(0.0..=1.0);
            let phi = rng.random_range(-PI..PI);
            let r: f64 = rng.random_range(0.0..=1.0);
            let arg = rng.random_range(-PI..PI);
            let t = Transmittance::new(Complex64::from_polar(r, arg));
            let mut acc = 0.0;
            for port in [Port::Transmitted, Port::Reflected] {
                if let Ok(c) = conditional_population(prior, phi, &t, port) {
                    acc += c.click_probability * c.p_down_given_click;
                }
            }
            if let Ok((p, w)) = no_click_population(prior, &t) {
                acc += w * p;
            }
            (acc - prior).abs()
        })
        .fold(0.0, f64::max)
}

/// Hermiticity and trace errors of a moderately driven steady state.
pub fn steady_state_error(params: &SystemParams) -> f64 {
    let m = LindbladModel::cavity_driven(params, params.g0, 0.2 * params.kappa, mhz(0.7), 0.0).with_cutoff(6);
    match steady_state(&m) {
        Ok(s) => s.hermiticity_error.max(s.trace_error),
        Err(_) => f64::INFINITY,
    }
}

pub fn run_checks(params: &SystemParams, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let projection = {
        let t = transmittance(mhz(-1.1), params.g0, params);
        match conditional_population(0.5, FRAC_PI_2, &t, Port::Transmitted) {
            Ok(c) => (c.p_down_given_click - 1.0).abs(),
            Err(_) => f64::INFINITY,
        }
    };
    vec![
        Check::below("weak-drive transmittance oracle", weak_drive_oracle_error(params), ORACLE_TOL),
        Check::below("two-detuning oracle", two_detuning_oracle_error(params), ORACLE_TOL),
        Check::below("steady-state hermiticity/trace", steady_state_error(params), STATE_TOL),
        Check::below("kraus completeness", completeness_error(&mut rng), ALGEBRA_TOL),
        Check::below("reversal proportional to identity", reversal_error(&mut rng), ALGEBRA_TOL),
        Check::below("total probability", total_probability_error(&mut rng), ALGEBRA_TOL),
        Check::below("projection at 90 deg", projection, f64::EPSILON),
    ]
}
