//! Ancilla-assisted measurement of the spin through single photon clicks.
//!
//! A photon detected behind an analyzer at angle φ acts on the spin with the
//! diagonal Kraus operator M(θ)_φ = diag(⟨φ|0⟩, ⟨φ|θ⟩) = diag(cos φ, cos(φ − θ))
//! in the {↑, ↓} basis, where θ is the polarization rotation produced by the
//! |↓⟩ state. The reflected port of the PBS corresponds to φ + π/2.
//!
//! When the transmitted light is elliptical the pure-rotation picture no
//! longer applies; [`conditional_population`] uses the click probabilities
//! P(φ|↑) = cos²φ and P(φ|↓) = |e^{-iφ}T₋ + e^{iφ}T₊|²/4 with Bayes' rule.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::montecarlo::{average_detection_prob_down, MotionModel, Trajectory};
use crate::optics::{transmittance, Transmittance};
use crate::params::SystemParams;

const NORM_TOL: f64 = 1e-9;
const IMPOSSIBLE_PROB: f64 = 1e-30;

/// Pure spin state α|↑⟩ + β|↓⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinState {
    pub amp_up: Complex64,
    pub amp_down: Complex64,
}

impl SpinState {
    pub fn new(amp_up: Complex64, amp_down: Complex64) -> Result<Self> {
        let s = Self { amp_up, amp_down };
        let n = s.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParameter {
                name: "spin norm",
                value: n,
                reason: "amplitudes must satisfy |α|² + |β|² = 1",
            });
        }
        Ok(s)
    }

    pub fn up() -> Self {
        Self {
            amp_up: Complex64::new(1.0, 0.0),
            amp_down: Complex64::new(0.0, 0.0),
        }
    }

    pub fn down() -> Self {
        Self {
            amp_up: Complex64::new(0.0, 0.0),
            amp_down: Complex64::new(1.0, 0.0),
        }
    }

    /// (|↑⟩ + |↓⟩)/√2, spin along x.
    pub fn plus_x() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amp_up: Complex64::new(h, 0.0),
            amp_down: Complex64::new(h, 0.0),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp_up.norm_sqr() + self.amp_down.norm_sqr()
    }

    pub fn p_up(&self) -> f64 {
        self.amp_up.norm_sqr()
    }

    pub fn p_down(&self) -> f64 {
        self.amp_down.norm_sqr()
    }

    /// |⟨self|other⟩|².
    pub fn fidelity(&self, other: &Self) -> f64 {
        (self.amp_up.conj() * other.amp_up + self.amp_down.conj() * other.amp_down).norm_sqr()
    }
}

/// Diagonal measurement operator diag(⟨φ|0⟩, ⟨φ|θ⟩).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementOperator {
    pub rotation: f64,
    pub basis_angle: f64,
    /// (↑↑, ↓↓) entries.
    pub diag: [Complex64; 2],
}

impl MeasurementOperator {
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let z = Complex64::new(0.0, 0.0);
        [[self.diag[0], z], [z, self.diag[1]]]
    }

    /// Operator for a click at the other PBS port.
    pub fn partner(&self) -> Self {
        kraus(self.rotation, self.basis_angle + FRAC_PI_2)
    }

    /// Diagonal of M†M.
    pub fn effect(&self) -> [f64; 2] {
        [self.diag[0].norm_sqr(), self.diag[1].norm_sqr()]
    }

    /// Diagonal of `self · first`, i.e. `first` applied before `self`.
    pub fn after(&self, first: &Self) -> [Complex64; 2] {
        [self.diag[0] * first.diag[0], self.diag[1] * first.diag[1]]
    }
}

pub fn kraus(theta: f64, phi: f64) -> MeasurementOperator {
    MeasurementOperator {
        rotation: theta,
        basis_angle: phi,
        diag: [
            Complex64::new(phi.cos(), 0.0),
            Complex64::new((phi - theta).cos(), 0.0),
        ],
    }
}

/// Post-measurement state M|ψ⟩/‖M|ψ⟩‖ and the click probability ‖M|ψ⟩‖².
pub fn apply_measurement(state: &SpinState, op: &MeasurementOperator) -> Result<(SpinState, f64)> {
    let up = op.diag[0] * state.amp_up;
    let down = op.diag[1] * state.amp_down;
    let prob = up.norm_sqr() + down.norm_sqr();
    // cos(π/2) is ~6e-17 in floating point, not zero
    if prob <= IMPOSSIBLE_PROB {
        return Err(Error::ImpossibleOutcome);
    }
    let n = prob.sqrt();
    Ok((
        SpinState {
            amp_up: up / n,
            amp_down: down / n,
        },
        prob,
    ))
}

/// P(φ|↓) = |e^{-iφ}T₋ + e^{+iφ}T₊|²/4.
pub fn detection_prob_down(phi: f64, t: &Transmittance) -> f64 {
    (Complex64::from_polar(1.0, -phi) * t.t_minus + Complex64::from_polar(1.0, phi) * t.t_plus)
        .norm_sqr()
        / 4.0
}

/// P(φ|↑) = cos²φ; the |↑⟩ state does not couple to the probe.
pub fn detection_prob_up(phi: f64) -> f64 {
    phi.cos().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Port {
    Transmitted,
    Reflected,
}

impl Port {
    /// Analyzer angle seen by this port when the HWP sets angle φ.
    pub fn analyzer_angle(self, phi: f64) -> f64 {
        match self {
            Port::Transmitted => phi,
            Port::Reflected => phi + FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalResult {
    pub p_down_given_click: f64,
    pub click_probability: f64,
    pub port: Port,
}

/// Bayes update of the ↓ population from the per-state click probabilities
/// at one port. Any common efficiency factor cancels.
pub fn bayes_update(
    p_down_prior: f64,
    p_click_up: f64,
    p_click_down: f64,
    port: Port,
) -> Result<ConditionalResult> {
    if !(0.0..=1.0).contains(&p_down_prior) {
        return Err(Error::InvalidParameter {
            name: "prior",
            value: p_down_prior,
            reason: "probability must lie in [0, 1]",
        });
    }
    let num = p_click_down * p_down_prior;
    let den = p_click_up * (1.0 - p_down_prior) + num;
    if den <= 0.0 {
        return Err(Error::ImpossibleOutcome);
    }
    Ok(ConditionalResult {
        p_down_given_click: num / den,
        click_probability: den,
        port,
    })
}

/// P(↓|φ) after a click at `port`, for an x-polarized probe photon.
pub fn conditional_population(
    p_down_prior: f64,
    phi: f64,
    t: &Transmittance,
    port: Port,
) -> Result<ConditionalResult> {
    let angle = port.analyzer_angle(phi);
    bayes_update(p_down_prior, detection_prob_up(angle), detection_prob_down(angle, t), port)
}

/// Posterior when the photon reached neither detector. Only the |↓⟩ state
/// absorbs, with probability 1 − (1 + |T₋|²)/2.
pub fn no_click_population(p_down_prior: f64, t: &Transmittance) -> Result<(f64, f64)> {
    let lost_down = (1.0 - (t.t_plus.norm_sqr() + t.t_minus.norm_sqr()) / 2.0).max(0.0);
    let r = bayes_update(p_down_prior, 0.0, lost_down, Port::Transmitted)?;
    Ok((r.p_down_given_click, r.click_probability))
}

/// ↓ population after a click with the pure-rotation Kraus operators,
/// for an incoherent prior.
pub fn pure_rotation_population(p_down_prior: f64, theta: f64, phi: f64, port: Port) -> Result<f64> {
    let op = kraus(theta, port.analyzer_angle(phi));
    let [e_up, e_down] = op.effect();
    Ok(bayes_update(p_down_prior, e_up, e_down, port)?.p_down_given_click)
}

/// Conditional ↓ population for both ports over a set of analyzer angles.
#[derive(Debug, Clone, PartialEq)]
pub struct PortCurves {
    pub phi: Vec<f64>,
    pub transmitted: Vec<f64>,
    pub reflected: Vec<f64>,
}

/// Pure-rotation family: θ fixed, populations from the Kraus operators.
pub fn fig5_pure_rotation(prior: f64, theta: f64, phis: &[f64]) -> Result<PortCurves> {
    let curve = |port| {
        phis.iter()
            .map(|&phi| pure_rotation_population(prior, theta, phi, port))
            .collect::<Result<Vec<_>>>()
    };
    Ok(PortCurves {
        phi: phis.to_vec(),
        transmitted: curve(Port::Transmitted)?,
        reflected: curve(Port::Reflected)?,
    })
}

/// Ellipticity-aware curves at probe detuning `delta`. With `motion`, P(φ|↓)
/// is averaged over the trajectory ensemble and the probe window; otherwise
/// the atom sits at an antinode with coupling g₀.
pub fn fig5_curves(
    prior: f64,
    delta: f64,
    params: &SystemParams,
    motion: Option<(&[Trajectory], &MotionModel)>,
    phis: &[f64],
) -> Result<PortCurves> {
    let t = transmittance(delta, params.g0, params);
    let p_down = |angle: f64| -> Result<f64> {
        match motion {
            Some((trajs, model)) => average_detection_prob_down(trajs, model, angle, delta, params),
            None => Ok(detection_prob_down(angle, &t)),
        }
    };
    let mut transmitted = Vec::with_capacity(phis.len());
    let mut reflected = Vec::with_capacity(phis.len());
    for &phi in phis {
        for (port, out) in [(Port::Transmitted, &mut transmitted), (Port::Reflected, &mut reflected)] {
            let angle = port.analyzer_angle(phi);
            let r = bayes_update(prior, detection_prob_up(angle), p_down(angle)?, port)?;
            out.push(r.p_down_given_click);
        }
    }
    Ok(PortCurves {
        phi: phis.to_vec(),
        transmitted,
        reflected,
    })
}
