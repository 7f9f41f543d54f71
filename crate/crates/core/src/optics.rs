//! Weak-drive steady-state optics of the probe field.
//!
//! The probe is described in the circular basis. The handedness is fixed so
//! that projecting onto a linear analyzer at angle φ from x gives the
//! amplitude (e^{-iφ}·a₋ + e^{+iφ}·a₊)/√2, i.e. σ± = (x̂ ± iŷ)/√2. With that
//! choice the port probability for an x-polarized input reproduces
//! |e^{-iφ}T₋ + e^{+iφ}T₊|²/4 exactly, and a pure rotation T₋ = e^{iχ}
//! turns the polarization by +χ/2.
//!
//! The PBS transmission port analyzes along φ and the reflection port along
//! φ + π/2.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_1_SQRT_2};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Transmission-port analyzer angle for the rotation measurement. Balances
/// the two ports for x-polarized light and makes the count estimator return
/// +θ for a rotation by +θ.
pub const BALANCED_ANALYZER: f64 = -FRAC_PI_4;

/// Two-component Jones vector in the circular basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationField {
    pub amp_plus: Complex64,
    pub amp_minus: Complex64,
}

impl PolarizationField {
    pub fn new(amp_plus: Complex64, amp_minus: Complex64) -> Self {
        Self {
            amp_plus,
            amp_minus,
        }
    }

    /// Unit-power linear polarization along x.
    pub fn x_polarized() -> Self {
        Self::linear(0.0)
    }

    /// Unit-power linear polarization at `angle` from x.
    pub fn linear(angle: f64) -> Self {
        Self {
            amp_plus: Complex64::from_polar(FRAC_1_SQRT_2, -angle),
            amp_minus: Complex64::from_polar(FRAC_1_SQRT_2, angle),
        }
    }

    pub fn intensity(&self) -> f64 {
        self.amp_plus.norm_sqr() + self.amp_minus.norm_sqr()
    }

    /// Field amplitude passed by a linear analyzer at `angle` from x.
    pub fn analyzer_amplitude(&self, angle: f64) -> Complex64 {
        (Complex64::from_polar(1.0, -angle) * self.amp_minus
            + Complex64::from_polar(1.0, angle) * self.amp_plus)
            * FRAC_1_SQRT_2
    }

    pub fn analyzer_intensity(&self, angle: f64) -> f64 {
        self.analyzer_amplitude(angle).norm_sqr()
    }

    /// Intensities at the (transmitted, reflected) ports of a PBS whose
    /// transmission axis sits at `angle`.
    pub fn port_intensities(&self, angle: f64) -> (f64, f64) {
        (
            self.analyzer_intensity(angle),
            self.analyzer_intensity(angle + FRAC_PI_2),
        )
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.amp_plus * c, self.amp_minus * c)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.amp_plus + other.amp_plus, self.amp_minus + other.amp_minus)
    }
}

/// Complex transmittance of the two circular components, normalized to the
/// empty cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmittance {
    pub t_minus: Complex64,
    pub t_plus: Complex64,
}

impl Transmittance {
    /// σ₋ transmittance with the σ₊ component passing unchanged.
    pub fn new(t_minus: Complex64) -> Self {
        Self {
            t_minus,
            t_plus: Complex64::new(1.0, 0.0),
        }
    }

    pub fn identity() -> Self {
        Self::new(Complex64::new(1.0, 0.0))
    }
}

/// Atom position relative to the mode center; z runs along the cavity axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AtomPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl AtomPosition {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// Relative tuning of probe, cavity and atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tuning {
    /// ω_p = ω_c; the probe detuning from the atom is the only free detuning.
    ProbeEqualsCavity,
    /// ω_c = ω_a; the probe is scanned across both together.
    CavityEqualsAtom,
}

/// g(r) = g₀ exp[−(x² + y²)/w₀²] cos(2πz/λ). Negative past a node.
pub fn coupling_at(pos: &AtomPosition, params: &SystemParams) -> f64 {
    let w2 = params.waist * params.waist;
    params.g0
        * (-(pos.x * pos.x + pos.y * pos.y) / w2).exp()
        * (2.0 * std::f64::consts::PI * pos.z / params.wavelength).cos()
}

/// σ₋ transmittance with the probe resonant with the cavity,
/// T₋ = κ(γ/2 − iδ) / (κ(γ/2 − iδ) + g²), δ = ω_p − ω_a.
pub fn transmittance(delta: f64, g: f64, params: &SystemParams) -> Transmittance {
    transmittance_detuned(delta, 0.0, g, params)
}

/// σ₋ transmittance with independent probe–atom detuning `delta_atom` and
/// probe–cavity detuning `delta_cavity`, normalized to the empty cavity at
/// the same probe frequency:
/// T₋ = (κ − iδ_c)(γ/2 − iδ_a) / ((κ − iδ_c)(γ/2 − iδ_a) + g²).
///
/// The empty-cavity response multiplies both circular components alike, so
/// it drops out of every polarization observable.
pub fn transmittance_detuned(
    delta_atom: f64,
    delta_cavity: f64,
    g: f64,
    params: &SystemParams,
) -> Transmittance {
    let cav = Complex64::new(params.kappa, -delta_cavity);
    let atom = Complex64::new(params.gamma / 2.0, -delta_atom);
    let num = cav * atom;
    Transmittance::new(num / (num + g * g))
}

pub fn transmittance_tuned(
    tuning: Tuning,
    delta: f64,
    g: f64,
    params: &SystemParams,
) -> Transmittance {
    match tuning {
        Tuning::ProbeEqualsCavity => transmittance_detuned(delta, 0.0, g, params),
        Tuning::CavityEqualsAtom => transmittance_detuned(delta, delta, g, params),
    }
}

pub fn propagate(input: &PolarizationField, t: &Transmittance) -> PolarizationField {
    PolarizationField::new(t.t_plus * input.amp_plus, t.t_minus * input.amp_minus)
}

/// Polarization angle from the photon numbers at the PBS transmission and
/// reflection ports, φ = arccos(√(n_T/(n_T + n_R))) − π/4.
///
/// Counts may be expectation values, hence `f64`.
pub fn angle_from_counts(n_t: f64, n_r: f64) -> Result<f64> {
    if !(n_t >= 0.0 && n_r >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "counts",
            value: n_t.min(n_r),
            reason: "photon counts must be non-negative",
        });
    }
    let total = n_t + n_r;
    if total <= 0.0 {
        return Err(Error::InsufficientCounts);
    }
    // arccos(√(n_T/N)) − π/4 rewritten via tan(a − π/4) = (tan a − 1)/(tan a + 1),
    // exact at balance and free of cancellation
    let (st, sr) = (n_t.sqrt(), n_r.sqrt());
    Ok(((sr - st) / (sr + st)).atan())
}

/// Rotation angle read out the way the experiment does: balance the ports
/// without the atom, then apply the count estimator to the expected port
/// intensities with the atom. The no-atom angle is zero by construction.
pub fn rotation_angle_of(t: &Transmittance) -> Result<f64> {
    let out = propagate(&PolarizationField::x_polarized(), t);
    let (n_t, n_r) = out.port_intensities(BALANCED_ANALYZER);
    if n_t + n_r <= 0.0 {
        return Err(Error::ZeroIntensity);
    }
    angle_from_counts(n_t, n_r)
}

/// θ(δ) for a pinned coupling `g` with ω_p = ω_c.
pub fn rotation_angle(delta: f64, g: f64, params: &SystemParams) -> Result<f64> {
    rotation_angle_of(&transmittance(delta, g, params))
}

pub fn rotation_angle_tuned(
    tuning: Tuning,
    delta: f64,
    g: f64,
    params: &SystemParams,
) -> Result<f64> {
    rotation_angle_of(&transmittance_tuned(tuning, delta, g, params))
}

/// Orientation of the polarization-ellipse major axis, ½·arg(T₋/T₊).
/// Agrees with [`rotation_angle_of`] only when |T₋| = |T₊|.
pub fn ellipse_axis_angle(t: &Transmittance) -> f64 {
    0.5 * (t.t_minus / t.t_plus).arg()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{mhz, SystemParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p() -> SystemParams {
        SystemParams::default()
    }

    /// Independent evaluation of the weak-drive σ₋ transmittance in MHz units.
    fn eq1_oracle(delta_mhz: f64, g_mhz: f64) -> Complex64 {
        let (k, gam) = (4.5, 0.182);
        let a = Complex64::new(k * gam / 2.0, -k * delta_mhz);
        a / (a + g_mhz * g_mhz)
    }

    #[test]
    fn coupling_profile() {
        let par = p();
        assert_relative_eq!(coupling_at(&AtomPosition::default(), &par), par.g0);
        let node = AtomPosition::new(0.0, 0.0, par.wavelength / 4.0);
        assert!(coupling_at(&node, &par).abs() < 1e-9 * par.g0);
        let edge = AtomPosition::new(par.waist, 0.0, 0.0);
        assert_relative_eq!(
            coupling_at(&edge, &par) / par.g0,
            (-1.0f64).exp(),
            max_relative = 1e-14
        );
        let past_node = AtomPosition::new(0.0, 0.0, par.wavelength / 2.0);
        assert!(coupling_at(&past_node, &par) < 0.0);
    }

    #[test]
    fn empty_cavity_transmits() {
        for d in [-10.0, -1.0, 0.0, 0.3, 7.0] {
            let t = transmittance(mhz(d), 0.0, &p());
            assert_relative_eq!(t.t_minus.re, 1.0, max_relative = 1e-15);
            assert!(t.t_minus.im.abs() < 1e-15);
        }
    }

    #[test]
    fn resonant_absorptive_point() {
        let t = transmittance(0.0, p().g0, &p()).t_minus;
        assert_relative_eq!(t.re, 0.049_639_372_083, max_relative = 1e-10);
        assert!(t.im.abs() < 1e-15);
    }

    #[test]
    fn one_mhz_point() {
        let t = transmittance(mhz(1.0), p().g0, &p()).t_minus;
        let o = eq1_oracle(1.0, 2.8);
        assert_relative_eq!(t.re, o.re, max_relative = 1e-12);
        assert_relative_eq!(t.im, o.im, max_relative = 1e-12);
        assert_relative_eq!(t.re, 0.2676, max_relative = 1e-3);
        assert_relative_eq!(t.im, -0.3995, max_relative = 1e-3);
        assert_relative_eq!(t.norm(), 0.4809, max_relative = 1e-3);
    }

    #[test]
    fn two_detuning_form_reduces_to_eq1() {
        for d in [-3.0, -0.5, 0.0, 1.2] {
            let a = transmittance(mhz(d), p().g0, &p());
            let b = transmittance_tuned(Tuning::ProbeEqualsCavity, mhz(d), p().g0, &p());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn propagate_identity_and_filter() {
        let x = PolarizationField::x_polarized();
        assert_eq!(propagate(&x, &Transmittance::identity()), x);
        let out = propagate(&x, &Transmittance::new(Complex64::new(0.0, 0.0)));
        assert_eq!(out.amp_minus, Complex64::new(0.0, 0.0));
        assert_relative_eq!(out.intensity(), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn port_intensity_matches_detection_probability_formula() {
        let t = Transmittance::new(Complex64::new(0.268, -0.400));
        let out = propagate(&PolarizationField::x_polarized(), &t);
        assert_relative_eq!(out.analyzer_intensity(0.0), 0.4416, max_relative = 1e-3);
        for i in 0..36 {
            let phi = i as f64 * 0.1;
            let eq4 = (Complex64::from_polar(1.0, -phi) * t.t_minus
                + Complex64::from_polar(1.0, phi) * t.t_plus)
                .norm_sqr()
                / 4.0;
            assert_relative_eq!(out.analyzer_intensity(phi), eq4, max_relative = 1e-12);
        }
    }

    #[test]
    fn linear_states_analyze_as_malus() {
        let f = PolarizationField::linear(0.3);
        for i in 0..10 {
            let a = i as f64 * 0.2;
            assert_relative_eq!(
                f.analyzer_intensity(a),
                (a - 0.3).cos().powi(2),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn count_estimator_values() {
        assert_eq!(angle_from_counts(5.0, 5.0).unwrap(), 0.0);
        assert_relative_eq!(angle_from_counts(7.0, 0.0).unwrap(), -FRAC_PI_4);
        assert_relative_eq!(
            angle_from_counts(3.0, 1.0).unwrap().to_degrees(),
            -15.0,
            epsilon = 1e-12
        );
        assert_eq!(angle_from_counts(0.0, 0.0), Err(Error::InsufficientCounts));
        assert!(angle_from_counts(-1.0, 2.0).is_err());
    }

    #[test]
    fn pure_rotation_reads_back() {
        for chi in [-1.2, -0.4, 0.0, 0.3, 1.1] {
            let t = Transmittance::new(Complex64::from_polar(1.0, chi));
            assert_relative_eq!(rotation_angle_of(&t).unwrap(), chi / 2.0, epsilon = 1e-12);
            assert_relative_eq!(ellipse_axis_angle(&t), chi / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn no_rotation_without_atom_or_on_resonance() {
        for d in [-5.0, -1.0, 0.0, 2.0] {
            assert_eq!(rotation_angle(mhz(d), 0.0, &p()).unwrap(), 0.0);
        }
        for g in [0.5, 1.0, 2.8, 10.0] {
            assert!(rotation_angle(0.0, mhz(g), &p()).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn pinned_maximum_near_21_degrees() {
        let par = p();
        let best = (1..6000)
            .map(|i| rotation_angle(mhz(i as f64 * 1e-3), par.g0, &par).unwrap().abs())
            .fold(0.0, f64::max);
        assert!((best.to_degrees() - 21.1).abs() < 0.5, "max {}", best.to_degrees());
    }

    #[test]
    fn transmission_recovers_far_from_resonance() {
        let par = p();
        let mut prev = 0.0;
        for i in 0..200 {
            let t = transmittance(mhz(i as f64 * 0.5), par.g0, &par).t_minus.norm();
            assert!(t >= prev);
            prev = t;
        }
        assert!(prev > 0.99);
    }

    proptest! {
        #[test]
        fn rotation_is_odd_in_detuning(d in 0.01f64..20.0, g in 0.1f64..6.0) {
            let par = p();
            let a = rotation_angle(mhz(d), mhz(g), &par).unwrap();
            let b = rotation_angle(mhz(-d), mhz(g), &par).unwrap();
            prop_assert!((a + b).abs() < 1e-12);
        }

        #[test]
        fn t_minus_bounded(d in -50.0f64..50.0, g in 0.0f64..10.0) {
            let t = transmittance(mhz(d), mhz(g), &p());
            prop_assert!(t.t_minus.norm() <= 1.0 + 1e-15);
            prop_assert_eq!(t.t_plus.norm(), 1.0);
        }

        #[test]
        fn propagate_is_linear(
            ar in -2.0f64..2.0, ai in -2.0f64..2.0, br in -2.0f64..2.0, bi in -2.0f64..2.0,
            u in proptest::array::uniform4(-1.0f64..1.0),
            v in proptest::array::uniform4(-1.0f64..1.0),
            tr in -1.0f64..1.0, ti in -1.0f64..1.0,
        ) {
            let (a, b) = (Complex64::new(ar, ai), Complex64::new(br, bi));
            let u = PolarizationField::new(Complex64::new(u[0], u[1]), Complex64::new(u[2], u[3]));
            let v = PolarizationField::new(Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3]));
            let t = Transmittance::new(Complex64::new(tr, ti));
            let lhs = propagate(&u.scale(a).add(&v.scale(b)), &t);
            let rhs = propagate(&u, &t).scale(a).add(&propagate(&v, &t).scale(b));
            prop_assert!((lhs.amp_plus - rhs.amp_plus).norm() < 1e-12);
            prop_assert!((lhs.amp_minus - rhs.amp_minus).norm() < 1e-12);
        }

        #[test]
        fn balanced_counts_give_zero(n in 1u64..1_000_000) {
            prop_assert_eq!(angle_from_counts(n as f64, n as f64).unwrap(), 0.0);
        }
    }
}
