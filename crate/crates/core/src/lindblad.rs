//! Dense Lindblad steady states for one two-level atom coupled to one
//! cavity mode.
//!
//! H = −δ_a σ†σ − δ_c a†a + g(a†σ + σ†a) + H_drive, in the frame rotating at
//! the drive frequency, with δ_x = ω_drive − ω_x. The drive is either
//! ε(a + a†)-type on the cavity or (Ω/2)(σ + σ†) on the atom.
//!
//! Collapse channels: √(2κ)·a for cavity loss (κ is the field HWHM, so the
//! photon number decays at 2κ) and √γ·σ for spontaneous emission.
//!
//! The steady state is the normalized null vector of the vectorized
//! Liouvillian, found by replacing one equation with the trace condition and
//! solving the resulting dense system.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optics::{coupling_at, AtomPosition, Transmittance};
use crate::params::SystemParams;

/// Population allowed in the highest retained Fock level.
pub const TOP_LEVEL_LIMIT: f64 = 1e-6;
pub const MAX_FOCK_CUTOFF: usize = 12;

/// Fraction of the intracavity photon loss leaving through the output
/// mirror of a symmetric cavity.
pub const OUTPUT_FRACTION: f64 = 0.5;

/// Cavity drive strength relative to κ used for linear-response probing.
pub const WEAK_DRIVE_RATIO: f64 = 1e-6;

const HERMITICITY_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveTarget {
    Atom,
    Cavity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladModel {
    /// Highest retained photon number.
    pub fock_cutoff: usize,
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// ε for a cavity drive, Rabi frequency Ω for an atom drive.
    pub drive_amplitude: Complex64,
    pub drive_target: DriveTarget,
    /// ω_drive − ω_a.
    pub detuning_atom: f64,
    /// ω_drive − ω_c.
    pub detuning_cavity: f64,
}

impl LindbladModel {
    pub fn cavity_driven(
        params: &SystemParams,
        g: f64,
        epsilon: f64,
        detuning_atom: f64,
        detuning_cavity: f64,
    ) -> Self {
        Self {
            fock_cutoff: 3,
            g,
            kappa: params.kappa,
            gamma: params.gamma,
            drive_amplitude: Complex64::new(epsilon, 0.0),
            drive_target: DriveTarget::Cavity,
            detuning_atom,
            detuning_cavity,
        }
    }

    pub fn atom_driven(
        params: &SystemParams,
        g: f64,
        rabi: f64,
        detuning_atom: f64,
        detuning_cavity: f64,
    ) -> Self {
        Self {
            drive_amplitude: Complex64::new(rabi, 0.0),
            drive_target: DriveTarget::Atom,
            ..Self::cavity_driven(params, g, 0.0, detuning_atom, detuning_cavity)
        }
    }

    pub fn with_cutoff(mut self, fock_cutoff: usize) -> Self {
        self.fock_cutoff = fock_cutoff;
        self
    }

    /// Hilbert-space dimension, atom ⊗ Fock.
    pub fn dim(&self) -> usize {
        2 * (self.fock_cutoff + 1)
    }

    fn validate(&self) -> Result<()> {
        if self.fock_cutoff < 2 || self.fock_cutoff > MAX_FOCK_CUTOFF {
            return Err(Error::InvalidParameter {
                name: "fock_cutoff",
                value: self.fock_cutoff as f64,
                reason: "must lie in 2..=12",
            });
        }
        for (name, v) in [("kappa", self.kappa), ("gamma", self.gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        Ok(())
    }

    /// Basis index of |atom, n⟩; atom 0 is ground, 1 is excited.
    fn index(&self, atom: usize, n: usize) -> usize {
        atom * (self.fock_cutoff + 1) + n
    }

    fn annihilation(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut a = DMatrix::zeros(d, d);
        for s in 0..2 {
            for n in 1..=self.fock_cutoff {
                a[(self.index(s, n - 1), self.index(s, n))] = Complex64::new((n as f64).sqrt(), 0.0);
            }
        }
        a
    }

    fn lowering(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut sm = DMatrix::zeros(d, d);
        for n in 0..=self.fock_cutoff {
            sm[(self.index(0, n), self.index(1, n))] = Complex64::new(1.0, 0.0);
        }
        sm
    }

    /// Hamiltonian with every rate divided by `scale`.
    fn hamiltonian(&self, scale: f64) -> DMatrix<Complex64> {
        let a = self.annihilation();
        let sm = self.lowering();
        let ad = a.adjoint();
        let sp = sm.adjoint();
        let c = |x: f64| Complex64::new(x / scale, 0.0);
        let mut h = (&sp * &sm) * c(-self.detuning_atom)
            + (&ad * &a) * c(-self.detuning_cavity)
            + (&ad * &sm + &sp * &a) * c(self.g);
        let amp = self.drive_amplitude / scale;
        match self.drive_target {
            DriveTarget::Cavity => h += &ad * amp + &a * amp.conj(),
            DriveTarget::Atom => h += (&sp * amp + &sm * amp.conj()) * Complex64::new(0.5, 0.0),
        }
        h
    }

    /// Vectorized generator (column stacking, ρ_ij at i + j·d) in units of
    /// `scale`.
    fn liouvillian(&self, scale: f64) -> DMatrix<Complex64> {
        let d = self.dim();
        let i_unit = Complex64::new(0.0, 1.0);
        let collapse = [
            self.annihilation() * Complex64::new((2.0 * self.kappa / scale).sqrt(), 0.0),
            self.lowering() * Complex64::new((self.gamma / scale).sqrt(), 0.0),
        ];
        // K = −iH − ½ Σ C†C;  L = I⊗K + K̄⊗I + Σ C̄⊗C
        let mut k = self.hamiltonian(scale) * (-i_unit);
        for c in &collapse {
            k -= c.adjoint() * c * Complex64::new(0.5, 0.0);
        }
        let mut l = DMatrix::zeros(d * d, d * d);
        for j in 0..d {
            for i in 0..d {
                let row = i + j * d;
                for m in 0..d {
                    let kim = k[(i, m)];
                    if kim != Complex64::new(0.0, 0.0) {
                        l[(row, m + j * d)] += kim;
                    }
                    let kjm = k[(j, m)];
                    if kjm != Complex64::new(0.0, 0.0) {
                        l[(row, i + m * d)] += kjm.conj();
                    }
                }
            }
        }
        for c in &collapse {
            let nz: Vec<(usize, usize, Complex64)> = (0..d)
                .flat_map(|r| (0..d).map(move |s| (r, s)))
                .filter_map(|(r, s)| {
                    let v = c[(r, s)];
                    (v != Complex64::new(0.0, 0.0)).then_some((r, s, v))
                })
                .collect();
            for &(i, kk, cik) in &nz {
                for &(j, ll, cjl) in &nz {
                    l[(i + j * d, kk + ll * d)] += cik * cjl.conj();
                }
            }
        }
        l
    }
}

/// Normalized steady-state density matrix with diagnostics from the solve.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub density_matrix: DMatrix<Complex64>,
    pub fock_cutoff: usize,
    pub hermiticity_error: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

impl SteadyState {
    fn index(&self, atom: usize, n: usize) -> usize {
        atom * (self.fock_cutoff + 1) + n
    }

    pub fn photon_number(&self) -> f64 {
        let mut acc = 0.0;
        for s in 0..2 {
            for n in 0..=self.fock_cutoff {
                let i = self.index(s, n);
                acc += n as f64 * self.density_matrix[(i, i)].re;
            }
        }
        acc
    }

    /// ⟨a⟩ = Tr(aρ).
    pub fn field(&self) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for s in 0..2 {
            for n in 1..=self.fock_cutoff {
                acc += (n as f64).sqrt() * self.density_matrix[(self.index(s, n), self.index(s, n - 1))];
            }
        }
        acc
    }

    pub fn excited_population(&self) -> f64 {
        (0..=self.fock_cutoff)
            .map(|n| {
                let i = self.index(1, n);
                self.density_matrix[(i, i)].re
            })
            .sum()
    }

    pub fn top_level_population(&self) -> f64 {
        (0..2)
            .map(|s| {
                let i = self.index(s, self.fock_cutoff);
                self.density_matrix[(i, i)].re
            })
            .sum()
    }
}

/// Steady state at the model's own cutoff.
pub fn steady_state(model: &LindbladModel) -> Result<SteadyState> {
    model.validate()?;
    let d = model.dim();
    let scale = model.kappa;
    let mut l = model.liouvillian(scale);
    // replace the (0,0) population equation with Tr ρ = 1
    for c in 0..d * d {
        l[(0, c)] = Complex64::new(0.0, 0.0);
    }
    for i in 0..d {
        l[(0, i + i * d)] = Complex64::new(1.0, 0.0);
    }
    let mut rhs = DVector::zeros(d * d);
    rhs[0] = Complex64::new(1.0, 0.0);
    let sol = l
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular Liouvillian".into()))?;
    if sol.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite steady state".into()));
    }

    let raw = DMatrix::from_fn(d, d, |i, j| sol[i + j * d]);
    let hermiticity_error = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| (raw[(i, j)] - raw[(j, i)].conj()).norm())
        .fold(0.0, f64::max);
    let rho = (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
    let trace_error = (rho.trace() - Complex64::new(1.0, 0.0)).norm();
    let min_eigenvalue = rho
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);

    if hermiticity_error > HERMITICITY_TOL
        || trace_error > TRACE_TOL
        || min_eigenvalue < -POSITIVITY_TOL
    {
        return Err(Error::Numerical(format!(
            "steady state violates invariants: hermiticity {hermiticity_error:.2e}, \
             trace {trace_error:.2e}, min eigenvalue {min_eigenvalue:.2e}"
        )));
    }

    let ss = SteadyState {
        density_matrix: rho,
        fock_cutoff: model.fock_cutoff,
        hermiticity_error,
        trace_error,
        min_eigenvalue,
    };
    let top = ss.top_level_population();
    if top >= TOP_LEVEL_LIMIT {
        return Err(Error::CutoffInadequate {
            cutoff: model.fock_cutoff,
            top_population: top,
        });
    }
    Ok(ss)
}

/// Steady state, raising the cutoff from the model's value until the top
/// Fock level is empty enough.
pub fn steady_state_adaptive(model: &LindbladModel) -> Result<SteadyState> {
    let mut m = *model;
    loop {
        match steady_state(&m) {
            Err(Error::CutoffInadequate { .. }) if m.fock_cutoff < MAX_FOCK_CUTOFF => {
                m.fock_cutoff += 1;
            }
            other => return other,
        }
    }
}

/// Photon rate leaving through the output mirror, OUTPUT_FRACTION · 2κ⟨a†a⟩.
///
/// In the decoupled case g = 0 nothing reaches the cavity; use
/// [`free_space_scattering_rate`] there.
pub fn fluorescence_rate(model: &LindbladModel) -> Result<f64> {
    if model.drive_target != DriveTarget::Atom {
        return Err(Error::InvalidParameter {
            name: "drive_target",
            value: 0.0,
            reason: "fluorescence needs an atom-driven model",
        });
    }
    if model.drive_amplitude.norm() == 0.0 {
        return Ok(0.0);
    }
    let ss = steady_state_adaptive(model)?;
    Ok(OUTPUT_FRACTION * 2.0 * model.kappa * ss.photon_number())
}

/// γ·⟨σ†σ⟩, photons scattered out of the side of the cavity.
pub fn free_space_scattering_rate(model: &LindbladModel) -> Result<f64> {
    let ss = steady_state_adaptive(model)?;
    Ok(model.gamma * ss.excited_population())
}

/// σ₋ transmittance from the master equation with a weak cavity drive:
/// ⟨a⟩ with the atom over ⟨a⟩ for the empty cavity.
pub fn master_transmittance(
    delta_atom: f64,
    delta_cavity: f64,
    g: f64,
    params: &SystemParams,
) -> Result<Transmittance> {
    let eps = WEAK_DRIVE_RATIO * params.kappa;
    let with = steady_state(&LindbladModel::cavity_driven(params, g, eps, delta_atom, delta_cavity))?;
    let without = steady_state(&LindbladModel::cavity_driven(params, 0.0, eps, delta_atom, delta_cavity))?;
    Ok(Transmittance::new(with.field() / without.field()))
}

/// Random drop positions across the intersection of the excitation beam
/// (propagating along x, waist `excitation_waist` in y–z) with the cavity
/// mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionAveraging {
    pub samples: usize,
    pub seed: u64,
    pub excitation_waist: f64,
}

impl Default for PositionAveraging {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 0,
            excitation_waist: 24e-6,
        }
    }
}

impl PositionAveraging {
    /// (coupling, Rabi-frequency scale) for each sampled drop position.
    fn sites(&self, params: &SystemParams) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let we = self.excitation_waist;
        let w0 = params.waist;
        let half_y = w0.min(we);
        (0..self.samples)
            .map(|_| {
                let x = rng.random_range(-w0..w0);
                let y = rng.random_range(-half_y..half_y);
                let z = rng.random_range(-we..we);
                let g = coupling_at(&AtomPosition::new(x, y, z), params);
                let field = (-(y * y + z * z) / (we * we)).exp();
                (g, field)
            })
            .collect()
    }
}

/// Unnormalized cavity-output fluorescence rate (1/s) at each excitation
/// detuning, one solver result per point.
///
/// The excitation Rabi frequency is `params.rabi · √power_scale`. The cavity
/// is taken resonant with the excitation light, as in the probing sequence.
/// With `params.g0 == 0` the free-space scattering rate stands in for the
/// (vanishing) cavity output.
pub fn fluorescence_rates(
    params: &SystemParams,
    power_scale: f64,
    detunings: &[f64],
    averaging: Option<&PositionAveraging>,
) -> Result<Vec<Result<f64>>> {
    if detunings.is_empty() {
        return Err(Error::EmptyInput("detuning grid"));
    }
    if !(power_scale >= 0.0 && power_scale.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "power_scale",
            value: power_scale,
            reason: "must be finite and non-negative",
        });
    }
    params.validate()?;
    let rabi = params.rabi * power_scale.sqrt();
    let sites = match averaging {
        Some(avg) => avg.sites(params),
        None => vec![(params.g0, 1.0)],
    };
    let decoupled = params.g0 == 0.0;

    Ok(detunings
        .par_iter()
        .map(|&delta| {
            let mut acc = 0.0;
            for &(g, field) in &sites {
                let model = LindbladModel::atom_driven(params, g, rabi * field, delta, 0.0);
                acc += if decoupled {
                    free_space_scattering_rate(&model)?
                } else {
                    fluorescence_rate(&model)?
                };
            }
            Ok(acc / sites.len() as f64)
        })
        .collect())
}

/// Excitation-detuning lineshape of the cavity-output fluorescence,
/// normalized to its own maximum. Fails if any point fails.
pub fn fluorescence_lineshape(
    params: &SystemParams,
    power_scale: f64,
    detunings: &[f64],
    averaging: Option<&PositionAveraging>,
) -> Result<Vec<f64>> {
    let raw = fluorescence_rates(params, power_scale, detunings, averaging)?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let peak = raw.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::Numerical("fluorescence vanishes on the whole grid".into()));
    }
    Ok(raw.into_iter().map(|v| v / peak).collect())
}

/// Full width at half maximum of a sampled single-peaked curve, by linear
/// interpolation of the half-maximum crossings. `None` if the curve does not
/// fall below half its maximum on both sides.
pub fn fwhm(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return None;
    }
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    let half = ymax / 2.0;
    let cross = |i0: usize, i1: usize| {
        let t = (half - y[i0]) / (y[i1] - y[i0]);
        x[i0] + t * (x[i1] - x[i0])
    };
    let left = (1..=imax).rev().find(|&i| y[i - 1] < half).map(|i| cross(i - 1, i))?;
    let right = (imax..y.len() - 1).find(|&i| y[i + 1] < half).map(|i| cross(i, i + 1))?;
    Some(right - left)
}
