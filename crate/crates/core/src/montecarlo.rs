//! Falling atoms, coincidence selection and trajectory averaging.
//!
//! Coordinates follow [`AtomPosition`]: z along the cavity axis, y vertical.
//! Atoms fall along −y. The excitation beam propagates along x and has a
//! Gaussian intensity profile in y–z.
//!
//! Every candidate atom draws from its own ChaCha stream (master seed, stream
//! index = candidate number), so results do not depend on the thread count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measurement::detection_prob_down;
use crate::optics::{
    angle_from_counts, coupling_at, propagate, transmittance, AtomPosition, PolarizationField,
    Transmittance, BALANCED_ANALYZER,
};
use crate::params::SystemParams;

/// Below this acceptance fraction the sampler gives up.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
/// Candidates tried before the acceptance check applies.
const MIN_TRIES_FOR_CHECK: usize = 100_000;
const BATCH: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    /// Fall speed along −y (m/s).
    pub v_fall: f64,
    /// rms of √(v_x² + v_z²) (m/s).
    pub v_transverse_rms: f64,
    /// Averaging window after selection (s).
    pub window: f64,
    /// Time step for window averages (s).
    pub time_step: f64,
    pub seed: u64,
}

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            v_fall: 0.3,
            v_transverse_rms: 0.04,
            window: 34e-6,
            time_step: 0.5e-6,
            seed: 0,
        }
    }
}

impl MotionModel {
    /// 4 μs probe window used for the conditional-population measurement.
    pub fn probe() -> Self {
        Self {
            window: 4e-6,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("window", self.window),
            ("time_step", self.time_step),
        ];
        for (name, value) in checks {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be positive",
                });
            }
        }
        for (name, value) in [("v_fall", self.v_fall), ("v_transverse_rms", self.v_transverse_rms)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be non-negative",
                });
            }
        }
        Ok(())
    }

    /// Sample times 0, dt, 2dt, … up to the window (inclusive).
    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.window / self.time_step + 1e-9).floor() as usize;
        (0..=n).map(|i| i as f64 * self.time_step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceConfig {
    /// Two clicks closer than this select the atom (s).
    pub window: f64,
    /// Detected photon rate for an atom at the mode and beam center (1/s).
    pub rate_max: f64,
    /// 1/e² intensity radius of the excitation beam (m).
    pub excitation_waist: f64,
    /// Candidate atoms start uniformly on a disc of this radius, in units
    /// of the cavity waist.
    pub source_radius: f64,
    /// Start height above the mode axis, in units of the cavity waist.
    pub start_height: f64,
}

impl Default for CoincidenceConfig {
    fn default() -> Self {
        Self {
            window: 600e-9,
            rate_max: 7.6e5,
            excitation_waist: 24e-6,
            source_radius: 2.0,
            start_height: 3.0,
        }
    }
}

impl CoincidenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0) {
            return Err(Error::InvalidParameter {
                name: "coincidence window",
                value: self.window,
                reason: "must be positive",
            });
        }
        if !(self.rate_max >= 0.0 && self.rate_max.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "rate_max",
                value: self.rate_max,
                reason: "must be non-negative",
            });
        }
        for (name, value) in [
            ("excitation_waist", self.excitation_waist),
            ("source_radius", self.source_radius),
            ("start_height", self.start_height),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be positive",
                });
            }
        }
        Ok(())
    }

    /// Detected click rate at `pos`: rate_max·(g/g₀)²·exp(−2(y² + z²)/w_e²).
    pub fn click_rate(&self, pos: &AtomPosition, params: &SystemParams) -> f64 {
        if self.rate_max == 0.0 || params.g0 == 0.0 {
            return 0.0;
        }
        let u = coupling_at(pos, params) / params.g0;
        let we2 = self.excitation_waist * self.excitation_waist;
        self.rate_max * u * u * (-2.0 * (pos.y * pos.y + pos.z * pos.z) / we2).exp()
    }
}

/// Straight-line motion from the selection point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    pub r0: AtomPosition,
    /// Velocity (m/s) as (v_x, v_y, v_z).
    pub v: [f64; 3],
}

impl Trajectory {
    /// Atom at rest at the mode center.
    pub fn pinned() -> Self {
        Self {
            r0: AtomPosition::default(),
            v: [0.0; 3],
        }
    }

    pub fn at(&self, t: f64) -> AtomPosition {
        AtomPosition::new(
            self.r0.x + self.v[0] * t,
            self.r0.y + self.v[1] * t,
            self.r0.z + self.v[2] * t,
        )
    }

    pub fn is_finite(&self) -> bool {
        [self.r0.x, self.r0.y, self.r0.z, self.v[0], self.v[1], self.v[2]]
            .iter()
            .all(|v| v.is_finite())
    }
}

pub fn pinned_ensemble(n: usize) -> Vec<Trajectory> {
    vec![Trajectory::pinned(); n]
}

fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A candidate atom at the start height, before any selection.
fn draw_candidate(
    rng: &mut ChaCha8Rng,
    motion: &MotionModel,
    coinc: &CoincidenceConfig,
    params: &SystemParams,
) -> Trajectory {
    let radius = coinc.source_radius * params.waist;
    let r = radius * rng.random::<f64>().sqrt();
    let ang = std::f64::consts::TAU * rng.random::<f64>();
    let sigma = motion.v_transverse_rms / std::f64::consts::SQRT_2;
    let (vx, vz) = if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        (normal.sample(rng), normal.sample(rng))
    } else {
        (0.0, 0.0)
    };
    Trajectory {
        r0: AtomPosition::new(r * ang.cos(), coinc.start_height * params.waist, r * ang.sin()),
        v: [vx, -motion.v_fall, vz],
    }
}

/// Click times on `traj` over [0, duration), by thinning a homogeneous
/// process at `rate_max`.
pub fn click_times(
    traj: &Trajectory,
    duration: f64,
    coinc: &CoincidenceConfig,
    params: &SystemParams,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut out = Vec::new();
    if coinc.rate_max <= 0.0 {
        return out;
    }
    let exp = Exp::new(coinc.rate_max).expect("positive rate");
    let mut t = 0.0;
    loop {
        t += exp.sample(rng);
        if t >= duration {
            return out;
        }
        let accept = coinc.click_rate(&traj.at(t), params) / coinc.rate_max;
        if rng.random::<f64>() < accept {
            out.push(t);
        }
    }
}

/// Time of the second click of the first pair closer than the window.
fn first_coincidence(
    traj: &Trajectory,
    duration: f64,
    coinc: &CoincidenceConfig,
    params: &SystemParams,
    rng: &mut impl Rng,
) -> Option<f64> {
    if coinc.rate_max <= 0.0 {
        return None;
    }
    let exp = Exp::new(coinc.rate_max).expect("positive rate");
    let mut t = 0.0;
    let mut last: Option<f64> = None;
    loop {
        t += exp.sample(rng);
        if t >= duration {
            return None;
        }
        let accept = coinc.click_rate(&traj.at(t), params) / coinc.rate_max;
        if rng.random::<f64>() < accept {
            if matches!(last, Some(prev) if t - prev < coinc.window) {
                return Some(t);
            }
            last = Some(t);
        }
    }
}

/// P(at least two events) for a Poisson count with mean `lambda`.
pub fn two_event_probability(lambda: f64) -> f64 {
    1.0 - (-lambda).exp() * (1.0 + lambda)
}

/// ∫ click rate dt over [t0, t1] along `traj` (Simpson, `steps` even).
pub fn expected_clicks(
    traj: &Trajectory,
    t0: f64,
    t1: f64,
    coinc: &CoincidenceConfig,
    params: &SystemParams,
    steps: usize,
) -> f64 {
    let n = steps.max(2) + steps % 2;
    let h = (t1 - t0) / n as f64;
    let f = |t: f64| coinc.click_rate(&traj.at(t), params);
    let mut s = f(t0) + f(t1);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(t0 + i as f64 * h);
    }
    s * h / 3.0
}

fn transit_time(motion: &MotionModel, coinc: &CoincidenceConfig, params: &SystemParams) -> Result<f64> {
    if motion.v_fall <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "v_fall",
            value: motion.v_fall,
            reason: "candidate atoms must fall through the mode",
        });
    }
    Ok(2.0 * coinc.start_height * params.waist / motion.v_fall)
}

/// Coincidence-selected atoms, each starting at its selecting click.
///
/// Candidates are processed in fixed-size batches in parallel and accepted
/// in candidate order, so the output depends only on the seed.
pub fn sample_selected_trajectories(
    motion: &MotionModel,
    coinc: &CoincidenceConfig,
    params: &SystemParams,
    n: usize,
) -> Result<Vec<Trajectory>> {
    sample_selected_with_stats(motion, coinc, params, n).map(|(t, _)| t)
}

/// As [`sample_selected_trajectories`], also returning the number of
/// candidates tried.
pub fn sample_selected_with_stats(
    motion: &MotionModel,
    coinc: &CoincidenceConfig,
    params: &SystemParams,
    n: usize,
) -> Result<(Vec<Trajectory>, usize)> {
    if n == 0 {
        return Err(Error::EmptyInput("trajectory count"));
    }
    motion.validate()?;
    coinc.validate()?;
    params.validate()?;
    let duration = transit_time(motion, coinc, params)?;
    let mut out = Vec::with_capacity(n);
    let mut tried = 0usize;
    while out.len() < n {
        let start = tried as u64;
        let batch: Vec<Option<Trajectory>> = (0..BATCH as u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream_rng(motion.seed, start + k);
                let cand = draw_candidate(&mut rng, motion, coinc, params);
                first_coincidence(&cand, duration, coinc, params, &mut rng).map(|t| Trajectory {
                    r0: cand.at(t),
                    v: cand.v,
                })
            })
            .collect();
        for sel in batch {
            tried += 1;
            if let Some(tr) = sel {
                out.push(tr);
                if out.len() == n {
                    break;
                }
            }
        }
        if out.len() < n
            && tried >= MIN_TRIES_FOR_CHECK
            && (out.len() as f64) < MIN_ACCEPTANCE * tried as f64
        {
            return Err(Error::AcceptanceTooLow {
                accepted: out.len(),
                tried,
            });
        }
    }
    Ok((out, tried))
}

/// Candidate atoms with no selection, taken where they cross the height of
/// the mode axis.
pub fn sample_unselected(
    motion: &MotionModel,
    coinc: &CoincidenceConfig,
    params: &SystemParams,
    n: usize,
) -> Result<Vec<Trajectory>> {
    if n == 0 {
        return Err(Error::EmptyInput("trajectory count"));
    }
    motion.validate()?;
    coinc.validate()?;
    let t_cross = transit_time(motion, coinc, params)? / 2.0;
    // separate stream range from the selected sampler
    let offset = 1u64 << 62;
    Ok((0..n as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(motion.seed, offset + k);
            let cand = draw_candidate(&mut rng, motion, coinc, params);
            Trajectory {
                r0: cand.at(t_cross),
                v: cand.v,
            }
        })
        .collect())
}

/// Ensemble mean of |g(r0)|/g₀.
pub fn mean_relative_coupling(trajs: &[Trajectory], params: &SystemParams) -> f64 {
    if trajs.is_empty() || params.g0 == 0.0 {
        return 0.0;
    }
    trajs.iter().map(|t| coupling_at(&t.r0, params).abs()).sum::<f64>() / (trajs.len() as f64 * params.g0)
}

/// Ensemble mean of (g(r0)/g₀)².
pub fn mean_relative_coupling_sq(trajs: &[Trajectory], params: &SystemParams) -> f64 {
    if trajs.is_empty() || params.g0 == 0.0 {
        return 0.0;
    }
    trajs
        .iter()
        .map(|t| (coupling_at(&t.r0, params) / params.g0).powi(2))
        .sum::<f64>()
        / trajs.len() as f64
}

/// Mean of `f(T(δ, g(r(t))))` over the window samples and the ensemble,
/// reduced in trajectory order.
fn ensemble_mean<F>(
    trajs: &[Trajectory],
    motion: &MotionModel,
    delta: f64,
    params: &SystemParams,
    f: F,
) -> Result<Vec<f64>>
where
    F: Fn(&Transmittance) -> Vec<f64> + Sync,
{
    if trajs.is_empty() {
        return Err(Error::EmptyInput("trajectory ensemble"));
    }
    motion.validate()?;
    let times = motion.sample_times();
    let per_traj: Vec<Vec<f64>> = trajs
        .par_iter()
        .map(|tr| {
            let mut acc: Vec<f64> = Vec::new();
            for &t in &times {
                let g = coupling_at(&tr.at(t), params);
                let v = f(&transmittance(delta, g, params));
                if acc.is_empty() {
                    acc = v;
                } else {
                    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
                }
            }
            acc
        })
        .collect();
    let norm = (times.len() * trajs.len()) as f64;
    let mut total = vec![0.0; per_traj[0].len()];
    for v in per_traj {
        total.iter_mut().zip(v).for_each(|(a, b)| *a += b);
    }
    Ok(total.into_iter().map(|s| s / norm).collect())
}

/// √⟨|T₋|²⟩ over window and ensemble.
pub fn average_transmittance(
    trajs: &[Trajectory],
    motion: &MotionModel,
    delta: f64,
    params: &SystemParams,
) -> Result<f64> {
    Ok(ensemble_mean(trajs, motion, delta, params, |t| vec![t.t_minus.norm_sqr()])?[0].sqrt())
}

/// Mean PBS port intensities (transmission, reflection) at the balanced
/// analyzer.
pub fn average_port_intensities(
    trajs: &[Trajectory],
    motion: &MotionModel,
    delta: f64,
    params: &SystemParams,
) -> Result<(f64, f64)> {
    let m = ensemble_mean(trajs, motion, delta, params, |t| {
        let (a, b) = propagate(&PolarizationField::x_polarized(), t).port_intensities(BALANCED_ANALYZER);
        vec![a, b]
    })?;
    Ok((m[0], m[1]))
}

/// Rotation angle from averaged port intensities, for each detuning.
pub fn average_rotation(
    trajs: &[Trajectory],
    motion: &MotionModel,
    deltas: &[f64],
    params: &SystemParams,
) -> Result<Vec<f64>> {
    deltas
        .iter()
        .map(|&d| {
            let (n_t, n_r) = average_port_intensities(trajs, motion, d, params)?;
            angle_from_counts(n_t, n_r)
        })
        .collect()
}

/// ⟨P(φ|↓)⟩ over window and ensemble.
pub fn average_detection_prob_down(
    trajs: &[Trajectory],
    motion: &MotionModel,
    phi: f64,
    delta: f64,
    params: &SystemParams,
) -> Result<f64> {
    Ok(ensemble_mean(trajs, motion, delta, params, |t| vec![detection_prob_down(phi, t)])?[0])
}

/// CSV with header `x_um,y_um,z_um,vx_m_s,vy_m_s,vz_m_s,g_over_g0`.
pub fn write_trajectories_csv<W: Write + ?Sized>(
    out: &mut W,
    trajs: &[Trajectory],
    params: &SystemParams,
) -> std::io::Result<()> {
    writeln!(out, "x_um,y_um,z_um,vx_m_s,vy_m_s,vz_m_s,g_over_g0")?;
    for t in trajs {
        let u = if params.g0 == 0.0 {
            0.0
        } else {
            coupling_at(&t.r0, params) / params.g0
        };
        writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            t.r0.x * 1e6,
            t.r0.y * 1e6,
            t.r0.z * 1e6,
            t.v[0],
            t.v[1],
            t.v[2],
            u
        )?;
    }
    Ok(())
}
