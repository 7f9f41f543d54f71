//! Maximum-rotation search and cavity-parameter scans.

use std::f64::consts::FRAC_PI_4;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optics::{rotation_angle_tuned, Tuning};
use crate::params::{to_khz, to_mhz, CavityAnchor, SystemParams};

/// Coarse detuning grid points for [`max_rotation`].
pub const COARSE_POINTS: usize = 2001;
/// Half-width of the coarse grid in units of κ + g₀ + γ.
pub const GRID_SPAN: f64 = 6.0;
const GOLDEN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxRotation {
    /// Signed rotation at the optimum (rad).
    pub angle: f64,
    /// Probe detuning of the optimum (rad/s).
    pub delta_star: f64,
    /// The coarse grid had more structure than the expected peak pair, or
    /// the maximum sat on the grid edge.
    pub warning: bool,
}

impl MaxRotation {
    pub fn magnitude(&self) -> f64 {
        self.angle.abs()
    }
}

/// Largest |θ(δ)| for an atom at the antinode, found on a coarse grid and
/// refined by golden-section search.
pub fn max_rotation(params: &SystemParams, tuning: Tuning) -> Result<MaxRotation> {
    max_rotation_with_grid(params, tuning, COARSE_POINTS)
}

pub fn max_rotation_with_grid(params: &SystemParams, tuning: Tuning, points: usize) -> Result<MaxRotation> {
    params.validate()?;
    if points < 5 {
        return Err(Error::InvalidParameter {
            name: "grid points",
            value: points as f64,
            reason: "need at least 5 detuning points",
        });
    }
    let theta = |d: f64| rotation_angle_tuned(tuning, d, params.g0, params);
    let span = GRID_SPAN * (params.kappa + params.g0 + params.gamma);
    let step = 2.0 * span / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| -span + i as f64 * step).collect();
    let vals = grid.iter().map(|&d| theta(d).map(f64::abs)).collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[best] {
            best = i;
        }
    }
    if vals[best] == 0.0 {
        return Ok(MaxRotation {
            angle: 0.0,
            delta_star: 0.0,
            warning: false,
        });
    }
    let local_maxima = (1..points - 1)
        .filter(|&i| vals[i] > vals[i - 1] && vals[i] >= vals[i + 1])
        .count();
    let at_edge = best == 0 || best == points - 1;
    let warning = at_edge || local_maxima > 2;
    if at_edge {
        return Ok(MaxRotation {
            angle: theta(grid[best])?,
            delta_star: grid[best],
            warning,
        });
    }

    let (a, b) = (grid[best - 1], grid[best + 1]);
    let d = golden_max(|x| theta(x).map(f64::abs).unwrap_or(f64::NEG_INFINITY), a, b, GOLDEN_TOL * span);
    let (delta_star, angle) = if theta(d)?.abs() >= vals[best] {
        (d, theta(d)?)
    } else {
        (grid[best], theta(grid[best])?)
    };
    Ok(MaxRotation {
        angle,
        delta_star,
        warning,
    })
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub axis: f64,
    /// |θ| at the optimum (rad).
    pub max_angle: f64,
    pub delta_star: f64,
    pub g0: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub warning: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    /// `length_um` or `reflectivity`.
    pub axis_name: &'static str,
    pub tuning: Tuning,
    pub grid_points: usize,
    pub points: Vec<ScanPoint>,
}

impl ScanResult {
    pub fn argmax(&self) -> Option<&ScanPoint> {
        self.points
            .iter()
            .fold(None, |acc: Option<&ScanPoint>, p| match acc {
                Some(q) if q.max_angle >= p.max_angle => Some(q),
                _ => Some(p),
            })
    }

    pub fn max_angle(&self) -> f64 {
        self.argmax().map_or(0.0, |p| p.max_angle)
    }

    pub fn axis(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.axis).collect()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.max_angle).collect()
    }

    /// Nearest point to `axis` value.
    pub fn point_near(&self, axis: f64) -> Option<&ScanPoint> {
        self.points.iter().min_by(|a, b| {
            (a.axis - axis).abs().total_cmp(&(b.axis - axis).abs())
        })
    }

    /// One row per point. The axis column is in μm for length scans.
    pub fn write_csv<W: Write + ?Sized>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "axis,max_angle_deg,delta_star_mhz,g0_mhz,kappa_mhz,gamma_khz")?;
        for p in &self.points {
            let axis = if self.axis_name == "length_um" { p.axis * 1e6 } else { p.axis };
            writeln!(
                out,
                "{:.9},{:.6},{:.6},{:.6},{:.6},{:.6}",
                axis,
                p.max_angle.to_degrees(),
                to_mhz(p.delta_star),
                to_mhz(p.g0),
                to_mhz(p.kappa),
                to_khz(p.gamma)
            )?;
        }
        Ok(())
    }
}

fn scan<F>(axis_name: &'static str, values: &[f64], tuning: Tuning, params_at: F) -> Result<ScanResult>
where
    F: Fn(f64) -> Result<SystemParams> + Sync,
{
    if values.is_empty() {
        return Err(Error::EmptyInput("scan grid"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let points = sorted
        .par_iter()
        .map(|&v| {
            let p = params_at(v)?;
            let m = max_rotation(&p, tuning)?;
            Ok(ScanPoint {
                axis: v,
                max_angle: m.magnitude(),
                delta_star: m.delta_star,
                g0: p.g0,
                kappa: p.kappa,
                gamma: p.gamma,
                warning: m.warning,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult {
        axis_name,
        tuning,
        grid_points: COARSE_POINTS,
        points,
    })
}

/// Maximum rotation versus cavity length at the anchor reflectivity.
pub fn scan_length(anchor: &CavityAnchor, lengths: &[f64], tuning: Tuning) -> Result<ScanResult> {
    scan("length_um", lengths, tuning, |l| {
        anchor.scaled_params(&anchor.geometry.with_length(l))
    })
}

/// Maximum rotation versus mirror reflectivity at the anchor length.
pub fn scan_reflectivity(anchor: &CavityAnchor, reflectivities: &[f64], tuning: Tuning) -> Result<ScanResult> {
    for &r in reflectivities {
        if !(r > 0.999 && r < 1.0) {
            return Err(Error::InvalidParameter {
                name: "reflectivity",
                value: r,
                reason: "scan range is (0.999, 1)",
            });
        }
    }
    scan("reflectivity", reflectivities, tuning, |r| {
        anchor.scaled_params(&anchor.geometry.with_reflectivity(r))
    })
}

/// 50 μm to 1 mm, log-spaced, with the 150 μm anchor included.
pub fn default_length_grid() -> Vec<f64> {
    let (lo, hi, n) = (50e-6f64, 1e-3f64, 40);
    let mut v: Vec<f64> = (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    v.push(150e-6);
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    v
}

/// 0.9999 to 0.99999, uniform in log(1 − ρ), with 0.999972 included.
pub fn default_reflectivity_grid() -> Vec<f64> {
    let (lo, hi, n) = (1e-4f64, 1e-5f64, 31);
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 - lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    v.push(0.999972);
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    v
}

/// Rotation needed for each spin state so the two output polarizations
/// end up orthogonal.
pub const CNOT_TARGET: f64 = FRAC_PI_4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnotReport {
    /// Best |θ| for one spin state (rad).
    pub max_angle: f64,
    pub delta_star: f64,
    /// Angle between the output polarizations for ↑ and ↓, 2|θ| (rad).
    pub polarization_difference: f64,
    pub feasible: bool,
}

/// At zero bias field both spin states couple, rotating the probe by ±θ.
/// Feasible when |θ| reaches 45° within `tolerance`.
pub fn cnot_feasibility(params: &SystemParams, tuning: Tuning, tolerance: f64) -> Result<CnotReport> {
    let m = max_rotation(params, tuning)?;
    let theta_down = m.angle;
    let theta_up = -theta_down;
    Ok(CnotReport {
        max_angle: m.magnitude(),
        delta_star: m.delta_star,
        polarization_difference: (theta_down - theta_up).abs(),
        feasible: m.magnitude() >= CNOT_TARGET - tolerance,
    })
}
