use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use faraday_cavity::lindblad::{fluorescence_rates, fwhm, PositionAveraging};
use faraday_cavity::measurement::{fig5_curves, fig5_pure_rotation};
use faraday_cavity::montecarlo::{
    average_rotation, average_transmittance, sample_selected_with_stats, write_trajectories_csv,
    CoincidenceConfig, MotionModel, Trajectory,
};
use faraday_cavity::optics::{rotation_angle, transmittance, Tuning};
use faraday_cavity::params::{mhz, to_mhz, SystemParams};
use faraday_cavity::scans::{
    cnot_feasibility, default_length_grid, default_reflectivity_grid, max_rotation,
    scan_length, scan_reflectivity, ScanResult,
};

use crate::checks::run_checks;
use crate::config::{Command, Resolved, MANIFEST_NAME};
use crate::CliError;

/// Fig. 2 excitation powers relative to the 300 nW reference.
pub const FIG2_POWERS: [(&str, f64); 3] = [("1nW", 1.0 / 300.0), ("100nW", 100.0 / 300.0), ("300nW", 1.0)];
pub const FIG5_THETA_DEG: f64 = -10.0;
pub const FIG5_PRIORS: [f64; 3] = [0.75, 0.5, 0.25];
pub const FIG5_DETUNING_MHZ: f64 = -1.1;
pub const FIG5_INSET_PHI_DEG: f64 = 60.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
    /// Human-readable result lines.
    pub summary: Vec<String>,
    /// Points or checks that failed without stopping the run.
    pub failures: usize,
}

pub fn run(r: &Resolved) -> Result<Report, CliError> {
    match r.command {
        Command::Fig2 => cmd_fig2(r),
        Command::Fig4 => cmd_fig4(r),
        Command::Fig5 => cmd_fig5(r),
        Command::Fig6 => cmd_fig6(r),
        Command::Validate => cmd_validate(r),
    }
}

fn numeric(e: faraday_cavity::Error) -> CliError {
    CliError::Numeric(e.to_string())
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn create(r: &Resolved) -> Result<Self, CliError> {
        fs::create_dir_all(&r.out)?;
        let path = r.out.join(MANIFEST_NAME);
        fs::write(&path, r.manifest().to_toml_string())?;
        Ok(Self {
            dir: r.out.clone(),
            files: vec![path],
        })
    }

    fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(fs::File::create(&path)?);
        writeln!(w, "# manifest: {MANIFEST_NAME}")?;
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn with_writer(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(fs::File::create(&path)?);
        writeln!(w, "# manifest: {MANIFEST_NAME}")?;
        f(&mut w)?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }
}

fn deg(x: f64) -> f64 {
    x.to_degrees()
}

fn peak_abs(v: &[f64]) -> (usize, f64) {
    v.iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bv), (i, x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) })
}

pub fn cmd_fig2(r: &Resolved) -> Result<Report, CliError> {
    let system = r.params.system;
    let det = r.grid.values();
    let avg = PositionAveraging {
        samples: r.samples,
        seed: r.seed,
        ..PositionAveraging::default()
    };
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut failures = 0;
    for (label, scale) in FIG2_POWERS {
        let rates = fluorescence_rates(&system, scale, &det, Some(&avg)).map_err(numeric)?;
        let peak = rates.iter().filter_map(|v| v.as_ref().ok()).copied().fold(0.0, f64::max);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (d, rate) in det.iter().zip(&rates) {
            let y = match rate {
                Ok(v) if peak > 0.0 => v / peak,
                Ok(_) => f64::NAN,
                Err(e) => {
                    failures += 1;
                    eprintln!("fig2 {label} at {:.4} MHz: {e}", to_mhz(*d));
                    f64::NAN
                }
            };
            if y.is_finite() {
                xs.push(*d);
                ys.push(y);
            }
            rows.push(format!("{:.6},{:.9},{label}", to_mhz(*d), y));
        }
        let width = fwhm(&xs, &ys).map_or("n/a".to_string(), |w| format!("{:.4} MHz", to_mhz(w)));
        summary.push(format!("{label}: FWHM {width}"));
    }
    let mut out = Output::create(r)?;
    out.csv("fig2.csv", "detuning_mhz,normalized_fluorescence,power_label", rows)?;
    Ok(Report {
        files: out.files,
        summary,
        failures,
    })
}

fn selected(r: &Resolved, motion: &MotionModel) -> Result<(Vec<Trajectory>, usize), CliError> {
    sample_selected_with_stats(motion, &CoincidenceConfig::default(), &r.params.system, r.samples).map_err(numeric)
}

pub fn cmd_fig4(r: &Resolved) -> Result<Report, CliError> {
    let p = r.params.system;
    let det = r.grid.values();
    let motion = MotionModel::default().with_seed(r.seed);
    let (trajs, tried) = selected(r, &motion)?;

    let pinned_t: Vec<f64> = det.iter().map(|&d| transmittance(d, p.g0, &p).t_minus.norm()).collect();
    let avg_t = det
        .iter()
        .map(|&d| average_transmittance(&trajs, &motion, d, &p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(numeric)?;
    let pinned_th = det
        .iter()
        .map(|&d| rotation_angle(d, p.g0, &p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(numeric)?;
    let avg_th = average_rotation(&trajs, &motion, &det, &p).map_err(numeric)?;

    let mut out = Output::create(r)?;
    out.csv(
        "fig4a.csv",
        "detuning_mhz,t_minus_pinned,t_minus_averaged",
        det.iter()
            .zip(pinned_t.iter().zip(&avg_t))
            .map(|(d, (a, b))| format!("{:.6},{:.9},{:.9}", to_mhz(*d), a, b)),
    )?;
    out.csv(
        "fig4b.csv",
        "detuning_mhz,theta_pinned_deg,theta_averaged_deg",
        det.iter()
            .zip(pinned_th.iter().zip(&avg_th))
            .map(|(d, (a, b))| format!("{:.6},{:.6},{:.6}", to_mhz(*d), deg(*a), deg(*b))),
    )?;
    out.with_writer("fig4_trajectories.csv", |w| write_trajectories_csv(w, &trajs, &p))?;

    let (ip, vp) = peak_abs(&pinned_th);
    let (ia, va) = peak_abs(&avg_th);
    let summary = vec![
        format!("selected {} of {} candidate atoms", trajs.len(), tried),
        format!("pinned peak |theta| {:.3} deg at {:.3} MHz", deg(vp), to_mhz(det[ip])),
        format!("averaged peak |theta| {:.3} deg at {:.3} MHz", deg(va), to_mhz(det[ia])),
        format!("averaged/pinned {:.3}", if vp > 0.0 { va / vp } else { 0.0 }),
    ];
    Ok(Report {
        files: out.files,
        summary,
        failures: 0,
    })
}

pub fn fig5_phi_grid() -> Vec<f64> {
    (0..=180).map(|i| (i as f64).to_radians()).collect()
}

pub fn cmd_fig5(r: &Resolved) -> Result<Report, CliError> {
    let p: SystemParams = r.params.system;
    let phis = fig5_phi_grid();
    let theta = FIG5_THETA_DEG.to_radians();

    let mut rows_a = Vec::new();
    for prior in FIG5_PRIORS {
        let c = fig5_pure_rotation(prior, theta, &phis).map_err(numeric)?;
        for i in 0..phis.len() {
            rows_a.push(format!("{:.1},{prior},{:.9},{:.9}", deg(phis[i]), c.transmitted[i], c.reflected[i]));
        }
    }

    let motion = MotionModel::probe().with_seed(r.seed);
    let (trajs, _) = selected(r, &motion)?;
    let delta = mhz(FIG5_DETUNING_MHZ);
    let moving = fig5_curves(0.5, delta, &p, Some((&trajs, &motion)), &phis).map_err(numeric)?;
    let pinned = fig5_curves(0.5, delta, &p, None, &phis).map_err(numeric)?;
    let rows_b = (0..phis.len()).map(|i| {
        format!(
            "{:.1},{:.9},{:.9},{:.9},{:.9}",
            deg(phis[i]),
            moving.transmitted[i],
            moving.reflected[i],
            pinned.transmitted[i],
            pinned.reflected[i]
        )
    });

    let inset_phi = [FIG5_INSET_PHI_DEG.to_radians()];
    let det = r.grid.values();
    let mut rows_inset = Vec::new();
    for &d in &det {
        let c = fig5_curves(0.5, d, &p, Some((&trajs, &motion)), &inset_phi).map_err(numeric)?;
        rows_inset.push(format!("{:.6},{:.9},{:.9}", to_mhz(d), c.transmitted[0], c.reflected[0]));
    }

    let mut out = Output::create(r)?;
    out.csv("fig5a.csv", "phi_deg,prior,transmitted,reflected", rows_a)?;
    out.csv(
        "fig5b.csv",
        "phi_deg,transmitted,reflected,transmitted_pinned,reflected_pinned",
        rows_b,
    )?;
    out.csv("fig5_inset.csv", "detuning_mhz,transmitted,reflected", rows_inset)?;

    let i90 = 90;
    let summary = vec![
        format!("P(down | 90 deg, transmitted) = {}", moving.transmitted[i90]),
        format!(
            "P(down | 0 deg) transmitted {:.4}, reflected {:.4}",
            moving.transmitted[0], moving.reflected[0]
        ),
    ];
    Ok(Report {
        files: out.files,
        summary,
        failures: 0,
    })
}

fn scan_summary(name: &str, s: &ScanResult) -> String {
    let first = s.points.first().map_or(0.0, |p| p.max_angle);
    let last = s.points.last().map_or(0.0, |p| p.max_angle);
    format!(
        "{name}: {:.3} deg at first point, {:.3} deg at last point, maximum {:.3} deg",
        deg(first),
        deg(last),
        deg(s.max_angle())
    )
}

pub fn cmd_fig6(r: &Resolved) -> Result<Report, CliError> {
    let anchor = r.params.anchor();
    let tuning = Tuning::CavityEqualsAtom;
    let by_length = scan_length(&anchor, &default_length_grid(), tuning).map_err(numeric)?;
    let by_refl = scan_reflectivity(&anchor, &default_reflectivity_grid(), tuning).map_err(numeric)?;
    let here = max_rotation(&r.params.system, tuning).map_err(numeric)?;
    let cnot = cnot_feasibility(&r.params.system, tuning, 0.0).map_err(numeric)?;

    let mut out = Output::create(r)?;
    out.with_writer("fig6a.csv", |w| by_length.write_csv(w))?;
    out.with_writer("fig6b.csv", |w| by_refl.write_csv(w))?;
    let warnings = by_length.points.iter().chain(&by_refl.points).filter(|p| p.warning).count();
    let summary = vec![
        format!(
            "present cavity: {:.3} deg at {:.3} MHz",
            deg(here.magnitude()),
            to_mhz(here.delta_star)
        ),
        scan_summary("length scan", &by_length),
        scan_summary("reflectivity scan", &by_refl),
        format!(
            "spin-dependent polarization difference {:.3} deg (target 90), feasible: {}",
            deg(cnot.polarization_difference),
            cnot.feasible
        ),
        format!("detuning searches with warnings: {warnings}"),
    ];
    Ok(Report {
        files: out.files,
        summary,
        failures: 0,
    })
}

pub fn cmd_validate(r: &Resolved) -> Result<Report, CliError> {
    let checks = run_checks(&r.params.system, r.seed);
    let failures = checks.iter().filter(|c| !c.pass).count();
    let mut out = Output::create(r)?;
    out.csv(
        "validate.csv",
        "check,measured,tolerance,pass",
        checks
            .iter()
            .map(|c| format!("{},{:.3e},{:.1e},{}", c.name, c.measured, c.tolerance, c.pass)),
    )?;
    Ok(Report {
        files: out.files,
        summary: checks.iter().map(|c| c.to_string()).collect(),
        failures,
    })
}

/// Reads a CSV written by this tool, skipping the manifest line.
pub fn read_csv(path: &Path) -> std::io::Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap_or_default().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok((header, rows))
}

