use faraday_cavity::lindblad::{self, PositionAveraging};
use faraday_cavity::measurement::{self, Port};
use faraday_cavity::montecarlo::{self, CoincidenceConfig, MotionModel, Trajectory};
use faraday_cavity::optics::{self, Transmittance, Tuning};
use faraday_cavity::params::{self, CavityAnchor, SystemParams};
use faraday_cavity::scans;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(pyfaraday, FaradayError, PyException);

fn err(e: faraday_cavity::Error) -> PyErr {
    FaradayError::new_err(e.to_string())
}

fn tuning(name: &str) -> PyResult<Tuning> {
    match name {
        "probe_equals_cavity" => Ok(Tuning::ProbeEqualsCavity),
        "cavity_equals_atom" => Ok(Tuning::CavityEqualsAtom),
        _ => Err(PyValueError::new_err(format!(
            "tuning must be 'probe_equals_cavity' or 'cavity_equals_atom', got '{name}'"
        ))),
    }
}

fn port(name: &str) -> PyResult<Port> {
    match name {
        "transmitted" => Ok(Port::Transmitted),
        "reflected" => Ok(Port::Reflected),
        _ => Err(PyValueError::new_err(format!(
            "port must be 'transmitted' or 'reflected', got '{name}'"
        ))),
    }
}

/// System rates. Constructor takes MHz/kHz, attributes are in rad/s and m.
#[pyclass(name = "Params", module = "pyfaraday", frozen)]
struct PyParams {
    inner: SystemParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (g0_mhz=2.8, kappa_mhz=4.5, gamma_khz=182.0, zeeman_mhz=71.0, waist_um=19.0, rabi_mhz=1.4))]
    fn new(
        g0_mhz: f64,
        kappa_mhz: f64,
        gamma_khz: f64,
        zeeman_mhz: f64,
        waist_um: f64,
        rabi_mhz: f64,
    ) -> PyResult<Self> {
        let inner = SystemParams {
            g0: params::mhz(g0_mhz),
            kappa: params::mhz(kappa_mhz),
            gamma: params::khz(gamma_khz),
            zeeman_shift: params::mhz(zeeman_mhz),
            waist: waist_um * 1e-6,
            rabi: params::mhz(rabi_mhz),
            ..SystemParams::default()
        };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    /// Parameters from a TOML table such as the `faraday` CLI reads.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let resolved = params::ParamFile::from_toml_str(text)
            .and_then(|f| f.resolve())
            .map_err(err)?;
        Ok(Self { inner: resolved.system })
    }

    #[getter]
    fn g0(&self) -> f64 {
        self.inner.g0
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn waist(&self) -> f64 {
        self.inner.waist
    }

    fn purcell_ratio(&self) -> f64 {
        self.inner.purcell_ratio()
    }

    fn purcell_emission_rate(&self) -> f64 {
        self.inner.purcell_emission_rate()
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(g0_mhz={:.4}, kappa_mhz={:.4}, gamma_khz={:.2})",
            params::to_mhz(self.inner.g0),
            params::to_mhz(self.inner.kappa),
            params::to_khz(self.inner.gamma)
        )
    }
}

/// Coincidence-selected atoms, kept on the Rust side.
#[pyclass(name = "Ensemble", module = "pyfaraday", frozen)]
struct PyEnsemble {
    trajs: Vec<Trajectory>,
    motion: MotionModel,
    tried: usize,
}

#[pymethods]
impl PyEnsemble {
    fn __len__(&self) -> usize {
        self.trajs.len()
    }

    /// Candidates drawn to obtain this ensemble.
    #[getter]
    fn tried(&self) -> usize {
        self.tried
    }

    /// (x, y, z) of each atom `t` seconds after its selecting click.
    fn positions(&self, t: f64) -> Vec<(f64, f64, f64)> {
        self.trajs
            .iter()
            .map(|tr| {
                let p = tr.at(t);
                (p.x, p.y, p.z)
            })
            .collect()
    }

    fn mean_relative_coupling_sq(&self, params: &PyParams) -> f64 {
        montecarlo::mean_relative_coupling_sq(&self.trajs, &params.inner)
    }

    /// Rotation (rad) from port intensities averaged over ensemble and window.
    fn average_rotation(&self, deltas: Vec<f64>, params: &PyParams) -> PyResult<Vec<f64>> {
        montecarlo::average_rotation(&self.trajs, &self.motion, &deltas, &params.inner).map_err(err)
    }

    fn average_transmittance(&self, delta: f64, params: &PyParams) -> PyResult<f64> {
        montecarlo::average_transmittance(&self.trajs, &self.motion, delta, &params.inner).map_err(err)
    }
}

#[pyfunction]
fn mhz(f: f64) -> f64 {
    params::mhz(f)
}

#[pyfunction]
fn to_mhz(omega: f64) -> f64 {
    params::to_mhz(omega)
}

/// σ₋ transmittance. `g` defaults to g0.
#[pyfunction]
#[pyo3(signature = (delta, params, g=None, tuning="probe_equals_cavity"))]
fn transmittance(delta: f64, params: &PyParams, g: Option<f64>, tuning: &str) -> PyResult<Complex64> {
    let g = g.unwrap_or(params.inner.g0);
    Ok(optics::transmittance_tuned(self::tuning(tuning)?, delta, g, &params.inner).t_minus)
}

/// Rotation angle (rad) read out from balanced port counts.
#[pyfunction]
#[pyo3(signature = (delta, params, g=None, tuning="probe_equals_cavity"))]
fn rotation_angle(delta: f64, params: &PyParams, g: Option<f64>, tuning: &str) -> PyResult<f64> {
    let g = g.unwrap_or(params.inner.g0);
    optics::rotation_angle_tuned(self::tuning(tuning)?, delta, g, &params.inner).map_err(err)
}

#[pyfunction]
fn angle_from_counts(n_t: f64, n_r: f64) -> PyResult<f64> {
    optics::angle_from_counts(n_t, n_r).map_err(err)
}

/// (signed angle, detuning, warning) at the rotation maximum.
#[pyfunction]
#[pyo3(signature = (params, tuning="probe_equals_cavity"))]
fn max_rotation(params: &PyParams, tuning: &str) -> PyResult<(f64, f64, bool)> {
    let m = scans::max_rotation(&params.inner, self::tuning(tuning)?).map_err(err)?;
    Ok((m.angle, m.delta_star, m.warning))
}

/// σ₋ transmittance from the weakly driven master equation.
#[pyfunction]
#[pyo3(signature = (delta_atom, delta_cavity, params, g=None))]
fn master_transmittance(delta_atom: f64, delta_cavity: f64, params: &PyParams, g: Option<f64>) -> PyResult<Complex64> {
    let g = g.unwrap_or(params.inner.g0);
    lindblad::master_transmittance(delta_atom, delta_cavity, g, &params.inner)
        .map(|t| t.t_minus)
        .map_err(err)
}

/// Normalized cavity-output fluorescence; `samples > 0` averages over drop
/// positions.
#[pyfunction]
#[pyo3(signature = (params, power_scale, detunings, samples=0, seed=0))]
fn fluorescence_lineshape(
    params: &PyParams,
    power_scale: f64,
    detunings: Vec<f64>,
    samples: usize,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let avg = PositionAveraging {
        samples,
        seed,
        ..PositionAveraging::default()
    };
    let avg = (samples > 0).then_some(&avg);
    lindblad::fluorescence_lineshape(&params.inner, power_scale, &detunings, avg).map_err(err)
}

#[pyfunction]
fn fwhm(x: Vec<f64>, y: Vec<f64>) -> Option<f64> {
    lindblad::fwhm(&x, &y)
}

/// Diagonal of the spin Kraus operator for rotation `theta`, analyzer `phi`.
#[pyfunction]
fn kraus(theta: f64, phi: f64) -> [Complex64; 2] {
    measurement::kraus(theta, phi).diag
}

/// (P(↓ | click), P(click)) for one photon with σ₋ transmittance `t_minus`.
#[pyfunction]
#[pyo3(signature = (prior, phi, t_minus, port="transmitted"))]
fn conditional_population(prior: f64, phi: f64, t_minus: Complex64, port: &str) -> PyResult<(f64, f64)> {
    let c = measurement::conditional_population(prior, phi, &Transmittance::new(t_minus), self::port(port)?)
        .map_err(err)?;
    Ok((c.p_down_given_click, c.click_probability))
}

/// Draw `n` coincidence-selected atoms. `probe=True` uses the short probe
/// window for later averages.
#[pyfunction]
#[pyo3(signature = (params, n, seed=0, rate_max=None, probe=false))]
fn sample_selected(
    params: &PyParams,
    n: usize,
    seed: u64,
    rate_max: Option<f64>,
    probe: bool,
) -> PyResult<PyEnsemble> {
    let motion = if probe { MotionModel::probe() } else { MotionModel::default() }.with_seed(seed);
    let mut coinc = CoincidenceConfig::default();
    if let Some(r) = rate_max {
        coinc.rate_max = r;
    }
    let (trajs, tried) =
        montecarlo::sample_selected_with_stats(&motion, &coinc, &params.inner, n).map_err(err)?;
    Ok(PyEnsemble { trajs, motion, tried })
}

fn scan_rows(r: scans::ScanResult) -> Vec<(f64, f64, f64)> {
    r.points.iter().map(|p| (p.axis, p.max_angle, p.delta_star)).collect()
}

/// (length m, max |θ| rad, detuning) across cavity lengths.
#[pyfunction]
#[pyo3(signature = (lengths=None, tuning="cavity_equals_atom"))]
fn scan_length(lengths: Option<Vec<f64>>, tuning: &str) -> PyResult<Vec<(f64, f64, f64)>> {
    let lengths = lengths.unwrap_or_else(scans::default_length_grid);
    let r = scans::scan_length(&CavityAnchor::default(), &lengths, self::tuning(tuning)?).map_err(err)?;
    Ok(scan_rows(r))
}

/// (reflectivity, max |θ| rad, detuning) across mirror reflectivities.
#[pyfunction]
#[pyo3(signature = (reflectivities=None, tuning="cavity_equals_atom"))]
fn scan_reflectivity(reflectivities: Option<Vec<f64>>, tuning: &str) -> PyResult<Vec<(f64, f64, f64)>> {
    let rs = reflectivities.unwrap_or_else(scans::default_reflectivity_grid);
    let r = scans::scan_reflectivity(&CavityAnchor::default(), &rs, self::tuning(tuning)?).map_err(err)?;
    Ok(scan_rows(r))
}

#[pymodule]
fn pyfaraday(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FaradayError", m.py().get_type::<FaradayError>())?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(mhz, m)?)?;
    m.add_function(wrap_pyfunction!(to_mhz, m)?)?;
    m.add_function(wrap_pyfunction!(transmittance, m)?)?;
    m.add_function(wrap_pyfunction!(rotation_angle, m)?)?;
    m.add_function(wrap_pyfunction!(angle_from_counts, m)?)?;
    m.add_function(wrap_pyfunction!(max_rotation, m)?)?;
    m.add_function(wrap_pyfunction!(master_transmittance, m)?)?;
    m.add_function(wrap_pyfunction!(fluorescence_lineshape, m)?)?;
    m.add_function(wrap_pyfunction!(fwhm, m)?)?;
    m.add_function(wrap_pyfunction!(kraus, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_population, m)?)?;
    m.add_function(wrap_pyfunction!(sample_selected, m)?)?;
    m.add_function(wrap_pyfunction!(scan_length, m)?)?;
    m.add_function(wrap_pyfunction!(scan_reflectivity, m)?)?;
    Ok(())
}
