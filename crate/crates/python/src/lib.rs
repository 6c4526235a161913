//! Python bindings: `import lacsim`.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use lacsim::density::DensityMatrix;
use lacsim::liouville::RelaxationSpec;
use lacsim::periodic::{self, DriveSpec, Sampling};
use lacsim::spinops::{self, SystemKind};
use lacsim::sweep::{self, ConvergenceSpec, DriveBase, OperatingPoint, SweepAxis, SweepPlan};

create_exception!(lacsim, LacsimError, PyValueError);

fn to_py(e: lacsim::Error) -> PyErr {
    LacsimError::new_err(e.to_string())
}

fn matrix_rows(m: &lacsim::spinops::CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn parse_sampling(s: &str) -> PyResult<Sampling> {
    match s {
        "midpoint" => Ok(Sampling::Midpoint),
        "left_endpoint" => Ok(Sampling::LeftEndpoint),
        other => Err(LacsimError::new_err(format!(
            "sampling must be \"midpoint\" or \"left_endpoint\", got {other:?}"
        ))),
    }
}

#[pyclass(name = "SpinSystem", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PySpinSystem(spinops::SpinSystem);

#[pymethods]
impl PySpinSystem {
    #[staticmethod]
    fn single(v: f64) -> PyResult<Self> {
        Self::checked(spinops::SpinSystem::single(v))
    }

    #[staticmethod]
    #[pyo3(signature = (a_iso, v=0.0))]
    fn isotropic(a_iso: f64, v: f64) -> PyResult<Self> {
        Self::checked(spinops::SpinSystem::isotropic(a_iso, v))
    }

    /// `theta_dd` in radians.
    #[staticmethod]
    #[pyo3(signature = (d_dd, theta_dd, v=0.0))]
    fn dipolar(d_dd: f64, theta_dd: f64, v: f64) -> PyResult<Self> {
        Self::checked(spinops::SpinSystem::dipolar(d_dd, theta_dd, v))
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.0.kind {
            SystemKind::SingleSpin => "single",
            SystemKind::TwoSpinIsotropic => "isotropic",
            SystemKind::TwoSpinDipolar => "dipolar",
        }
    }

    #[getter]
    fn v(&self) -> f64 {
        self.0.v_perturbation
    }

    #[getter]
    fn a_iso(&self) -> f64 {
        self.0.a_iso
    }

    #[getter]
    fn d_dd(&self) -> f64 {
        self.0.d_dd
    }

    #[getter]
    fn theta_dd(&self) -> f64 {
        self.0.theta_dd
    }

    #[getter]
    fn hilbert_dim(&self) -> usize {
        self.0.hilbert_dim()
    }

    /// Hamiltonian at instantaneous field `omega`, as nested lists.
    fn hamiltonian(&self, omega: f64) -> PyResult<Vec<Vec<Complex64>>> {
        let h = spinops::hamiltonian_at(&self.0, omega).map_err(to_py)?;
        Ok(matrix_rows(h.matrix()))
    }

    /// Ascending eigenvalues at every field of a sorted grid.
    fn energy_levels(&self, grid: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        spinops::energy_levels(&self.0, &grid).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "SpinSystem(kind={:?}, v={}, a_iso={}, d_dd={}, theta_dd={})",
            self.kind(),
            self.0.v_perturbation,
            self.0.a_iso,
            self.0.d_dd,
            self.0.theta_dd
        )
    }
}

impl PySpinSystem {
    fn checked(s: spinops::SpinSystem) -> PyResult<Self> {
        s.validate().map_err(to_py)?;
        Ok(PySpinSystem(s))
    }
}

#[pyclass(name = "Relaxation", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyRelaxation(RelaxationSpec);

#[pymethods]
impl PyRelaxation {
    #[new]
    #[pyo3(signature = (r1=0.0, r2=0.0, pump_j=0.0, pump_damps_coherence=true))]
    fn new(r1: f64, r2: f64, pump_j: f64, pump_damps_coherence: bool) -> PyResult<Self> {
        let spec = RelaxationSpec {
            r1,
            r2,
            pump_j,
            pump_damps_coherence,
        };
        spec.validate().map_err(to_py)?;
        Ok(PyRelaxation(spec))
    }

    #[getter]
    fn r1(&self) -> f64 {
        self.0.r1
    }

    #[getter]
    fn r2(&self) -> f64 {
        self.0.r2
    }

    #[getter]
    fn pump_j(&self) -> f64 {
        self.0.pump_j
    }

    #[getter]
    fn pump_damps_coherence(&self) -> bool {
        self.0.pump_damps_coherence
    }

    fn __repr__(&self) -> String {
        format!(
            "Relaxation(r1={}, r2={}, pump_j={}, pump_damps_coherence={})",
            self.0.r1,
            self.0.r2,
            self.0.pump_j,
            if self.0.pump_damps_coherence {
                "True"
            } else {
                "False"
            }
        )
    }
}

/// Periodic steady state `ρ(0)` over one modulation period.
#[pyfunction]
#[pyo3(signature = (system, relaxation, omega0, omega1, f_mod, n_steps, sampling="midpoint"))]
#[allow(clippy::too_many_arguments)]
fn periodic_steady_state(
    py: Python<'_>,
    system: &PySpinSystem,
    relaxation: &PyRelaxation,
    omega0: f64,
    omega1: f64,
    f_mod: f64,
    n_steps: usize,
    sampling: &str,
) -> PyResult<Vec<Vec<Complex64>>> {
    let drive = DriveSpec {
        sampling: parse_sampling(sampling)?,
        ..DriveSpec::new(omega0, omega1, f_mod, n_steps)
    };
    let (s, r) = (system.0, relaxation.0);
    let rho = py
        .detach(|| {
            periodic::build_period(&s, &r, &drive).and_then(|c| periodic::periodic_steady_state(&c))
        })
        .map_err(to_py)?;
    Ok(matrix_rows(rho.matrix()))
}

/// Stationary state of the unmodulated system at field `omega0`.
#[pyfunction]
fn static_steady_state(
    system: &PySpinSystem,
    relaxation: &PyRelaxation,
    omega0: f64,
) -> PyResult<Vec<Vec<Complex64>>> {
    let rho = periodic::static_steady_state(&system.0, &relaxation.0, omega0).map_err(to_py)?;
    Ok(matrix_rows(rho.matrix()))
}

/// Bright population along a step-by-step evolution; returns `(t, field, population)`.
#[pyfunction]
#[pyo3(signature = (system, relaxation, omega0, omega1, f_mod, n_steps, n_periods=1, initial="bright", sampling="midpoint"))]
#[allow(clippy::too_many_arguments)]
fn time_trace(
    py: Python<'_>,
    system: &PySpinSystem,
    relaxation: &PyRelaxation,
    omega0: f64,
    omega1: f64,
    f_mod: f64,
    n_steps: usize,
    n_periods: usize,
    initial: &str,
    sampling: &str,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let drive = DriveSpec {
        sampling: parse_sampling(sampling)?,
        ..DriveSpec::new(omega0, omega1, f_mod, n_steps)
    };
    let dim = system.0.hilbert_dim();
    let rho0 = match initial {
        "bright" => DensityMatrix::bright(dim),
        "mixed" => DensityMatrix::maximally_mixed(dim),
        other => {
            return Err(LacsimError::new_err(format!(
                "initial must be \"bright\" or \"mixed\", got {other:?}"
            )))
        }
    }
    .map_err(to_py)?;
    let (s, r) = (system.0, relaxation.0);
    let trace = py
        .detach(|| periodic::time_trace(&s, &r, &drive, &rho0, n_periods))
        .map_err(to_py)?;
    Ok((
        trace.iter().map(|p| p.t).collect(),
        trace.iter().map(|p| p.omega).collect(),
        trace.iter().map(|p| p.population).collect(),
    ))
}

/// `(X, Y)` quadratures of one period sampled at `t_k = k·T/N`.
#[pyfunction]
fn demodulate(waveform: Vec<f64>, f_mod: f64) -> PyResult<(f64, f64)> {
    let p = lacsim::lockin::demodulate(&waveform, f_mod).map_err(to_py)?;
    Ok((p.x, p.y))
}

/// Detector phase in `[0, π)` maximizing the peak-to-peak amplitude, and that amplitude.
#[pyfunction]
fn optimal_phase(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64)> {
    if x.len() != y.len() {
        return Err(LacsimError::new_err("x and y must have equal length"));
    }
    let points: Vec<_> = x
        .iter()
        .zip(&y)
        .map(|(&x, &y)| lacsim::LockinPoint::new(x, y, 0.0))
        .collect();
    lacsim::lockin::optimal_phase_amplitude(&points).map_err(to_py)
}

#[pyclass(name = "Point", frozen, get_all)]
struct PyPoint {
    x: f64,
    y: f64,
    n_used: usize,
    rel_change: f64,
    converged: bool,
}

/// Lock-in quadratures at one operating point with N refined by doubling.
#[pyfunction]
#[pyo3(signature = (system, relaxation, omega0, omega1, f_mod, sampling="midpoint", target_rel_change=0.01, n_start=64, n_max=4_194_304))]
#[allow(clippy::too_many_arguments)]
fn solve_point(
    py: Python<'_>,
    system: &PySpinSystem,
    relaxation: &PyRelaxation,
    omega0: f64,
    omega1: f64,
    f_mod: f64,
    sampling: &str,
    target_rel_change: f64,
    n_start: usize,
    n_max: usize,
) -> PyResult<PyPoint> {
    let point = OperatingPoint {
        system: system.0,
        relax: relaxation.0,
        omega0,
        omega1,
        f_mod,
        sampling: parse_sampling(sampling)?,
    };
    let conv = ConvergenceSpec {
        target_rel_change,
        n_start,
        n_max,
    };
    let c = py
        .detach(|| sweep::converge_n(&point, &conv))
        .map_err(to_py)?;
    Ok(PyPoint {
        x: c.lockin().x,
        y: c.lockin().y,
        n_used: c.n_used,
        rel_change: c.rel_change,
        converged: c.converged,
    })
}

#[pyclass(name = "Spectrum", frozen, get_all)]
struct PySpectrum {
    omega0: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    x_opt: Vec<f64>,
    n_used: Vec<usize>,
    phi_star: Option<f64>,
    peak_to_peak: f64,
    failures: usize,
}

#[pyclass(name = "FmSweep", frozen, get_all)]
struct PyFmSweep {
    f_mod: Vec<f64>,
    peak_to_peak: Vec<f64>,
    phi_star: Vec<Option<f64>>,
    n_used_max: Vec<usize>,
    failures: usize,
}

#[allow(clippy::too_many_arguments)]
fn plan(
    axis: SweepAxis,
    system: &PySpinSystem,
    relaxation: &PyRelaxation,
    grid: Vec<f64>,
    omega1: f64,
    f_mod: f64,
    inner_grid: Option<Vec<f64>>,
    sampling: &str,
    target_rel_change: f64,
    n_start: usize,
    n_max: usize,
) -> PyResult<SweepPlan> {
    Ok(SweepPlan {
        axis,
        grid,
        system: system.0,
        relax: relaxation.0,
        drive: DriveBase {
            omega0: 0.0,
            omega1,
            f_mod,
            sampling: parse_sampling(sampling)?,
        },
        convergence: ConvergenceSpec {
            target_rel_change,
            n_start,
            n_max,
        },
        inner_grid,
        progress: false,
    })
}

/// Lock-in spectrum over an ω0 grid at fixed `f_mod`.
#[pyfunction]
#[pyo3(signature = (system, relaxation, grid, omega1, f_mod, sampling="midpoint", target_rel_change=0.01, n_start=64, n_max=4_194_304))]
#[allow(clippy::too_many_arguments)]
fn field_sweep(
    py: Python<'_>,
    system: &PySpinSystem,
    relaxation: &PyRelaxation,
    grid: Vec<f64>,
    omega1: f64,
    f_mod: f64,
    sampling: &str,
    target_rel_change: f64,
    n_start: usize,
    n_max: usize,
) -> PyResult<PySpectrum> {
    let plan = plan(
        SweepAxis::Omega0,
        system,
        relaxation,
        grid,
        omega1,
        f_mod,
        None,
        sampling,
        target_rel_change,
        n_start,
        n_max,
    )?;
    let spec = py.detach(|| sweep::field_sweep(&plan)).map_err(to_py)?;
    let pick = |f: fn(&sweep::ConvergedPoint) -> f64| -> Vec<f64> {
        spec.rows
            .iter()
            .map(|r| r.outcome.as_ref().map(f).unwrap_or(f64::NAN))
            .collect()
    };
    Ok(PySpectrum {
        omega0: spec.rows.iter().map(|r| r.axis_value).collect(),
        x: pick(|p| p.lockin().x),
        y: pick(|p| p.lockin().y),
        x_opt: spec.rows.iter().map(|r| r.x_opt).collect(),
        n_used: spec
            .rows
            .iter()
            .map(|r| r.outcome.as_ref().map(|p| p.n_used).unwrap_or(0))
            .collect(),
        phi_star: spec.phi_star,
        peak_to_peak: spec.peak_to_peak,
        failures: spec.failures(),
    })
}

/// Peak-to-peak line amplitude against modulation frequency.
#[pyfunction]
#[pyo3(signature = (system, relaxation, grid, omega1, inner_grid=None, sampling="midpoint", target_rel_change=0.01, n_start=64, n_max=4_194_304))]
#[allow(clippy::too_many_arguments)]
fn fm_sweep(
    py: Python<'_>,
    system: &PySpinSystem,
    relaxation: &PyRelaxation,
    grid: Vec<f64>,
    omega1: f64,
    inner_grid: Option<Vec<f64>>,
    sampling: &str,
    target_rel_change: f64,
    n_start: usize,
    n_max: usize,
) -> PyResult<PyFmSweep> {
    let plan = plan(
        SweepAxis::FMod,
        system,
        relaxation,
        grid,
        omega1,
        1.0,
        inner_grid,
        sampling,
        target_rel_change,
        n_start,
        n_max,
    )?;
    let rows = py.detach(|| sweep::fm_sweep(&plan)).map_err(to_py)?;
    Ok(PyFmSweep {
        f_mod: rows.iter().map(|r| r.f_mod).collect(),
        peak_to_peak: rows.iter().map(|r| r.peak_to_peak()).collect(),
        phi_star: rows.iter().map(|r| r.phi_star()).collect(),
        n_used_max: rows.iter().map(|r| r.spectrum.n_used_max()).collect(),
        failures: rows.iter().map(|r| r.spectrum.failures()).sum(),
    })
}

/// Runs a TOML run configuration and returns the CSV text.
#[pyfunction]
fn run_config(py: Python<'_>, toml_text: &str) -> PyResult<String> {
    let config =
        lacsim::cli::parse_config(toml_text).map_err(|e| LacsimError::new_err(e.to_string()))?;
    let out = py
        .detach(|| lacsim::cli::run(&config, false))
        .map_err(|e| LacsimError::new_err(e.to_string()))?;
    Ok(out.csv)
}

#[pymodule]
#[pyo3(name = "lacsim")]
fn lacsim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LacsimError", m.py().get_type::<LacsimError>())?;
    m.add_class::<PySpinSystem>()?;
    m.add_class::<PyRelaxation>()?;
    m.add_class::<PyPoint>()?;
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyFmSweep>()?;
    m.add_function(wrap_pyfunction!(periodic_steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(static_steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(time_trace, m)?)?;
    m.add_function(wrap_pyfunction!(demodulate, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_phase, m)?)?;
    m.add_function(wrap_pyfunction!(solve_point, m)?)?;
    m.add_function(wrap_pyfunction!(field_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(fm_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
