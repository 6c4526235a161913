//! Propagation over one modulation period and the periodic steady state.
//!
//! The period `T = 1/f_mod` is split into `N` equal steps. Within step `k`
//! the generator is frozen at the field `ω0 + Ω1·cos(2π f_mod t)` evaluated
//! at the step midpoint (default) or its left endpoint, and the step
//! propagator is `exp(L·Δt)`. The monodromy `Û = U_{N-1}⋯U_0` maps `ρ(0)` to
//! `ρ(T)`; the periodic steady state is its unit-trace fixed point.

use std::f64::consts::TAU;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::density::{is_bright, DensityMatrix};
use crate::error::{require_finite, Error, Result};
use crate::liouville::{Generator, RelaxationSpec, Superoperator};
use crate::spinops::{CMatrix, SpinSystem};

/// Fixed-point residual accepted without falling back to the SVD route.
pub const FIXED_POINT_TOL: f64 = 1e-8;
/// Singular values of `Û - I` below this count towards the null space.
pub const NULL_SPACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    Midpoint,
    LeftEndpoint,
}

impl Sampling {
    fn offset(self) -> f64 {
        match self {
            Sampling::Midpoint => 0.5,
            Sampling::LeftEndpoint => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    /// Static Zeeman frequency ω0.
    pub omega0: f64,
    /// Modulation amplitude Ω1.
    pub omega1: f64,
    /// Modulation frequency in cycles per unit time.
    pub f_mod: f64,
    pub n_steps: usize,
    pub sampling: Sampling,
}

impl DriveSpec {
    pub fn new(omega0: f64, omega1: f64, f_mod: f64, n_steps: usize) -> Self {
        DriveSpec {
            omega0,
            omega1,
            f_mod,
            n_steps,
            sampling: Sampling::Midpoint,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("omega0", self.omega0)?;
        require_finite("omega1", self.omega1)?;
        require_finite("f_mod", self.f_mod)?;
        if self.f_mod <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "f_mod",
                reason: format!("must be positive, got {}", self.f_mod),
            });
        }
        if self.n_steps < 2 {
            return Err(Error::InvalidParameter {
                name: "n_steps",
                reason: format!("must be at least 2, got {}", self.n_steps),
            });
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.f_mod
    }

    pub fn dt(&self) -> f64 {
        self.period() / self.n_steps as f64
    }

    /// Instantaneous Zeeman frequency at time `t`.
    pub fn omega_at(&self, t: f64) -> f64 {
        self.omega0 + self.omega1 * (TAU * self.f_mod * t).cos()
    }

    /// Field used for step `k`, from the phase fraction to avoid drift in `t`.
    pub fn step_omega(&self, k: usize) -> f64 {
        let frac = (k as f64 + self.sampling.offset()) / self.n_steps as f64;
        self.omega0 + self.omega1 * (TAU * frac).cos()
    }
}

/// Step propagators of one period and their ordered product.
#[derive(Debug, Clone)]
pub struct PeriodCache {
    pub drive: DriveSpec,
    pub step_propagators: Vec<Superoperator>,
    pub monodromy: Superoperator,
}

pub fn build_period(
    system: &SpinSystem,
    relax: &RelaxationSpec,
    drive: &DriveSpec,
) -> Result<PeriodCache> {
    drive.validate()?;
    let gen = Generator::new(system, relax)?;
    let dt = drive.dt();
    let step_propagators = (0..drive.n_steps)
        .map(|k| gen.step(drive.step_omega(k), dt))
        .collect::<Result<Vec<_>>>()?;
    let mut product = CMatrix::identity(gen.dim_h().pow(2), gen.dim_h().pow(2));
    for u in &step_propagators {
        product = u.matrix() * product;
    }
    Ok(PeriodCache {
        drive: *drive,
        step_propagators,
        monodromy: Superoperator::from_matrix(gen.dim_h(), product)?,
    })
}

/// Default row of `Û - I` replaced by the trace condition: the last population.
pub fn default_trace_row(dim_h: usize) -> usize {
    (dim_h - 1) * dim_h + (dim_h - 1)
}

fn max_abs(v: impl IntoIterator<Item = Complex64>) -> f64 {
    v.into_iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Maximum elementwise `|(Û - I)ρ|`.
pub fn fixed_point_residual(monodromy: &Superoperator, rho: &DensityMatrix) -> f64 {
    let v = rho.to_vector();
    max_abs((monodromy.apply_vec(&v) - &v).iter().copied())
}

/// Unit-trace fixed point of `monodromy`, replacing row `replaced_row` of
/// `Û - I` by the trace condition.
pub fn solve_fixed_point(monodromy: &Superoperator, replaced_row: usize) -> Result<DensityMatrix> {
    let d = monodromy.dim_h();
    let n = d * d;
    if replaced_row >= n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: replaced_row,
        });
    }
    let m = monodromy.matrix() - CMatrix::identity(n, n);

    let svd = m.clone().svd(false, true);
    let null_dim = svd
        .singular_values
        .iter()
        .filter(|&&s| s < NULL_SPACE_TOL)
        .count();
    if null_dim > 1 {
        return Err(Error::NoUniqueSteadyState { dim: null_dim });
    }

    let mut a = m;
    let trace_row: Vec<usize> = (0..d).map(|i| i * d + i).collect();
    a.row_mut(replaced_row).fill(Complex64::new(0.0, 0.0));
    for &idx in &trace_row {
        a[(replaced_row, idx)] = Complex64::new(1.0, 0.0);
    }
    let mut rhs = DVector::zeros(n);
    rhs[replaced_row] = Complex64::new(1.0, 0.0);

    if let Some(x) = a.lu().solve(&rhs) {
        let rho = hermitian_unit_trace(&x);
        if let Ok(rho) = rho {
            if fixed_point_residual(monodromy, &rho) < FIXED_POINT_TOL {
                return Ok(rho);
            }
        }
    }

    // Fall back to the right singular vector of the smallest singular value.
    let v_t = svd.v_t.ok_or(Error::SingularSystem)?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::SingularSystem)?;
    let x: DVector<Complex64> = v_t.row(idx).transpose().map(|z| z.conj());
    let rho = hermitian_unit_trace(&x)?;
    if fixed_point_residual(monodromy, &rho) < FIXED_POINT_TOL {
        Ok(rho)
    } else {
        Err(Error::SingularSystem)
    }
}

fn hermitian_unit_trace(x: &DVector<Complex64>) -> Result<DensityMatrix> {
    let m = crate::density::unvectorize(x)?;
    let tr = m.trace();
    if tr.norm() < 1e-300 {
        return Err(Error::SingularSystem);
    }
    let m = m / tr;
    DensityMatrix::new((&m + m.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Periodic steady state `ρ(0) = Û ρ(0)` with `tr ρ(0) = 1`.
pub fn periodic_steady_state(cache: &PeriodCache) -> Result<DensityMatrix> {
    steady_state_of(&cache.monodromy)
}

pub fn steady_state_of(monodromy: &Superoperator) -> Result<DensityMatrix> {
    solve_fixed_point(monodromy, default_trace_row(monodromy.dim_h()))
}

/// Stationary state of the unmodulated generator at field `omega0`, the
/// unit-trace null vector of `L(ω0)`.
pub fn static_steady_state(
    system: &SpinSystem,
    relax: &RelaxationSpec,
    omega0: f64,
) -> Result<DensityMatrix> {
    require_finite("omega0", omega0)?;
    let l = Generator::new(system, relax)?.at(omega0);
    // Û = I + L has (Û - I) = L, so its fixed point is the null vector of L.
    steady_state_of(&Superoperator::identity(l.dim_h()).add(&l)?)
}

/// Bright population at `t_k = k·Δt`, `k = 0..N`, starting from `rho0`.
pub fn population_waveform(cache: &PeriodCache, rho0: &DensityMatrix) -> Vec<f64> {
    let mut v = rho0.to_vector();
    let d = rho0.dim();
    let mut out = Vec::with_capacity(cache.step_propagators.len());
    for u in &cache.step_propagators {
        out.push(bright_population_vec(&v, d));
        v = u.apply_vec(&v);
    }
    out
}

fn bright_population_vec(v: &DVector<Complex64>, d: usize) -> f64 {
    (0..d)
        .filter(|&k| is_bright(d, k))
        .map(|k| v[k * d + k].re)
        .sum()
}

/// Monodromy together with the lock-in functionals of one period.
///
/// `x_row · vec(ρ0)` is the cosine quadrature of the bright population that
/// results from starting the period in `ρ0` (sampled at `t_k = k·Δt`), and
/// likewise `y_row` for the sine quadrature. Built in a single pass without
/// retaining the step propagators.
#[derive(Debug, Clone)]
pub struct PeriodResponse {
    pub drive: DriveSpec,
    pub monodromy: Superoperator,
    x_row: DVector<Complex64>,
    y_row: DVector<Complex64>,
}

impl PeriodResponse {
    pub fn new(gen: &Generator, drive: &DriveSpec) -> Result<Self> {
        drive.validate()?;
        let d = gen.dim_h();
        let n = d * d;
        let dt = drive.dt();
        let bright: Vec<usize> = (0..d)
            .filter(|&k| is_bright(d, k))
            .map(|k| k * d + k)
            .collect();
        let mut product = CMatrix::identity(n, n);
        let mut x_row = DVector::zeros(n);
        let mut y_row = DVector::zeros(n);
        let scale = 1.0 / drive.n_steps as f64;
        for k in 0..drive.n_steps {
            let (s, c) = (TAU * k as f64 / drive.n_steps as f64).sin_cos();
            for &b in &bright {
                for col in 0..n {
                    let p = product[(b, col)];
                    x_row[col] += p * (c * scale);
                    y_row[col] += p * (s * scale);
                }
            }
            let u = gen.step_matrix(drive.step_omega(k), dt)?;
            product = u * product;
        }
        Ok(PeriodResponse {
            drive: *drive,
            monodromy: Superoperator::from_matrix(d, product)?,
            x_row,
            y_row,
        })
    }

    /// `(X, Y)` of the waveform generated by starting the period in `rho0`.
    pub fn quadratures(&self, rho0: &DensityMatrix) -> (f64, f64) {
        let v = rho0.to_vector();
        (self.x_row.dot(&v).re, self.y_row.dot(&v).re)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub omega: f64,
    pub population: f64,
}

/// Step-by-step evolution over `n_periods` periods from `rho0`.
///
/// Emits the initial sample at `t = 0` and one sample after every step.
pub fn time_trace(
    system: &SpinSystem,
    relax: &RelaxationSpec,
    drive: &DriveSpec,
    rho0: &DensityMatrix,
    n_periods: usize,
) -> Result<Vec<TracePoint>> {
    drive.validate()?;
    let gen = Generator::new(system, relax)?;
    if rho0.dim() != gen.dim_h() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim_h(),
            found: rho0.dim(),
        });
    }
    let dt = drive.dt();
    let steps = (0..drive.n_steps)
        .map(|k| gen.step_matrix(drive.step_omega(k), dt))
        .collect::<Result<Vec<_>>>()?;
    let d = rho0.dim();
    let mut v = rho0.to_vector();
    let mut out = Vec::with_capacity(n_periods * drive.n_steps + 1);
    out.push(TracePoint {
        t: 0.0,
        omega: drive.omega_at(0.0),
        population: bright_population_vec(&v, d),
    });
    for p in 0..n_periods {
        for (k, u) in steps.iter().enumerate() {
            v = u * v;
            let step = p * drive.n_steps + k + 1;
            let t = step as f64 * dt;
            out.push(TracePoint {
                t,
                omega: drive.omega_at(t),
                population: bright_population_vec(&v, d),
            });
        }
    }
    Ok(out)
}

/// Evolves `rho0` from `t_start` to `t_end` under an arbitrary field profile,
/// with the generator frozen at each step midpoint.
pub fn evolve_under_field(
    system: &SpinSystem,
    relax: &RelaxationSpec,
    field: impl Fn(f64) -> f64,
    (t_start, t_end): (f64, f64),
    n_steps: usize,
    rho0: &DensityMatrix,
) -> Result<DensityMatrix> {
    if !matches!(
        t_end.partial_cmp(&t_start),
        Some(std::cmp::Ordering::Greater)
    ) || n_steps == 0
    {
        return Err(Error::InvalidParameter {
            name: "time window",
            reason: format!(
                "need t_end > t_start and n_steps > 0 (got {t_start}..{t_end}, {n_steps})"
            ),
        });
    }
    let gen = Generator::new(system, relax)?;
    let dt = (t_end - t_start) / n_steps as f64;
    let mut v = rho0.to_vector();
    for k in 0..n_steps {
        let t_mid = t_start + (k as f64 + 0.5) * dt;
        v = gen.step_matrix(field(t_mid), dt)? * v;
    }
    DensityMatrix::new(crate::density::unvectorize(&v)?)
}
