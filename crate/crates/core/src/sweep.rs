//! Field sweeps, modulation-frequency sweeps and per-point N refinement.
//!
//! Every operating point is independent and computed sequentially by a single
//! worker, so results do not depend on the number of threads in the pool the
//! sweep runs on. Results are gathered by grid index.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::liouville::{Generator, RelaxationSpec};
use crate::lockin::{optimal_phase_amplitude, peak_to_peak, rotate_phase, LockinPoint};
use crate::periodic::{fixed_point_residual, steady_state_of, DriveSpec, PeriodResponse, Sampling};
use crate::spinops::SpinSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSpec {
    pub target_rel_change: f64,
    pub n_start: usize,
    pub n_max: usize,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        ConvergenceSpec {
            target_rel_change: 0.01,
            n_start: 64,
            n_max: 4_194_304,
        }
    }
}

impl ConvergenceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_rel_change > 0.0 && self.target_rel_change.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "target_rel_change",
                reason: format!("must be positive, got {}", self.target_rel_change),
            });
        }
        if self.n_start < 4 {
            return Err(Error::InvalidParameter {
                name: "n_start",
                reason: format!("must be at least 4, got {}", self.n_start),
            });
        }
        if self.n_max < self.n_start {
            return Err(Error::InvalidParameter {
                name: "n_max",
                reason: format!("must be >= n_start ({}), got {}", self.n_start, self.n_max),
            });
        }
        Ok(())
    }
}

/// Relative change below which a zero signal counts as converged.
const ZERO_SIGNAL_FLOOR: f64 = 1e-12;

/// One operating point: everything but the step count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub system: SpinSystem,
    pub relax: RelaxationSpec,
    pub omega0: f64,
    pub omega1: f64,
    pub f_mod: f64,
    pub sampling: Sampling,
}

impl OperatingPoint {
    pub fn drive(&self, n_steps: usize) -> DriveSpec {
        DriveSpec {
            omega0: self.omega0,
            omega1: self.omega1,
            f_mod: self.f_mod,
            n_steps,
            sampling: self.sampling,
        }
    }
}

/// Quadratures of the periodic steady state at a fixed step count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSolution {
    pub lockin: LockinPoint,
    pub n_steps: usize,
    /// `max |(Û - I)ρ|` of the accepted steady state.
    pub residual: f64,
    /// `|tr ρ - 1|` of the accepted steady state.
    pub trace_drift: f64,
}

pub fn solve_point_with(
    gen: &Generator,
    point: &OperatingPoint,
    n_steps: usize,
) -> Result<PointSolution> {
    let drive = point.drive(n_steps);
    let response = PeriodResponse::new(gen, &drive)?;
    let rho = steady_state_of(&response.monodromy)?;
    let (x, y) = response.quadratures(&rho);
    Ok(PointSolution {
        lockin: LockinPoint::new(x, y, point.f_mod).at_field(point.omega0),
        n_steps,
        residual: fixed_point_residual(&response.monodromy, &rho),
        trace_drift: (rho.trace().re - 1.0).abs(),
    })
}

pub fn solve_point(point: &OperatingPoint, n_steps: usize) -> Result<PointSolution> {
    solve_point_with(
        &Generator::new(&point.system, &point.relax)?,
        point,
        n_steps,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergedPoint {
    /// Quadratures at `2·n_used`, the finer of the last compared pair.
    pub solution: PointSolution,
    /// Smallest tested N whose doubling changed `(X, Y)` by less than the
    /// target, or `n_max` when the target was never met.
    pub n_used: usize,
    pub rel_change: f64,
    pub converged: bool,
}

impl ConvergedPoint {
    pub fn lockin(&self) -> LockinPoint {
        self.solution.lockin
    }

    /// `Err(NotConverged)` when the refinement hit `n_max`.
    pub fn check(&self, conv: &ConvergenceSpec) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NotConverged {
                n_max: conv.n_max,
                rel_change: self.rel_change,
            })
        }
    }
}

/// Doubles N from `n_start` until `|Δ(X, Y)| / max(|(X, Y)|, 1e-12)` drops
/// below the target.
pub fn converge_n(point: &OperatingPoint, conv: &ConvergenceSpec) -> Result<ConvergedPoint> {
    conv.validate()?;
    let gen = Generator::new(&point.system, &point.relax)?;
    let mut n = conv.n_start;
    let mut prev = solve_point_with(&gen, point, n)?;
    let mut rel_change = f64::INFINITY;
    while 2 * n <= conv.n_max {
        let next = solve_point_with(&gen, point, 2 * n)?;
        let (a, b) = (prev.lockin, next.lockin);
        let delta = (b.x - a.x).hypot(b.y - a.y);
        rel_change = delta / b.magnitude().max(ZERO_SIGNAL_FLOOR);
        if rel_change < conv.target_rel_change {
            return Ok(ConvergedPoint {
                solution: next,
                n_used: n,
                rel_change,
                converged: true,
            });
        }
        n *= 2;
        prev = next;
    }
    Ok(ConvergedPoint {
        solution: prev,
        n_used: n,
        rel_change,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Omega0,
    FMod,
}

/// Drive parameters held fixed during a sweep. The swept one is ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveBase {
    pub omega0: f64,
    pub omega1: f64,
    pub f_mod: f64,
    pub sampling: Sampling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub system: SpinSystem,
    pub relax: RelaxationSpec,
    pub drive: DriveBase,
    pub convergence: ConvergenceSpec,
    /// ω0 grid of each line for an f_mod sweep; defaults to
    /// [`default_inner_grid`].
    pub inner_grid: Option<Vec<f64>>,
    /// Print "point i/total" to standard error.
    pub progress: bool,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.relax.validate()?;
        self.convergence.validate()?;
        check_grid("grid", &self.grid)?;
        if self.axis == SweepAxis::FMod && self.grid.iter().any(|&f| f <= 0.0) {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: "modulation frequencies must be positive".into(),
            });
        }
        if let Some(inner) = &self.inner_grid {
            check_grid("inner_grid", inner)?;
        }
        Ok(())
    }

    pub fn point(&self, omega0: f64, f_mod: f64) -> OperatingPoint {
        OperatingPoint {
            system: self.system,
            relax: self.relax,
            omega0,
            omega1: self.drive.omega1,
            f_mod,
            sampling: self.drive.sampling,
        }
    }

    pub fn inner_grid(&self) -> Vec<f64> {
        self.inner_grid
            .clone()
            .unwrap_or_else(|| default_inner_grid(&self.system))
    }
}

fn check_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter {
            name,
            reason: "grid is empty".into(),
        });
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter {
            name,
            reason: "grid values must be finite".into(),
        });
    }
    let increasing = grid.windows(2).all(|w| w[0] < w[1]);
    let decreasing = grid.windows(2).all(|w| w[0] > w[1]);
    if !(increasing || decreasing) {
        return Err(Error::InvalidParameter {
            name,
            reason: "grid must be strictly monotonic".into(),
        });
    }
    Ok(())
}

/// 101 points over `±10·max(V, A, D_dd)` around the crossing at ω0 = 0.
pub fn default_inner_grid(system: &SpinSystem) -> Vec<f64> {
    let half = 10.0 * system.coupling_scale();
    let half = if half > 0.0 { half } else { 1.0 };
    linspace(-half, half, 101)
}

pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![start],
        _ => (0..points)
            .map(|k| start + (stop - start) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

pub fn logspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    linspace(start.log10(), stop.log10(), points)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub axis_value: f64,
    pub outcome: std::result::Result<ConvergedPoint, Error>,
    /// Quadrature at the spectrum's optimal phase (X at φ = 0 when flat).
    pub x_opt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub rows: Vec<SpectrumRow>,
    /// Optimal detector phase, `None` for a flat spectrum.
    pub phi_star: Option<f64>,
    pub peak_to_peak: f64,
}

impl Spectrum {
    pub fn points(&self) -> impl Iterator<Item = &ConvergedPoint> {
        self.rows.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn unconverged(&self) -> usize {
        self.points().filter(|p| !p.converged).count()
    }

    pub fn n_used_max(&self) -> usize {
        self.points().map(|p| p.n_used).max().unwrap_or(0)
    }
}

struct Progress<'a> {
    enabled: bool,
    done: &'a AtomicUsize,
    total: usize,
}

impl Progress<'_> {
    fn tick(&self) {
        let i = self.done.fetch_add(1, Ordering::Relaxed) + 1;
        if self.enabled {
            eprintln!("point {i}/{}", self.total);
        }
    }
}

fn assemble_spectrum(
    axis: &[f64],
    outcomes: Vec<std::result::Result<ConvergedPoint, Error>>,
) -> Spectrum {
    let lockins: Vec<LockinPoint> = outcomes
        .iter()
        .filter_map(|o| o.as_ref().ok())
        .map(|p| p.lockin())
        .collect();
    let (phi_star, pp) = match optimal_phase_amplitude(&lockins) {
        Ok((phi, pp)) => (Some(phi), pp),
        Err(_) if lockins.is_empty() => (None, 0.0),
        Err(_) => (None, peak_to_peak(&lockins, 0.0)),
    };
    let rows = axis
        .iter()
        .zip(outcomes)
        .map(|(&axis_value, outcome)| {
            let x_opt = match &outcome {
                Ok(p) => rotate_phase(&p.lockin(), phi_star.unwrap_or(0.0)),
                Err(_) => f64::NAN,
            };
            SpectrumRow {
                axis_value,
                outcome,
                x_opt,
            }
        })
        .collect();
    Spectrum {
        rows,
        phi_star,
        peak_to_peak: pp,
    }
}

/// LAC spectrum over the ω0 grid at the plan's fixed f_mod.
pub fn field_sweep(plan: &SweepPlan) -> Result<Spectrum> {
    if plan.axis != SweepAxis::Omega0 {
        return Err(Error::InvalidParameter {
            name: "axis",
            reason: "field_sweep needs axis = omega0".into(),
        });
    }
    plan.validate()?;
    let done = AtomicUsize::new(0);
    let progress = Progress {
        enabled: plan.progress,
        done: &done,
        total: plan.grid.len(),
    };
    let outcomes: Vec<_> = plan
        .grid
        .par_iter()
        .map(|&w| {
            let r = converge_n(&plan.point(w, plan.drive.f_mod), &plan.convergence);
            progress.tick();
            r
        })
        .collect();
    Ok(assemble_spectrum(&plan.grid, outcomes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmRow {
    pub f_mod: f64,
    pub spectrum: Spectrum,
}

impl FmRow {
    pub fn peak_to_peak(&self) -> f64 {
        self.spectrum.peak_to_peak
    }

    pub fn phi_star(&self) -> Option<f64> {
        self.spectrum.phi_star
    }
}

/// Peak-to-peak line amplitude at the optimal phase for every f_mod of the
/// grid, each line swept over the inner ω0 grid.
pub fn fm_sweep(plan: &SweepPlan) -> Result<Vec<FmRow>> {
    if plan.axis != SweepAxis::FMod {
        return Err(Error::InvalidParameter {
            name: "axis",
            reason: "fm_sweep needs axis = f_mod".into(),
        });
    }
    plan.validate()?;
    let inner = plan.inner_grid();
    let pairs: Vec<(usize, usize)> = (0..plan.grid.len())
        .flat_map(|i| (0..inner.len()).map(move |j| (i, j)))
        .collect();
    let done = AtomicUsize::new(0);
    let progress = Progress {
        enabled: plan.progress,
        done: &done,
        total: pairs.len(),
    };
    let mut outcomes: Vec<_> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let r = converge_n(&plan.point(inner[j], plan.grid[i]), &plan.convergence);
            progress.tick();
            r
        })
        .collect();
    let mut rows = Vec::with_capacity(plan.grid.len());
    for &f_mod in plan.grid.iter().rev() {
        let line = outcomes.split_off(outcomes.len() - inner.len());
        rows.push(FmRow {
            f_mod,
            spectrum: assemble_spectrum(&inner, line),
        });
    }
    rows.reverse();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(omega0: f64, omega1: f64, f_mod: f64) -> OperatingPoint {
        OperatingPoint {
            system: SpinSystem::single(0.1),
            relax: RelaxationSpec::new(0.5, 0.5, 0.01),
            omega0,
            omega1,
            f_mod,
            sampling: Sampling::Midpoint,
        }
    }

    #[test]
    fn static_point_converges_immediately() {
        let conv = ConvergenceSpec::default();
        let p = converge_n(&point(0.05, 0.0, 0.1), &conv).unwrap();
        assert!(p.converged);
        assert_eq!(p.n_used, conv.n_start);
        assert!(p.lockin().magnitude() < 1e-10);
    }

    #[test]
    fn tighter_target_never_uses_fewer_steps() {
        let pt = point(0.1, 0.1, 0.3);
        let loose = converge_n(
            &pt,
            &ConvergenceSpec {
                target_rel_change: 0.02,
                n_start: 8,
                n_max: 1 << 14,
            },
        )
        .unwrap();
        let tight = converge_n(
            &pt,
            &ConvergenceSpec {
                target_rel_change: 0.01,
                n_start: 8,
                n_max: 1 << 14,
            },
        )
        .unwrap();
        let tighter = converge_n(
            &pt,
            &ConvergenceSpec {
                target_rel_change: 0.005,
                n_start: 8,
                n_max: 1 << 14,
            },
        )
        .unwrap();
        assert!(loose.n_used <= tight.n_used && tight.n_used <= tighter.n_used);
        assert!(tighter.rel_change < 0.005);
    }

    #[test]
    fn unconverged_is_flagged() {
        let conv = ConvergenceSpec {
            target_rel_change: 1e-12,
            n_start: 4,
            n_max: 16,
        };
        let p = converge_n(&point(0.1, 0.1, 0.3), &conv).unwrap();
        assert!(!p.converged);
        assert_eq!(p.n_used, 16);
        assert!(matches!(p.check(&conv), Err(Error::NotConverged { .. })));
    }

    fn plan(axis: SweepAxis, grid: Vec<f64>, omega1: f64) -> SweepPlan {
        SweepPlan {
            axis,
            grid,
            system: SpinSystem::single(0.1),
            relax: RelaxationSpec::new(0.5, 0.5, 0.01),
            drive: DriveBase {
                omega0: 0.0,
                omega1,
                f_mod: 0.1,
                sampling: Sampling::Midpoint,
            },
            convergence: ConvergenceSpec::default(),
            inner_grid: Some(linspace(-1.0, 1.0, 11)),
            progress: false,
        }
    }

    #[test]
    fn unmodulated_sweep_is_flat() {
        let spec = field_sweep(&plan(SweepAxis::Omega0, linspace(-1.0, 1.0, 9), 0.0)).unwrap();
        assert!(spec.phi_star.is_none());
        for row in &spec.rows {
            let p = row.outcome.as_ref().unwrap().lockin();
            assert!(p.x.abs() < 1e-10 && p.y.abs() < 1e-10);
        }
    }

    #[test]
    fn failed_points_are_isolated() {
        let mut p = plan(SweepAxis::Omega0, linspace(-1.0, 1.0, 5), 0.1);
        // No relaxation at all: no unique steady state anywhere.
        p.relax = RelaxationSpec::NONE;
        let spec = field_sweep(&p).unwrap();
        assert_eq!(spec.failures(), 5);
        assert!(spec.rows.iter().all(|r| r.x_opt.is_nan()));
    }

    #[test]
    fn fm_sweep_groups_by_frequency() {
        let p = plan(SweepAxis::FMod, vec![0.1, 1.0], 0.1);
        let rows = fm_sweep(&p).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].f_mod, 0.1);
        assert_eq!(rows[1].spectrum.rows.len(), 11);
        assert!(rows[0].peak_to_peak() > rows[1].peak_to_peak());
        let direct = field_sweep(&SweepPlan {
            axis: SweepAxis::Omega0,
            grid: linspace(-1.0, 1.0, 11),
            drive: DriveBase {
                f_mod: 1.0,
                ..p.drive
            },
            ..p.clone()
        })
        .unwrap();
        assert_eq!(direct, rows[1].spectrum);
    }

    #[test]
    fn plan_validation() {
        assert!(plan(SweepAxis::Omega0, vec![0.0, 0.0], 0.1)
            .validate()
            .is_err());
        assert!(plan(SweepAxis::FMod, vec![-1.0, 1.0], 0.1)
            .validate()
            .is_err());
        let mut p = plan(SweepAxis::Omega0, vec![0.0, 1.0], 0.1);
        p.convergence.n_start = 2;
        assert!(p.validate().is_err());
        assert!(field_sweep(&plan(SweepAxis::FMod, vec![1.0], 0.1)).is_err());
    }

    #[test]
    fn inner_grid_default() {
        let g = default_inner_grid(&SpinSystem::isotropic(0.2, 0.1));
        assert_eq!(g.len(), 101);
        assert!((g[0] + 2.0).abs() < 1e-15 && (g[100] - 2.0).abs() < 1e-15);
        assert!((g[50]).abs() < 1e-15);
    }
}
