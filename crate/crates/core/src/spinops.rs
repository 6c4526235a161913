//! Spin-1/2 operators, the model Hamiltonians and their static energy levels.
//!
//! Two-spin states are ordered electron-major: `|α↑⟩, |α↓⟩, |β↑⟩, |β↓⟩`, so
//! the electron index of basis state `k` is `k / 2` and the nuclear index is
//! `k % 2`. All parameters are angular frequencies in dimensionless units.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{require_finite, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;

/// Which spin system is being modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SystemKind {
    SingleSpin,
    TwoSpinIsotropic,
    TwoSpinDipolar,
}

impl SystemKind {
    pub fn hilbert_dim(self) -> usize {
        match self {
            SystemKind::SingleSpin => 2,
            SystemKind::TwoSpinIsotropic | SystemKind::TwoSpinDipolar => 4,
        }
    }
}

/// Spin system and its coupling constants.
///
/// `a_iso` is only meaningful for [`SystemKind::TwoSpinIsotropic`], `d_dd` and
/// `theta_dd` only for [`SystemKind::TwoSpinDipolar`]; [`SpinSystem::validate`]
/// requires the others to be zero. The inter-spin unit vector is
/// `n = (sin θ_dd, 0, cos θ_dd)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSystem {
    pub kind: SystemKind,
    pub v_perturbation: f64,
    pub a_iso: f64,
    pub d_dd: f64,
    pub theta_dd: f64,
}

impl SpinSystem {
    pub fn single(v: f64) -> Self {
        SpinSystem {
            kind: SystemKind::SingleSpin,
            v_perturbation: v,
            a_iso: 0.0,
            d_dd: 0.0,
            theta_dd: 0.0,
        }
    }

    pub fn isotropic(a_iso: f64, v: f64) -> Self {
        SpinSystem {
            kind: SystemKind::TwoSpinIsotropic,
            v_perturbation: v,
            a_iso,
            d_dd: 0.0,
            theta_dd: 0.0,
        }
    }

    pub fn dipolar(d_dd: f64, theta_dd: f64, v: f64) -> Self {
        SpinSystem {
            kind: SystemKind::TwoSpinDipolar,
            v_perturbation: v,
            a_iso: 0.0,
            d_dd,
            theta_dd,
        }
    }

    pub fn hilbert_dim(&self) -> usize {
        self.kind.hilbert_dim()
    }

    /// Largest coupling constant, used to size default field windows.
    pub fn coupling_scale(&self) -> f64 {
        self.v_perturbation
            .abs()
            .max(self.a_iso.abs())
            .max(self.d_dd.abs())
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("v_perturbation", self.v_perturbation)?;
        require_finite("a_iso", self.a_iso)?;
        require_finite("d_dd", self.d_dd)?;
        require_finite("theta_dd", self.theta_dd)?;
        let irrelevant = |name: &'static str, value: f64| -> Result<()> {
            if value != 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("not used by {:?}, must be zero", self.kind),
                });
            }
            Ok(())
        };
        match self.kind {
            SystemKind::SingleSpin => {
                irrelevant("a_iso", self.a_iso)?;
                irrelevant("d_dd", self.d_dd)?;
                irrelevant("theta_dd", self.theta_dd)?;
            }
            SystemKind::TwoSpinIsotropic => {
                irrelevant("d_dd", self.d_dd)?;
                irrelevant("theta_dd", self.theta_dd)?;
            }
            SystemKind::TwoSpinDipolar => {
                irrelevant("a_iso", self.a_iso)?;
                if !(0.0..=std::f64::consts::PI).contains(&self.theta_dd) {
                    return Err(Error::InvalidParameter {
                        name: "theta_dd",
                        reason: format!("must lie in [0, pi], got {}", self.theta_dd),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Dense complex matrix that is Hermitian to within 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let dev = hermitian_deviation(&m);
        if dev.is_nan() || dev > HERMITIAN_TOL {
            return Err(Error::InvalidParameter {
                name: "hamiltonian",
                reason: format!("not Hermitian (max |H - H^†| = {dev:e})"),
            });
        }
        Ok(HermitianMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    /// Eigenvalues sorted ascending; degenerate values repeat.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

pub(crate) fn hermitian_deviation(m: &CMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The spin-1/2 operators `(Sx, Sy, Sz)`, i.e. halved Pauli matrices.
pub fn spin_half_operators() -> (HermitianMatrix, HermitianMatrix, HermitianMatrix) {
    let z = c(0.0, 0.0);
    let sx = CMatrix::from_row_slice(2, 2, &[z, c(0.5, 0.0), c(0.5, 0.0), z]);
    let sy = CMatrix::from_row_slice(2, 2, &[z, c(0.0, -0.5), c(0.0, 0.5), z]);
    let sz = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), z, z, c(-0.5, 0.0)]);
    (
        HermitianMatrix(sx),
        HermitianMatrix(sy),
        HermitianMatrix(sz),
    )
}

/// Electron and nuclear spin operators embedded in the system's Hilbert space.
struct SpinBasis {
    s: [CMatrix; 3],
    i: Option<[CMatrix; 3]>,
}

impl SpinBasis {
    fn new(kind: SystemKind) -> Self {
        let (sx, sy, sz) = spin_half_operators();
        let ops = [sx.0, sy.0, sz.0];
        match kind {
            SystemKind::SingleSpin => SpinBasis { s: ops, i: None },
            _ => {
                let id = CMatrix::identity(2, 2);
                SpinBasis {
                    s: ops.clone().map(|op| op.kronecker(&id)),
                    i: Some(ops.map(|op| id.kronecker(&op))),
                }
            }
        }
    }
}

/// Field-independent part of the Hamiltonian: `V·Sx` plus the coupling term.
pub fn static_hamiltonian(system: &SpinSystem) -> Result<HermitianMatrix> {
    system.validate()?;
    let basis = SpinBasis::new(system.kind);
    let mut h = &basis.s[0] * c(system.v_perturbation, 0.0);
    if let Some(i) = &basis.i {
        let s_dot_i: CMatrix = (0..3).map(|k| &basis.s[k] * &i[k]).sum();
        match system.kind {
            SystemKind::TwoSpinIsotropic => h += s_dot_i * c(system.a_iso, 0.0),
            SystemKind::TwoSpinDipolar => {
                let (sin_t, cos_t) = system.theta_dd.sin_cos();
                let s_n = &basis.s[0] * c(sin_t, 0.0) + &basis.s[2] * c(cos_t, 0.0);
                let i_n = &i[0] * c(sin_t, 0.0) + &i[2] * c(cos_t, 0.0);
                h += (s_n * i_n * c(3.0, 0.0) - s_dot_i) * c(system.d_dd, 0.0);
            }
            SystemKind::SingleSpin => unreachable!(),
        }
    }
    HermitianMatrix::new(h)
}

/// Electron `Sz` in the system's Hilbert space; the Zeeman term is `ω·Sz`.
pub fn zeeman_operator(kind: SystemKind) -> HermitianMatrix {
    let [_, _, sz] = SpinBasis::new(kind).s;
    HermitianMatrix(sz)
}

/// Full Hamiltonian at instantaneous Zeeman frequency `omega_inst`.
pub fn hamiltonian_at(system: &SpinSystem, omega_inst: f64) -> Result<HermitianMatrix> {
    require_finite("omega_inst", omega_inst)?;
    let h0 = static_hamiltonian(system)?;
    let sz = zeeman_operator(system.kind);
    HermitianMatrix::new(h0.0 + sz.0 * c(omega_inst, 0.0))
}

/// Sorted eigenvalues of the static Hamiltonian at each field of `omega0_grid`.
pub fn energy_levels(system: &SpinSystem, omega0_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    if omega0_grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "omega0_grid",
            reason: "grid is empty".into(),
        });
    }
    if omega0_grid.windows(2).any(|w| {
        !matches!(
            w[0].partial_cmp(&w[1]),
            Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal)
        )
    }) {
        return Err(Error::InvalidParameter {
            name: "omega0_grid",
            reason: "grid must be sorted ascending".into(),
        });
    }
    omega0_grid
        .iter()
        .map(|&w| hamiltonian_at(system, w).map(|h| h.eigenvalues()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    fn trace(m: &CMatrix) -> Complex64 {
        m.diagonal().sum()
    }

    #[test]
    fn spin_operators_algebra() {
        let (sx, sy, sz) = spin_half_operators();
        let (sx, sy, sz) = (sx.0, sy.0, sz.0);
        let i = c(0.0, 1.0);
        assert!((&sx * &sy - &sy * &sx - &sz * i).norm() < 1e-15);
        assert!((&sy * &sz - &sz * &sy - &sx * i).norm() < 1e-15);
        assert!((&sz * &sx - &sx * &sz - &sy * i).norm() < 1e-15);
        let casimir = &sx * &sx + &sy * &sy + &sz * &sz;
        assert!((casimir - CMatrix::identity(2, 2) * c(0.75, 0.0)).norm() < 1e-15);
        for m in [&sx, &sy, &sz] {
            assert_eq!(trace(m), c(0.0, 0.0));
        }
        assert_eq!(HermitianMatrix(sz).eigenvalues(), vec![-0.5, 0.5]);
    }

    #[test]
    fn single_spin_avoided_crossing() {
        let sys = SpinSystem::single(0.1);
        for w in [-2.0, -0.3, 0.0, 0.05, 1.7] {
            let ev = hamiltonian_at(&sys, w).unwrap().eigenvalues();
            let e = 0.5 * (w * w + 0.01f64).sqrt();
            assert!(close(&ev, &[-e, e], 1e-14), "{ev:?}");
        }
    }

    #[test]
    fn isotropic_zero_field_is_singlet_triplet() {
        let ev = hamiltonian_at(&SpinSystem::isotropic(0.2, 0.0), 0.0)
            .unwrap()
            .eigenvalues();
        assert!(close(&ev, &[-0.15, 0.05, 0.05, 0.05], 1e-14), "{ev:?}");
    }

    #[test]
    fn dipolar_zero_field_and_rotation() {
        let ev0 = hamiltonian_at(&SpinSystem::dipolar(1.0, 0.0, 0.0), 0.0)
            .unwrap()
            .eigenvalues();
        assert!(close(&ev0, &[-1.0, 0.0, 0.5, 0.5], 1e-13), "{ev0:?}");
        for theta in [0.3, PI / 4.0, PI / 2.0, 2.5, PI] {
            let ev = hamiltonian_at(&SpinSystem::dipolar(1.0, theta, 0.0), 0.0)
                .unwrap()
                .eigenvalues();
            assert!(close(&ev, &ev0, 1e-13));
        }
        let a = hamiltonian_at(&SpinSystem::dipolar(1.0, 0.0, 0.0), 0.7).unwrap();
        let b = hamiltonian_at(&SpinSystem::dipolar(1.0, PI / 2.0, 0.0), 0.7).unwrap();
        assert!(!close(&a.eigenvalues(), &b.eigenvalues(), 1e-3));
    }

    #[test]
    fn coupling_terms_are_traceless() {
        for sys in [
            SpinSystem::single(0.3),
            SpinSystem::isotropic(0.2, 0.1),
            SpinSystem::dipolar(0.4, 1.1, 0.1),
        ] {
            let h = static_hamiltonian(&sys).unwrap();
            assert!(trace(h.matrix()).norm() < 1e-15);
            assert!(trace(zeeman_operator(sys.kind).matrix()).norm() < 1e-15);
        }
    }

    #[test]
    fn level_gap_matches_perturbation() {
        let grid: Vec<f64> = (0..=100).map(|k| -1.0 + 0.02 * k as f64).collect();
        let levels = energy_levels(&SpinSystem::single(0.1), &grid).unwrap();
        let min_gap = levels
            .iter()
            .map(|l| l[1] - l[0])
            .fold(f64::INFINITY, f64::min);
        assert!((min_gap - 0.1).abs() < 1e-12);
        let levels = energy_levels(&SpinSystem::single(0.0), &[0.0]).unwrap();
        assert_eq!(levels[0], vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(hamiltonian_at(&SpinSystem::single(0.1), f64::NAN).is_err());
        assert!(hamiltonian_at(&SpinSystem::single(f64::INFINITY), 0.0).is_err());
        let mut sys = SpinSystem::dipolar(1.0, 0.5, 0.0);
        sys.a_iso = 0.2;
        assert!(sys.validate().is_err());
        assert!(SpinSystem::dipolar(1.0, 4.0, 0.0).validate().is_err());
        assert!(energy_levels(&SpinSystem::single(0.1), &[]).is_err());
        assert!(energy_levels(&SpinSystem::single(0.1), &[1.0, 0.0]).is_err());
    }
}
