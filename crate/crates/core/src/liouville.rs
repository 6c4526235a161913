//! Liouville-space generators and step propagators.
//!
//! A density matrix `ρ` of dimension `d` is vectorized row-major, element
//! `ρ_ij` at index `i·d + j`. A superoperator is the `d² × d²` matrix acting
//! on that vector, so `dρ/dt = L ρ` with `L = L_coh + R`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::density::DensityMatrix;
use crate::error::{require_non_negative, Error, Result};
use crate::expm::expm;
use crate::spinops::{static_hamiltonian, zeeman_operator, CMatrix, HermitianMatrix, SpinSystem};

/// Phenomenological electron relaxation and optical pumping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationSpec {
    /// Longitudinal rate: population difference of α and β decays at `r1`.
    pub r1: f64,
    /// Transverse rate applied to every electron coherence.
    pub r2: f64,
    /// Pumping rate of the β → α transition.
    pub pump_j: f64,
    /// Whether pumping also dephases electron coherences at `pump_j / 2`.
    pub pump_damps_coherence: bool,
}

impl RelaxationSpec {
    pub const NONE: RelaxationSpec = RelaxationSpec {
        r1: 0.0,
        r2: 0.0,
        pump_j: 0.0,
        pump_damps_coherence: true,
    };

    pub fn new(r1: f64, r2: f64, pump_j: f64) -> Self {
        RelaxationSpec {
            r1,
            r2,
            pump_j,
            pump_damps_coherence: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_non_negative("r1", self.r1)?;
        require_non_negative("r2", self.r2)?;
        require_non_negative("pump_j", self.pump_j)
    }

    pub fn is_dissipative(&self) -> bool {
        self.r1 > 0.0 || self.pump_j > 0.0
    }
}

impl Default for RelaxationSpec {
    fn default() -> Self {
        RelaxationSpec::NONE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim_h: usize,
    m: CMatrix,
}

impl Superoperator {
    pub fn from_matrix(dim_h: usize, m: CMatrix) -> Result<Self> {
        let n = dim_h * dim_h;
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.nrows(),
            });
        }
        Ok(Superoperator { dim_h, m })
    }

    pub fn zeros(dim_h: usize) -> Self {
        let n = dim_h * dim_h;
        Superoperator {
            dim_h,
            m: CMatrix::zeros(n, n),
        }
    }

    pub fn identity(dim_h: usize) -> Self {
        let n = dim_h * dim_h;
        Superoperator {
            dim_h,
            m: CMatrix::identity(n, n),
        }
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn apply_vec(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.m * v
    }

    /// Applies the superoperator to `ρ` without renormalizing the result.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<CMatrix> {
        if rho.dim() != self.dim_h {
            return Err(Error::DimensionMismatch {
                expected: self.dim_h,
                found: rho.dim(),
            });
        }
        crate::density::unvectorize(&self.apply_vec(&rho.to_vector()))
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &Superoperator) -> Result<Superoperator> {
        if first.dim_h != self.dim_h {
            return Err(Error::DimensionMismatch {
                expected: self.dim_h,
                found: first.dim_h,
            });
        }
        Ok(Superoperator {
            dim_h: self.dim_h,
            m: &self.m * &first.m,
        })
    }

    pub fn add(&self, other: &Superoperator) -> Result<Superoperator> {
        if other.dim_h != self.dim_h {
            return Err(Error::DimensionMismatch {
                expected: self.dim_h,
                found: other.dim_h,
            });
        }
        Ok(Superoperator {
            dim_h: self.dim_h,
            m: &self.m + &other.m,
        })
    }

    pub fn scale(&self, s: f64) -> Superoperator {
        Superoperator {
            dim_h: self.dim_h,
            m: &self.m * Complex64::new(s, 0.0),
        }
    }
}

/// `L_coh` with `L_coh vec(ρ) = vec(-i[H, ρ])`.
pub fn coherent_liouvillian(h: &HermitianMatrix) -> Superoperator {
    let d = h.dim();
    let h = h.matrix();
    let i = Complex64::new(0.0, 1.0);
    let mut m = CMatrix::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            let row = a * d + b;
            // -i (Hρ)_ab = -i Σ_k H_ak ρ_kb
            for k in 0..d {
                m[(row, k * d + b)] -= i * h[(a, k)];
            }
            // +i (ρH)_ab = +i Σ_l ρ_al H_lb
            for l in 0..d {
                m[(row, a * d + l)] += i * h[(l, b)];
            }
        }
    }
    Superoperator { dim_h: d, m }
}

/// Relaxation and pumping superoperator `R`.
///
/// Acts on the electron only and preserves the nuclear state: in each nuclear
/// manifold the α/β population difference relaxes to zero at `r1`, β is
/// pumped into α at `pump_j`, and every element with differing electron
/// indices decays at `r2` (plus `pump_j / 2` when enabled). Purely nuclear
/// coherences are left undamped.
pub fn relaxation_superoperator(
    relax: &RelaxationSpec,
    system: &SpinSystem,
) -> Result<Superoperator> {
    relax.validate()?;
    system.validate()?;
    let d = system.hilbert_dim();
    let n_nuc = d / 2;
    let electron = |k: usize| k / n_nuc;
    let mut m = CMatrix::zeros(d * d, d * d);
    let re = |x: f64| Complex64::new(x, 0.0);

    let coherence_rate = relax.r2
        + if relax.pump_damps_coherence {
            0.5 * relax.pump_j
        } else {
            0.0
        };
    for a in 0..d {
        for b in 0..d {
            if electron(a) != electron(b) {
                let idx = a * d + b;
                m[(idx, idx)] -= re(coherence_rate);
            }
        }
    }

    let half_r1 = 0.5 * relax.r1;
    for nuc in 0..n_nuc {
        let alpha = nuc;
        let beta = n_nuc + nuc;
        let aa = alpha * d + alpha;
        let bb = beta * d + beta;
        m[(aa, aa)] -= re(half_r1);
        m[(aa, bb)] += re(half_r1 + relax.pump_j);
        m[(bb, bb)] -= re(half_r1 + relax.pump_j);
        m[(bb, aa)] += re(half_r1);
    }
    Ok(Superoperator { dim_h: d, m })
}

/// `exp(L·dt)`.
pub fn propagator(l_total: &Superoperator, dt: f64) -> Result<Superoperator> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be finite and positive, got {dt}"),
        });
    }
    let m = expm(&(&l_total.m * Complex64::new(dt, 0.0)))?;
    Ok(Superoperator {
        dim_h: l_total.dim_h,
        m,
    })
}

/// Generator split as `L(ω) = L_static + ω·L_zeeman`.
///
/// Built once per spin system and relaxation model; evaluating it at a new
/// field is a single scaled matrix addition.
#[derive(Debug, Clone)]
pub struct Generator {
    static_part: Superoperator,
    zeeman_part: Superoperator,
}

impl Generator {
    pub fn new(system: &SpinSystem, relax: &RelaxationSpec) -> Result<Self> {
        let h0 = static_hamiltonian(system)?;
        let static_part =
            coherent_liouvillian(&h0).add(&relaxation_superoperator(relax, system)?)?;
        let zeeman_part = coherent_liouvillian(&zeeman_operator(system.kind));
        Ok(Generator {
            static_part,
            zeeman_part,
        })
    }

    pub fn dim_h(&self) -> usize {
        self.static_part.dim_h
    }

    pub fn at(&self, omega: f64) -> Superoperator {
        Superoperator {
            dim_h: self.static_part.dim_h,
            m: &self.static_part.m + &self.zeeman_part.m * Complex64::new(omega, 0.0),
        }
    }

    /// `exp(L(ω)·dt)` as a raw matrix, for the hot propagation loops.
    pub(crate) fn step_matrix(&self, omega: f64, dt: f64) -> Result<CMatrix> {
        let a = self
            .static_part
            .m
            .zip_map(&self.zeeman_part.m, |s, z| (s + z * omega) * dt);
        expm(&a)
    }

    pub fn step(&self, omega: f64, dt: f64) -> Result<Superoperator> {
        Ok(Superoperator {
            dim_h: self.dim_h(),
            m: self.step_matrix(omega, dt)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinops::{hamiltonian_at, spin_half_operators};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn evolve(l: &Superoperator, rho: &DensityMatrix, t: f64) -> CMatrix {
        propagator(l, t).unwrap().apply(rho).unwrap()
    }

    #[test]
    fn diagonal_hamiltonian_rotates_coherence() {
        let w = 1.7;
        let (_, _, sz) = spin_half_operators();
        let h = HermitianMatrix::new(sz.matrix() * c(w, 0.0)).unwrap();
        let l = coherent_liouvillian(&h);
        let mut m = CMatrix::identity(2, 2) * c(0.5, 0.0);
        m[(0, 1)] = c(0.3, 0.1);
        m[(1, 0)] = c(0.3, -0.1);
        let rho = DensityMatrix::new(m.clone()).unwrap();
        let d = l.apply(&rho).unwrap();
        assert_eq!(d[(0, 0)], c(0.0, 0.0));
        assert_eq!(d[(1, 1)], c(0.0, 0.0));
        assert!((d[(0, 1)] - c(0.0, -w) * m[(0, 1)]).norm() < 1e-15);

        let dt = 0.37;
        let out = evolve(&l, &rho, dt);
        assert!((out[(0, 1)] - m[(0, 1)] * c(0.0, -w * dt).exp()).norm() < 1e-14);
        assert!((out[(0, 0)] - m[(0, 0)]).norm() < 1e-14);
    }

    #[test]
    fn zero_hamiltonian_gives_zero_generator() {
        let h = HermitianMatrix::new(CMatrix::zeros(4, 4)).unwrap();
        assert_eq!(coherent_liouvillian(&h), Superoperator::zeros(4));
        assert_eq!(
            propagator(&Superoperator::zeros(4), 2.0).unwrap(),
            Superoperator::identity(4)
        );
    }

    #[test]
    fn rabi_oscillation_matches_unitary() {
        let v = 0.8;
        let sys = SpinSystem::single(v);
        let h = hamiltonian_at(&sys, 0.0).unwrap();
        let l = coherent_liouvillian(&h);
        let rho0 = DensityMatrix::pure(2, 0).unwrap();
        for t in [0.1, 1.0, 3.3, 12.0] {
            let out = evolve(&l, &rho0, t);
            let expected = (v * t / 2.0).cos().powi(2);
            assert!((out[(0, 0)].re - expected).abs() < 1e-12);
            // Direct Hilbert-space evolution: U = exp(-iHt).
            let u = expm(&(h.matrix() * c(0.0, -t))).unwrap();
            let direct = &u * rho0.matrix() * u.adjoint();
            assert!((&direct - &out).norm() < 1e-12);
        }
    }

    #[test]
    fn longitudinal_relaxation_equalizes() {
        let sys = SpinSystem::single(0.0);
        let r = relaxation_superoperator(&RelaxationSpec::new(0.3, 0.5, 0.0), &sys).unwrap();
        let out = evolve(&r, &DensityMatrix::pure(2, 0).unwrap(), 200.0);
        assert!((out[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((out[(1, 1)].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pumping_fills_bright_state() {
        let sys = SpinSystem::single(0.0);
        let r = relaxation_superoperator(&RelaxationSpec::new(0.0, 0.0, 0.2), &sys).unwrap();
        let out = evolve(&r, &DensityMatrix::pure(2, 1).unwrap(), 400.0);
        assert!((out[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pump_relaxation_rate_balance() {
        // (R1/2)(p_α - p_β) = J p_β with p_α + p_β = 1.
        let (r1, j): (f64, f64) = (1e-4, 0.01);
        let expected = (r1 / 2.0) / (j + r1);
        assert!((expected - 0.004950495).abs() < 1e-9);
        let sys = SpinSystem::single(0.0);
        let r = relaxation_superoperator(&RelaxationSpec::new(r1, 0.5, j), &sys).unwrap();
        let out = evolve(&r, &DensityMatrix::pure(2, 1).unwrap(), 5000.0);
        assert!((out[(1, 1)].re - expected).abs() < 1e-12);
    }

    #[test]
    fn coherence_damping_rates() {
        let sys = SpinSystem::isotropic(0.2, 0.0);
        let mut relax = RelaxationSpec::new(0.1, 0.5, 0.04);
        let r = relaxation_superoperator(&relax, &sys).unwrap();
        // ρ_{α↑,β↓}: electron coherence; ρ_{α↑,α↓}: nuclear coherence.
        assert_eq!(r.matrix()[(3, 3)], c(-0.52, 0.0));
        assert_eq!(r.matrix()[(1, 1)], c(0.0, 0.0));
        assert_eq!(r.matrix()[(4, 4)], c(0.0, 0.0));
        relax.pump_damps_coherence = false;
        let r = relaxation_superoperator(&relax, &sys).unwrap();
        assert_eq!(r.matrix()[(3, 3)], c(-0.5, 0.0));
    }

    #[test]
    fn generator_trace_preservation() {
        for sys in [
            SpinSystem::single(0.1),
            SpinSystem::isotropic(0.2, 0.1),
            SpinSystem::dipolar(0.3, 0.7, 0.05),
        ] {
            let gen = Generator::new(&sys, &RelaxationSpec::new(0.1, 0.5, 0.02)).unwrap();
            let l = gen.at(0.37);
            let d = sys.hilbert_dim();
            // Trace functional is a left null vector.
            for col in 0..d * d {
                let s: Complex64 = (0..d).map(|k| l.matrix()[(k * d + k, col)]).sum();
                assert!(s.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn semigroup_property() {
        let sys = SpinSystem::dipolar(0.4, 1.0, 0.1);
        let gen = Generator::new(&sys, &RelaxationSpec::new(0.01, 0.5, 0.02)).unwrap();
        let l = gen.at(0.6);
        for dt in [0.01, 1.0, 25.0] {
            let half = propagator(&l, dt / 2.0).unwrap();
            let full = propagator(&l, dt).unwrap();
            let diff = (half.compose(&half).unwrap().matrix() - full.matrix())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-10, "dt {dt}: {diff:e}");
        }
    }

    #[test]
    fn unitary_without_relaxation_conserves_purity() {
        let sys = SpinSystem::isotropic(0.2, 0.1);
        let gen = Generator::new(&sys, &RelaxationSpec::NONE).unwrap();
        let rho0 = DensityMatrix::diagonal(&[0.7, 0.2, 0.1, 0.0]).unwrap();
        let u = gen.step(0.3, 0.05).unwrap();
        let mut v = rho0.to_vector();
        for _ in 0..2000 {
            v = u.apply_vec(&v);
        }
        let rho = DensityMatrix::from_vector(&v).unwrap();
        assert!((rho.purity() - rho0.purity()).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_step() {
        let l = Superoperator::zeros(2);
        assert!(propagator(&l, 0.0).is_err());
        assert!(propagator(&l, f64::NAN).is_err());
        assert!(RelaxationSpec::new(-1.0, 0.0, 0.0).validate().is_err());
    }
}
