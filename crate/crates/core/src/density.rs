use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spinops::{hermitian_deviation, CMatrix};

const STATE_TOL: f64 = 1e-10;

/// Hermitian, unit-trace density matrix over a 2- or 4-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let dim = m.nrows();
        if !m.is_square() || !(dim == 2 || dim == 4) {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: dim,
            });
        }
        let tr = m.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > STATE_TOL {
            return Err(Error::InvalidParameter {
                name: "rho",
                reason: format!("trace must be 1, got {tr}"),
            });
        }
        let dev = hermitian_deviation(&m);
        if dev.is_nan() || dev > STATE_TOL {
            return Err(Error::InvalidParameter {
                name: "rho",
                reason: format!("not Hermitian (deviation {dev:e})"),
            });
        }
        Ok(DensityMatrix(m))
    }

    /// Projector on basis state `index`.
    pub fn pure(dim: usize, index: usize) -> Result<Self> {
        let mut m = CMatrix::zeros(dim, dim);
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index,
            });
        }
        m[(index, index)] = Complex64::new(1.0, 0.0);
        Self::new(m)
    }

    /// Electron in the bright α state, nucleus (if any) unpolarized.
    pub fn bright(dim: usize) -> Result<Self> {
        let diag: Vec<f64> = (0..dim)
            .map(|k| {
                if is_bright(dim, k) {
                    2.0 / dim as f64
                } else {
                    0.0
                }
            })
            .collect();
        Self::diagonal(&diag)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0 / dim as f64; dim])
    }

    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let d = DVector::from_iterator(
            populations.len(),
            populations.iter().map(|&p| Complex64::new(p, 0.0)),
        );
        Self::new(CMatrix::from_diagonal(&d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// Population of the electron α state, summed over nuclear states.
    pub fn bright_population(&self) -> f64 {
        (0..self.dim())
            .filter(|&k| is_bright(self.dim(), k))
            .map(|k| self.0[(k, k)].re)
            .sum()
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Row-major vectorization: element `(i, j)` goes to index `i·dim + j`.
    pub fn to_vector(&self) -> DVector<Complex64> {
        vectorize(&self.0)
    }

    /// Inverse of [`DensityMatrix::to_vector`]; validates the result.
    pub fn from_vector(v: &DVector<Complex64>) -> Result<Self> {
        Self::new(unvectorize(v)?)
    }
}

/// Whether basis state `k` has the electron in α. Electron-major ordering.
pub fn is_bright(dim: usize, k: usize) -> bool {
    k < dim / 2
}

pub(crate) fn vectorize(m: &CMatrix) -> DVector<Complex64> {
    let d = m.nrows();
    DVector::from_fn(d * d, |idx, _| m[(idx / d, idx % d)])
}

pub(crate) fn unvectorize(v: &DVector<Complex64>) -> Result<CMatrix> {
    let d = (v.len() as f64).sqrt().round() as usize;
    if d * d != v.len() {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: v.len(),
        });
    }
    Ok(CMatrix::from_fn(d, d, |i, j| v[i * d + j]))
}
