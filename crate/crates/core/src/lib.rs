//! Level anti-crossing spectroscopy under field modulation.
//!
//! Density-matrix propagation of one- and two-spin systems through a
//! periodically modulated Zeeman field, with phenomenological relaxation and
//! optical pumping. The periodic steady state is found as the fixed point of
//! the one-period propagator and demodulated like a lock-in detector.

pub mod cli;
pub mod density;
pub mod error;
pub mod expm;
pub mod liouville;
pub mod lockin;
pub mod periodic;
pub mod spinops;
pub mod sweep;

pub use density::DensityMatrix;
pub use error::{Error, Result};
pub use liouville::{RelaxationSpec, Superoperator};
pub use lockin::LockinPoint;
pub use periodic::{DriveSpec, PeriodCache, Sampling};
pub use spinops::{HermitianMatrix, SpinSystem, SystemKind};
pub use sweep::{ConvergenceSpec, Spectrum, SweepAxis, SweepPlan};
