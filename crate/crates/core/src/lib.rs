//! Bayesian estimation of dynamic Gaussian processes: functions on an
//! interval that evolve under a stochastic integro-difference equation and
//! are observed through noisy point measurements.
//!
//! Two estimators are provided. [`separable`] is the fast path: when the
//! kernels are separable in a finite basis (exactly, or after projection with
//! [`basis::Projector`]) the belief is carried as a coefficient vector and
//! matrix, at `O(M³)` per step. [`dense`] realizes the same recursion on a
//! quadrature grid for arbitrary kernels and point-mass dynamics, and also
//! hosts plain GP regression and Kalman filter references.
//!
//! [`simulator`] draws ground-truth trajectories and observations, and
//! [`experiment`] drives both from a configuration file.

pub mod basis;
pub mod dense;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod kernel;
pub mod linalg;
pub mod observation;
pub mod separable;
pub mod simulator;

pub use basis::{Basis, BasisFamily, BasisSet, KernelRole, Projector};
pub use error::{DgpError, Result};
pub use grid::{Domain, QuadratureGrid, Snap};
pub use kernel::{Kernel, SeparableKernel, SqExpKernel, WhiteNoiseKernel, ZeroKernel};
pub use observation::ObservationBatch;
