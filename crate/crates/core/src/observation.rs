use nalgebra::{DMatrix, DVector};

use crate::error::{DgpError, Result};
use crate::kernel::WhiteNoiseKernel;
use crate::linalg;

/// Measurements `Y_t` taken at locations `X_t` during one time step, with
/// their noise covariance `R_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBatch {
    locations: Vec<f64>,
    values: DVector<f64>,
    noise: DMatrix<f64>,
}

impl ObservationBatch {
    /// Batch with white measurement noise, `R_t = σ_v²·I`.
    pub fn new(locations: Vec<f64>, values: Vec<f64>, noise: &WhiteNoiseKernel) -> Result<Self> {
        let r = noise.measurement_noise_matrix(&locations);
        Self::checked(locations, values, r, false)
    }

    /// Batch with an arbitrary symmetric PSD noise covariance.
    pub fn with_noise_matrix(locations: Vec<f64>, values: Vec<f64>, noise: DMatrix<f64>) -> Result<Self> {
        Self::checked(locations, values, noise, true)
    }

    fn checked(locations: Vec<f64>, values: Vec<f64>, noise: DMatrix<f64>, check_psd: bool) -> Result<Self> {
        let p = locations.len();
        if values.len() != p {
            return Err(DgpError::DimensionMismatch {
                context: "observation values",
                expected: p,
                actual: values.len(),
            });
        }
        if noise.nrows() != p || noise.ncols() != p {
            return Err(DgpError::DimensionMismatch {
                context: "observation noise covariance",
                expected: p,
                actual: noise.nrows().max(noise.ncols()),
            });
        }
        if let Some(bad) = locations.iter().chain(values.iter()).find(|v| !v.is_finite()) {
            return Err(DgpError::InvalidParameter {
                name: "observation",
                reason: format!("non-finite entry {bad}"),
            });
        }
        if check_psd {
            if !linalg::is_symmetric(&noise) {
                return Err(DgpError::InvalidParameter {
                    name: "observation noise covariance",
                    reason: "must be symmetric".into(),
                });
            }
            linalg::ensure_psd(&noise, "observation noise covariance")?;
        }
        Ok(Self {
            locations,
            values: DVector::from_vec(values),
            noise,
        })
    }

    pub fn empty() -> Self {
        Self {
            locations: Vec::new(),
            values: DVector::zeros(0),
            noise: DMatrix::zeros(0, 0),
        }
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn noise(&self) -> &DMatrix<f64> {
        &self.noise
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}
