//! Grid realization of the exact update and prediction for general kernels.
//!
//! The mean `f̂_{t|l}` and covariance `ĉ_{t|l}` are carried at the nodes of a
//! midpoint quadrature grid. Integrals against the transition measure become
//! a [`TransferOperator`]; the measurement update conditions directly on the
//! nodes nearest to the observation locations. This path costs `O(n_q³)` per
//! step and serves as the brute-force oracle for [`crate::separable`].

mod reference;

pub use reference::{gp_reference, kalman_reference, GpPosterior, KalmanPrediction, KalmanStep};

use nalgebra::{DMatrix, DVector};

use crate::error::{DgpError, Result};
use crate::grid::{QuadratureGrid, Snap};
use crate::kernel::{kernel_matrix, kernel_matrix_self, Kernel};
use crate::linalg;
use crate::observation::ObservationBatch;
use crate::separable::Stage;

/// Default cap on the number of grid nodes for dense states.
pub const DEFAULT_MAX_NODES: usize = 2048;

/// Discrete component of the transition measure: a Dirac mass of weight
/// `b(x_j)` at `s(x_j)`, sampled at every grid node `x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMass {
    pub targets: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PointMass {
    /// `s(x) = x`, `b ≡ 1`: the identity map.
    pub fn identity(grid: &QuadratureGrid) -> Self {
        Self {
            targets: grid.nodes().to_vec(),
            weights: vec![1.0; grid.len()],
        }
    }

    /// Point masses that make the transfer operator equal to `a`, one per
    /// node `ξ_i`: `s_i ≡ ξ_i` and `b_i(ξ_j) = a[(j, i)]`.
    pub fn from_matrix(a: &DMatrix<f64>, grid: &QuadratureGrid) -> Result<Vec<Self>> {
        let n = grid.len();
        if a.nrows() != n || a.ncols() != n {
            return Err(DgpError::DimensionMismatch {
                context: "point-mass matrix",
                expected: n,
                actual: a.nrows().max(a.ncols()),
            });
        }
        Ok((0..n)
            .map(|i| Self {
                targets: vec![grid.nodes()[i]; n],
                weights: a.column(i).iter().copied().collect(),
            })
            .collect())
    }
}

/// Matrix `T` whose row `j` realizes `∫ f(s) μ(x_j, ds)` on grid samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferOperator {
    matrix: DMatrix<f64>,
}

impl TransferOperator {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(DgpError::DimensionMismatch {
                context: "transfer operator",
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, f: &DVector<f64>) -> DVector<f64> {
        &self.matrix * f
    }
}

/// `T = K_f Δx + Σ_i P_i` with `(P_i)_{j, q(j)} = b_i(x_j)`, where `q(j)` is
/// the node nearest to `s_i(x_j)`.
pub fn build_transfer_operator(
    continuous: Option<&dyn Kernel>,
    point_masses: &[PointMass],
    grid: &QuadratureGrid,
) -> Result<TransferOperator> {
    let n = grid.len();
    let mut t = match continuous {
        Some(k) => kernel_matrix(k, grid.domain(), grid.nodes(), grid.nodes())? * grid.spacing(),
        None => DMatrix::zeros(n, n),
    };
    for pm in point_masses {
        for (context, len) in [("point-mass targets", pm.targets.len()), ("point-mass weights", pm.weights.len())] {
            if len != n {
                return Err(DgpError::DimensionMismatch {
                    context,
                    expected: n,
                    actual: len,
                });
            }
        }
        for (j, (&s, &b)) in pm.targets.iter().zip(&pm.weights).enumerate() {
            let q = grid.snap(s, Snap::Nearest)?;
            t[(j, q)] += b;
        }
    }
    Ok(TransferOperator { matrix: t })
}

/// Transfer operator and disturbance covariance on a grid.
#[derive(Debug, Clone)]
pub struct DenseDynamics {
    transfer: TransferOperator,
    disturbance: DMatrix<f64>,
}

impl DenseDynamics {
    /// Dynamics with disturbance covariance `Q_w` evaluated on the grid;
    /// `None` means no disturbance.
    pub fn new(transfer: TransferOperator, disturbance: Option<&dyn Kernel>, grid: &QuadratureGrid) -> Result<Self> {
        let disturbance = match disturbance {
            Some(k) => kernel_matrix_self(k, grid.domain(), grid.nodes())?,
            None => DMatrix::zeros(grid.len(), grid.len()),
        };
        Self::from_matrices(transfer, disturbance)
    }

    pub fn from_matrices(transfer: TransferOperator, disturbance: DMatrix<f64>) -> Result<Self> {
        let n = transfer.matrix.nrows();
        if disturbance.nrows() != n || disturbance.ncols() != n {
            return Err(DgpError::DimensionMismatch {
                context: "disturbance covariance",
                expected: n,
                actual: disturbance.nrows().max(disturbance.ncols()),
            });
        }
        if !linalg::is_symmetric(&disturbance) {
            return Err(DgpError::InvalidParameter {
                name: "disturbance covariance",
                reason: "must be symmetric".into(),
            });
        }
        Ok(Self { transfer, disturbance })
    }

    pub fn transfer(&self) -> &TransferOperator {
        &self.transfer
    }

    pub fn disturbance(&self) -> &DMatrix<f64> {
        &self.disturbance
    }
}

/// Belief `(f̂_{t|l}, ĉ_{t|l})` sampled on the grid nodes.
#[derive(Debug, Clone)]
pub struct DenseState {
    grid: QuadratureGrid,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    t: usize,
    stage: Stage,
}

impl DenseState {
    pub fn init(grid: QuadratureGrid, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        Self::init_with_cap(grid, mean, cov, DEFAULT_MAX_NODES)
    }

    pub fn init_with_cap(grid: QuadratureGrid, mean: DVector<f64>, cov: DMatrix<f64>, max_nodes: usize) -> Result<Self> {
        let n = grid.len();
        if n > max_nodes {
            return Err(DgpError::GridTooLarge { nodes: n, cap: max_nodes });
        }
        if mean.len() != n {
            return Err(DgpError::DimensionMismatch {
                context: "dense prior mean",
                expected: n,
                actual: mean.len(),
            });
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(DgpError::DimensionMismatch {
                context: "dense prior covariance",
                expected: n,
                actual: cov.nrows().max(cov.ncols()),
            });
        }
        if !linalg::is_symmetric(&cov) {
            return Err(DgpError::InvalidParameter {
                name: "dense prior covariance",
                reason: "must be symmetric".into(),
            });
        }
        linalg::ensure_psd(&cov, "dense prior covariance")?;
        Ok(Self {
            grid,
            mean,
            cov,
            t: 0,
            stage: Stage::Predicted,
        })
    }

    /// Prior `f̂_{0|-1} = f̄_0`, `ĉ_{0|-1} = Q_f` sampled on the grid.
    pub fn from_prior<F, K>(grid: QuadratureGrid, mean_fn: F, cov_kernel: &K) -> Result<Self>
    where
        F: Fn(f64) -> f64,
        K: Kernel + ?Sized,
    {
        if grid.len() > DEFAULT_MAX_NODES {
            return Err(DgpError::GridTooLarge {
                nodes: grid.len(),
                cap: DEFAULT_MAX_NODES,
            });
        }
        let mean = DVector::from_iterator(grid.len(), grid.nodes().iter().map(|&x| mean_fn(x)));
        let cov = kernel_matrix_self(cov_kernel, grid.domain(), grid.nodes())?;
        Self::init(grid, mean, cov)
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Conditions on a batch whose locations are mapped onto grid nodes
    /// according to `snap`.
    pub fn update(mut self, obs: &ObservationBatch, snap: Snap) -> Result<Self> {
        if self.stage != Stage::Predicted {
            return Err(DgpError::OrderViolation {
                operation: "dense update",
                expected: "predicted",
            });
        }
        let idx = obs
            .locations()
            .iter()
            .map(|&x| self.grid.snap(x, snap))
            .collect::<Result<Vec<_>>>()?;
        self.stage = Stage::Filtered;
        if idx.is_empty() {
            return Ok(self);
        }
        // ĉ(·, X) and ĉ(X, X) + R.
        let cross = self.cov.select_columns(&idx);
        let mut innovation_cov = cross.select_rows(&idx) + obs.noise();
        linalg::symmetrize(&mut innovation_cov);
        let (chol, _) = linalg::jittered_cholesky(&innovation_cov, "dense innovation covariance")?;
        // Lᵀ = S⁻¹ ĉ(X, ·)
        let gain_t = chol.solve(&cross.transpose());
        let predicted = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i]));
        let innovation = obs.values() - predicted;
        self.mean += gain_t.tr_mul(&innovation);
        self.cov -= &cross * &gain_t;
        linalg::symmetrize(&mut self.cov);
        linalg::ensure_psd(&self.cov, "dense posterior covariance")?;
        Ok(self)
    }

    /// `f̂ ← T f̂`, `ĉ ← T ĉ Tᵀ + Q_w`.
    pub fn predict(mut self, dynamics: &DenseDynamics) -> Result<Self> {
        if self.stage != Stage::Filtered {
            return Err(DgpError::OrderViolation {
                operation: "dense predict",
                expected: "filtered",
            });
        }
        let t = dynamics.transfer.matrix();
        if t.nrows() != self.mean.len() {
            return Err(DgpError::DimensionMismatch {
                context: "dense dynamics",
                expected: self.mean.len(),
                actual: t.nrows(),
            });
        }
        self.mean = t * &self.mean;
        self.cov = t * &self.cov * t.transpose() + &dynamics.disturbance;
        linalg::symmetrize(&mut self.cov);
        linalg::ensure_psd(&self.cov, "dense predicted covariance")?;
        self.t += 1;
        self.stage = Stage::Predicted;
        Ok(self)
    }
}
