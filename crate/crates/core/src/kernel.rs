//! Covariance and transition kernels, kernel matrices and Gaussian sampling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::Basis;
use crate::error::{DgpError, Result};
use crate::grid::Domain;
use crate::linalg;

/// Matrix with entry `(i, j) = k(x_i, x'_j)`.
pub type KernelMatrix = DMatrix<f64>;

/// A bivariate function `k(x, x')` on the domain.
pub trait Kernel: Send + Sync {
    fn eval(&self, x: f64, y: f64) -> f64;

    /// Whether `k(x, x') = k(x', x)` holds identically.
    fn is_symmetric(&self) -> bool {
        true
    }
}

impl<K: Kernel + ?Sized> Kernel for &K {
    fn eval(&self, x: f64, y: f64) -> f64 {
        (**self).eval(x, y)
    }

    fn is_symmetric(&self) -> bool {
        (**self).is_symmetric()
    }
}

/// Parametrized squared exponential `a·exp(-d² / (2σ²))` with `d = x - x'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqExpKernel {
    amplitude: f64,
    length_scale: f64,
}

impl SqExpKernel {
    pub fn new(amplitude: f64, length_scale: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(DgpError::InvalidParameter {
                name: "amplitude",
                reason: format!("must be finite and > 0, got {amplitude}"),
            });
        }
        if !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(DgpError::InvalidParameter {
                name: "length_scale",
                reason: format!("must be finite and > 0, got {length_scale}"),
            });
        }
        Ok(Self {
            amplitude,
            length_scale,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    /// Evaluates the kernel profile at offset `d`.
    pub fn eval_se(&self, d: f64) -> Result<f64> {
        if !d.is_finite() {
            return Err(DgpError::InvalidParameter {
                name: "offset",
                reason: format!("must be finite, got {d}"),
            });
        }
        Ok(self.profile(d))
    }

    #[inline]
    fn profile(&self, d: f64) -> f64 {
        let r = d / self.length_scale;
        self.amplitude * (-0.5 * r * r).exp()
    }
}

impl Kernel for SqExpKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        self.profile(x - y)
    }
}

/// Spatially white measurement noise `σ_v² δ(x - x')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhiteNoiseKernel {
    std_dev: f64,
}

impl WhiteNoiseKernel {
    pub fn new(std_dev: f64) -> Result<Self> {
        if !(std_dev >= 0.0 && std_dev.is_finite()) {
            return Err(DgpError::InvalidParameter {
                name: "std_dev",
                reason: format!("must be finite and >= 0, got {std_dev}"),
            });
        }
        Ok(Self { std_dev })
    }

    pub fn std_dev(&self) -> f64 {
        self.std_dev
    }

    pub fn variance(&self) -> f64 {
        self.std_dev * self.std_dev
    }

    /// Noise covariance of a measurement batch at `xs`.
    ///
    /// Always `σ_v²·I`: repeated locations are independent draws, so no
    /// off-diagonal correlation appears even for coincident entries.
    pub fn measurement_noise_matrix(&self, xs: &[f64]) -> KernelMatrix {
        DMatrix::from_diagonal_element(xs.len(), xs.len(), self.variance())
    }
}

impl Kernel for WhiteNoiseKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        if x == y {
            self.variance()
        } else {
            0.0
        }
    }
}

/// The identically zero kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZeroKernel;

impl Kernel for ZeroKernel {
    fn eval(&self, _: f64, _: f64) -> f64 {
        0.0
    }
}

/// `k(x, x') = Uᵀ(x) Λ U(x')` over a finite basis.
#[derive(Debug, Clone)]
pub struct SeparableKernel<B> {
    basis: B,
    lambda: DMatrix<f64>,
    symmetric: bool,
}

impl<B: Basis> SeparableKernel<B> {
    /// Builds a separable kernel with an unrestricted coefficient matrix, as
    /// used for transition kernels.
    pub fn new(basis: B, lambda: DMatrix<f64>) -> Result<Self> {
        let m = basis.size();
        if lambda.nrows() != m || lambda.ncols() != m {
            return Err(DgpError::DimensionMismatch {
                context: "separable kernel coefficients",
                expected: m,
                actual: if lambda.nrows() != m {
                    lambda.nrows()
                } else {
                    lambda.ncols()
                },
            });
        }
        let symmetric = linalg::is_symmetric(&lambda);
        Ok(Self {
            basis,
            lambda,
            symmetric,
        })
    }

    /// Builds a separable covariance kernel; `lambda` must be symmetric PSD.
    pub fn covariance(basis: B, lambda: DMatrix<f64>) -> Result<Self> {
        let kernel = Self::new(basis, lambda)?;
        if !kernel.symmetric {
            return Err(DgpError::InvalidParameter {
                name: "lambda",
                reason: "covariance coefficients must be symmetric".into(),
            });
        }
        linalg::ensure_psd(&kernel.lambda, "separable covariance kernel")?;
        Ok(kernel)
    }

    pub fn basis(&self) -> &B {
        &self.basis
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }
}

impl<B: Basis> Kernel for SeparableKernel<B> {
    fn eval(&self, x: f64, y: f64) -> f64 {
        let ux = self.basis.eval_unchecked(x);
        let uy = self.basis.eval_unchecked(y);
        ux.dot(&(&self.lambda * uy))
    }

    fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

/// Kernel matrix `k(X, X')` for locations inside `domain`.
pub fn kernel_matrix<K: Kernel + ?Sized>(
    kernel: &K,
    domain: &Domain,
    xs: &[f64],
    ys: &[f64],
) -> Result<KernelMatrix> {
    domain.check_all(xs)?;
    domain.check_all(ys)?;
    Ok(DMatrix::from_fn(xs.len(), ys.len(), |i, j| {
        kernel.eval(xs[i], ys[j])
    }))
}

/// Square kernel matrix `k(X, X)`; symmetric kernels get an exactly
/// symmetric result.
pub fn kernel_matrix_self<K: Kernel + ?Sized>(
    kernel: &K,
    domain: &Domain,
    xs: &[f64],
) -> Result<KernelMatrix> {
    domain.check_all(xs)?;
    let n = xs.len();
    if !kernel.is_symmetric() {
        return Ok(DMatrix::from_fn(n, n, |i, j| kernel.eval(xs[i], xs[j])));
    }
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = kernel.eval(xs[i], xs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Draws from `N(mean, cov)` using a cached symmetric square root of `cov`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    /// Lower-triangular factor; `None` when the covariance is zero.
    factor: Option<DMatrix<f64>>,
    dim: usize,
}

impl GaussianSampler {
    pub fn new(cov: &KernelMatrix) -> Result<Self> {
        if !cov.is_square() {
            return Err(DgpError::DimensionMismatch {
                context: "sampling covariance (columns)",
                expected: cov.nrows(),
                actual: cov.ncols(),
            });
        }
        let dim = cov.nrows();
        if cov.iter().all(|&v| v == 0.0) {
            return Ok(Self { factor: None, dim });
        }
        let (chol, _) = linalg::jittered_cholesky(cov, "gaussian sampling")?;
        Ok(Self {
            factor: Some(chol.l()),
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `mean + G·ξ` with `ξ` standard normal drawn from `rng`.
    ///
    /// Exactly `dim` normals are consumed even for a zero covariance, so the
    /// random stream stays aligned across configurations.
    pub fn sample<R: Rng + ?Sized>(&self, mean: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>> {
        if mean.len() != self.dim {
            return Err(DgpError::DimensionMismatch {
                context: "sampling mean",
                expected: self.dim,
                actual: mean.len(),
            });
        }
        let xi = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        Ok(match &self.factor {
            Some(g) => mean + g * xi,
            None => mean.clone(),
        })
    }
}

/// One draw from `N(mean, cov)`.
pub fn sample_gaussian_vector<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &KernelMatrix,
    rng: &mut R,
) -> Result<DVector<f64>> {
    GaussianSampler::new(cov)?.sample(mean, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn se_peak_equals_amplitude() {
        let k = SqExpKernel::new(10.0, 0.05).unwrap();
        assert_eq!(k.eval_se(0.0).unwrap(), 10.0);
    }

    #[test]
    fn se_far_tail_underflows() {
        let k = SqExpKernel::new(1.0, 0.7).unwrap();
        assert!(k.eval_se(100.0).unwrap() < 1e-300);
    }

    #[test]
    fn se_at_one_length_scale() {
        // 5.13 * exp(-1/2) evaluated with 50-digit arithmetic.
        let expected = 3.111_502_284_325_809_4;
        let k = SqExpKernel::new(5.13, 0.07).unwrap();
        assert!((k.eval_se(0.07).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn se_rejects_bad_parameters() {
        assert!(SqExpKernel::new(1.0, 0.0).is_err());
        assert!(SqExpKernel::new(1.0, -0.1).is_err());
        assert!(SqExpKernel::new(0.0, 1.0).is_err());
        let k = SqExpKernel::new(1.0, 1.0).unwrap();
        assert!(k.eval_se(f64::NAN).is_err());
        assert!(k.eval_se(f64::INFINITY).is_err());
    }

    #[test]
    fn kernel_matrix_examples() {
        let d = Domain::symmetric_unit();
        let k = SqExpKernel::new(1.0, 0.7).unwrap();
        let m = kernel_matrix(&k, &d, &[0.0], &[0.0]).unwrap();
        assert_eq!(m, DMatrix::from_element(1, 1, 1.0));

        let m = kernel_matrix(&k, &d, &[0.0, 0.7], &[0.0]).unwrap();
        assert_eq!(m.shape(), (2, 1));
        assert_eq!(m[(0, 0)], 1.0);
        assert!((m[(1, 0)] - (-0.5f64).exp()).abs() < 1e-15);

        let xs = [-0.9, -0.1, 0.33, 0.8];
        let m = kernel_matrix_self(&k, &d, &xs).unwrap();
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn kernel_matrix_domain_error() {
        let k = SqExpKernel::new(1.0, 0.7).unwrap();
        let err = kernel_matrix(&k, &Domain::symmetric_unit(), &[1.5], &[0.0]);
        assert!(matches!(err, Err(DgpError::OutsideDomain { .. })));
    }

    #[test]
    fn white_noise_matrix_is_diagonal() {
        let v = WhiteNoiseKernel::new(0.1).unwrap();
        let m = v.measurement_noise_matrix(&[0.1, -0.5, 0.9]);
        assert_eq!(m, DMatrix::from_diagonal_element(3, 3, 0.1 * 0.1));

        let m = v.measurement_noise_matrix(&[0.2, 0.2]);
        assert_eq!(m[(0, 1)], 0.0);
        assert_eq!(m[(0, 0)], 0.1 * 0.1);

        let zero = WhiteNoiseKernel::new(0.0).unwrap();
        assert_eq!(zero.measurement_noise_matrix(&[0.0, 0.5]), DMatrix::zeros(2, 2));
    }

    #[test]
    fn zero_covariance_sample_is_mean() {
        let mean = DVector::from_vec(vec![1.0, -2.0, 3.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = sample_gaussian_vector(&mean, &DMatrix::zeros(3, 3), &mut rng).unwrap();
        assert_eq!(s, mean);
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = Domain::symmetric_unit();
        let xs: Vec<f64> = (0..20).map(|i| -0.95 + 0.1 * i as f64).collect();
        let cov = kernel_matrix_self(&SqExpKernel::new(1.0, 0.7).unwrap(), &d, &xs).unwrap();
        let mean = DVector::zeros(xs.len());
        let a = sample_gaussian_vector(&mean, &cov, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = sample_gaussian_vector(&mean, &cov, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_covariance_matches_identity() {
        let cov = DMatrix::identity(2, 2);
        let sampler = GaussianSampler::new(&cov).unwrap();
        let mean = DVector::zeros(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut acc = DMatrix::zeros(2, 2);
        let mut sum = DVector::zeros(2);
        for _ in 0..n {
            let s = sampler.sample(&mean, &mut rng).unwrap();
            acc += &s * s.transpose();
            sum += s;
        }
        let m = sum / n as f64;
        let sample_cov = acc / n as f64 - &m * m.transpose();
        let err = (sample_cov - cov).abs().max();
        assert!(err < 0.05, "max-entry deviation {err}");
    }
}
