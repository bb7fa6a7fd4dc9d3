//! Basis families, the Gram matrix and Riemann-sum least-squares projection
//! of functions and kernels onto a basis.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{DgpError, Result};
use crate::grid::{Domain, QuadratureGrid};
use crate::kernel::{kernel_matrix_self, Kernel, SeparableKernel};
use crate::linalg;

/// An ordered family of `M` functions `U(x) = [u_1(x), …, u_M(x)]ᵀ`.
pub trait Basis: Send + Sync {
    fn size(&self) -> usize;

    fn domain(&self) -> &Domain;

    /// Writes `U(x)` into `out` (length `size()`); `x` is assumed in-domain.
    fn eval_into(&self, x: f64, out: &mut [f64]);

    /// Smallest quadrature grid on which the Gram matrix is trustworthy.
    fn min_quadrature_nodes(&self) -> usize {
        2 * self.size()
    }

    fn eval_unchecked(&self, x: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.size());
        self.eval_into(x, out.as_mut_slice());
        out
    }

    fn eval(&self, x: f64) -> Result<DVector<f64>> {
        self.domain().check(x)?;
        Ok(self.eval_unchecked(x))
    }

    /// `M × p` matrix whose column `j` is `U(x_j)`.
    fn eval_matrix(&self, xs: &[f64]) -> Result<DMatrix<f64>> {
        self.domain().check_all(xs)?;
        let mut out = DMatrix::zeros(self.size(), xs.len());
        for (j, &x) in xs.iter().enumerate() {
            self.eval_into(x, out.column_mut(j).as_mut_slice());
        }
        Ok(out)
    }
}

impl<B: Basis + ?Sized> Basis for &B {
    fn size(&self) -> usize {
        (**self).size()
    }

    fn domain(&self) -> &Domain {
        (**self).domain()
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) {
        (**self).eval_into(x, out)
    }

    fn min_quadrature_nodes(&self) -> usize {
        (**self).min_quadrature_nodes()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisFamily {
    /// Constant, then `cos(jπx̃)`, `sin(jπx̃)` pairs on the rescaled interval.
    Fourier,
    /// Equal-width indicator functions.
    Bins,
}

/// An L²-orthonormal basis on a domain interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSet {
    family: BasisFamily,
    size: usize,
    domain: Domain,
}

impl BasisSet {
    pub fn new(family: BasisFamily, size: usize, domain: Domain) -> Result<Self> {
        if size == 0 {
            return Err(DgpError::InvalidParameter {
                name: "basis size",
                reason: "need at least one basis function".into(),
            });
        }
        Ok(Self {
            family,
            size,
            domain,
        })
    }

    pub fn fourier(size: usize, domain: Domain) -> Result<Self> {
        Self::new(BasisFamily::Fourier, size, domain)
    }

    pub fn bins(size: usize, domain: Domain) -> Result<Self> {
        Self::new(BasisFamily::Bins, size, domain)
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    /// Width of one bin for the bins family.
    pub fn bin_width(&self) -> f64 {
        self.domain.length() / self.size as f64
    }
}

impl Basis for BasisSet {
    fn size(&self) -> usize {
        self.size
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.size);
        let len = self.domain.length();
        match self.family {
            BasisFamily::Fourier => {
                // Orthonormal in L²(domain): constant 1/√L, harmonics √(2/L).
                let scaled = 2.0 * (x - self.domain.lo()) / len - 1.0;
                let harmonic = (2.0 / len).sqrt();
                out[0] = 1.0 / len.sqrt();
                for (i, u) in out.iter_mut().enumerate().skip(1) {
                    let arg = i.div_ceil(2) as f64 * PI * scaled;
                    *u = harmonic * if i % 2 == 1 { arg.cos() } else { arg.sin() };
                }
            }
            BasisFamily::Bins => {
                out.fill(0.0);
                let width = self.bin_width();
                let idx = (((x - self.domain.lo()) / width).floor().max(0.0) as usize)
                    .min(self.size - 1);
                out[idx] = 1.0 / width.sqrt();
            }
        }
    }

    fn min_quadrature_nodes(&self) -> usize {
        match self.family {
            BasisFamily::Fourier => 2 * self.size,
            // Indicators are integrated exactly once each bin holds a node.
            BasisFamily::Bins => self.size,
        }
    }
}

/// `Λ_U = ∫ U(x)Uᵀ(x) dx`, approximated by the midpoint rule on `grid`.
pub fn gram_matrix<B: Basis + ?Sized>(basis: &B, grid: &QuadratureGrid) -> Result<DMatrix<f64>> {
    let samples = basis_samples(basis, grid)?;
    Ok(gram_from_samples(&samples, grid.spacing()))
}

/// Basis sampled on the grid nodes (`M × n_q`), after validating coverage.
fn basis_samples<B: Basis + ?Sized>(basis: &B, grid: &QuadratureGrid) -> Result<DMatrix<f64>> {
    if grid.domain() != basis.domain() {
        return Err(DgpError::InvalidParameter {
            name: "quadrature grid",
            reason: "grid must cover exactly the basis domain".into(),
        });
    }
    let required = basis.min_quadrature_nodes();
    if grid.len() < required {
        return Err(DgpError::InsufficientQuadrature {
            nodes: grid.len(),
            basis_size: basis.size(),
            required,
        });
    }
    basis.eval_matrix(grid.nodes())
}

fn gram_from_samples(samples: &DMatrix<f64>, dx: f64) -> DMatrix<f64> {
    let mut gram = samples * samples.transpose() * dx;
    linalg::symmetrize(&mut gram);
    gram
}

/// Whether a projected kernel plays a covariance role (PSD enforced) or the
/// transition role (unrestricted).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelRole {
    Covariance,
    Transition,
}

/// Coefficients `z̄` of `x ↦ Uᵀ(x) z̄`.
#[derive(Debug, Clone)]
pub struct ProjectedFunction<B> {
    pub basis: B,
    pub coefficients: DVector<f64>,
}

impl<B: Basis> ProjectedFunction<B> {
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.basis.eval(x)?.dot(&self.coefficients))
    }

    pub fn eval_many(&self, xs: &[f64]) -> Result<DVector<f64>> {
        Ok(self.basis.eval_matrix(xs)?.tr_mul(&self.coefficients))
    }
}

/// Coefficients `Λ` of `(x, x') ↦ Uᵀ(x) Λ U(x')`.
#[derive(Debug, Clone)]
pub struct ProjectedKernel<B> {
    pub basis: B,
    pub lambda: DMatrix<f64>,
}

impl<B: Basis> ProjectedKernel<B> {
    pub fn into_kernel(self) -> Result<SeparableKernel<B>> {
        SeparableKernel::new(self.basis, self.lambda)
    }
}

/// Least-squares projector onto a basis over a fixed quadrature grid.
///
/// Caches the basis samples and the Gram factorization so that several
/// functions and kernels can be projected onto the same basis cheaply.
#[derive(Debug, Clone)]
pub struct Projector<B> {
    basis: B,
    grid: QuadratureGrid,
    samples: DMatrix<f64>,
    gram: DMatrix<f64>,
    gram_chol: Cholesky<f64, Dyn>,
}

impl<B: Basis + Clone> Projector<B> {
    pub fn new(basis: B, grid: QuadratureGrid) -> Result<Self> {
        let samples = basis_samples(&basis, &grid)?;
        let gram = gram_from_samples(&samples, grid.spacing());
        let gram_chol = gram.clone().cholesky().ok_or(DgpError::RankDeficient {
            context: "basis gram matrix",
        })?;
        Ok(Self {
            basis,
            grid,
            samples,
            gram,
            gram_chol,
        })
    }

    pub fn basis(&self) -> &B {
        &self.basis
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Basis samples on the grid nodes, `M × n_q`.
    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    /// Projects function values given at the grid nodes.
    pub fn project_samples(&self, values: &DVector<f64>) -> Result<ProjectedFunction<B>> {
        if values.len() != self.grid.len() {
            return Err(DgpError::DimensionMismatch {
                context: "function samples",
                expected: self.grid.len(),
                actual: values.len(),
            });
        }
        let rhs = &self.samples * values * self.grid.spacing();
        Ok(ProjectedFunction {
            basis: self.basis.clone(),
            coefficients: self.gram_chol.solve(&rhs),
        })
    }

    pub fn project_function<F: Fn(f64) -> f64>(&self, f: F) -> Result<ProjectedFunction<B>> {
        let values = DVector::from_iterator(self.grid.len(), self.grid.nodes().iter().map(|&x| f(x)));
        self.project_samples(&values)
    }

    /// Projects a kernel onto `U(x) ⊗ U(x')`.
    ///
    /// Solves `Λ_U Λ Λ_U = B K Bᵀ Δx²`, the normal equations of the
    /// double-Riemann-sum least-squares problem.
    pub fn project_kernel<K: Kernel + ?Sized>(
        &self,
        kernel: &K,
        role: KernelRole,
    ) -> Result<ProjectedKernel<B>> {
        let k = kernel_matrix_self(kernel, self.grid.domain(), self.grid.nodes())?;
        let dx = self.grid.spacing();
        let rhs = &self.samples * k * self.samples.transpose() * (dx * dx);
        let left = self.gram_chol.solve(&rhs);
        let mut lambda = self.gram_chol.solve(&left.transpose()).transpose();
        if kernel.is_symmetric() {
            linalg::symmetrize(&mut lambda);
        }
        if role == KernelRole::Covariance {
            if !kernel.is_symmetric() {
                return Err(DgpError::InvalidParameter {
                    name: "kernel",
                    reason: "covariance kernels must be symmetric".into(),
                });
            }
            lambda = linalg::clip_psd(lambda, "projected covariance kernel")?;
        }
        Ok(ProjectedKernel {
            basis: self.basis.clone(),
            lambda,
        })
    }

    /// Riemann L² norm of `values - Uᵀz̄` over the grid.
    pub fn residual_norm(&self, values: &DVector<f64>, projected: &ProjectedFunction<B>) -> f64 {
        let recon = self.samples.tr_mul(&projected.coefficients);
        ((values - recon).norm_squared() * self.grid.spacing()).sqrt()
    }
}

/// One-shot projection of grid samples onto `basis`.
pub fn project_function<B: Basis + Clone>(
    values: &DVector<f64>,
    basis: &B,
    grid: &QuadratureGrid,
) -> Result<ProjectedFunction<B>> {
    Projector::new(basis.clone(), grid.clone())?.project_samples(values)
}

/// One-shot projection of a kernel onto `basis`.
pub fn project_kernel<B: Basis + Clone, K: Kernel + ?Sized>(
    kernel: &K,
    role: KernelRole,
    basis: &B,
    grid: &QuadratureGrid,
) -> Result<ProjectedKernel<B>> {
    Projector::new(basis.clone(), grid.clone())?.project_kernel(kernel, role)
}
