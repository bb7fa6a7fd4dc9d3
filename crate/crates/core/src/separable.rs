//! Fast estimator for separable kernels.
//!
//! With `k_f = UᵀΛU`, `Q_f = UᵀΛ_fU`, `Q_w = UᵀΛ_wU` and `f̄_0 = Uᵀz̄`, the
//! mean and covariance stay of the form `Uᵀ(x) z` and `Uᵀ(x) Ψ U(x')` under
//! both the measurement update and the prediction, so only `(z, Ψ)` is
//! tracked:
//!
//! ```text
//! Γ_t       = Ψ 𝐔 [𝐔ᵀ Ψ 𝐔 + R_t]⁻¹          𝐔 = 𝐔(X_t) ∈ ℝ^{M×p}
//! z_{t|t}   = z + Γ_t (Y_t − 𝐔ᵀ z)
//! Ψ_{t|t}   = Ψ − Γ_t 𝐔ᵀ Ψ
//! z_{t+1|t} = Λ Λ_U z_{t|t}
//! Ψ_{t+1|t} = Λ Λ_U Ψ_{t|t} Λ_U Λᵀ + Λ_w
//! ```

use nalgebra::{DMatrix, DVector};

use crate::basis::Basis;
use crate::error::{DgpError, Result};
use crate::linalg;
use crate::observation::ObservationBatch;

/// Which data the belief about `f_t` is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Conditioned on data up to `t - 1`; awaiting the batch of step `t`.
    Predicted,
    /// Conditioned on data up to `t`; ready to be propagated.
    Filtered,
}

/// Coefficient-space dynamics: transition `Λ`, disturbance `Λ_w` and Gram
/// matrix `Λ_U`.
#[derive(Debug, Clone)]
pub struct SeparableDynamics {
    transition: DMatrix<f64>,
    disturbance: DMatrix<f64>,
    gram: DMatrix<f64>,
    // Λ Λ_U, applied on both sides of Ψ.
    propagator: DMatrix<f64>,
}

impl SeparableDynamics {
    pub fn new(transition: DMatrix<f64>, disturbance: DMatrix<f64>, gram: DMatrix<f64>) -> Result<Self> {
        let m = gram.nrows();
        for (context, mat) in [
            ("gram matrix", &gram),
            ("transition coefficients", &transition),
            ("disturbance coefficients", &disturbance),
        ] {
            if mat.nrows() != m || mat.ncols() != m {
                return Err(DgpError::DimensionMismatch {
                    context,
                    expected: m,
                    actual: if mat.nrows() != m { mat.nrows() } else { mat.ncols() },
                });
            }
        }
        if !linalg::is_symmetric(&disturbance) {
            return Err(DgpError::InvalidParameter {
                name: "disturbance coefficients",
                reason: "must be symmetric".into(),
            });
        }
        linalg::ensure_psd(&disturbance, "disturbance coefficients")?;
        if !linalg::is_symmetric(&gram) || gram.clone().cholesky().is_none() {
            return Err(DgpError::InvalidParameter {
                name: "gram matrix",
                reason: "must be symmetric positive definite".into(),
            });
        }
        let propagator = &transition * &gram;
        Ok(Self {
            transition,
            disturbance,
            gram,
            propagator,
        })
    }

    /// Dynamics that leave the function unchanged: `Λ = Λ_U⁻¹`, `Λ_w = 0`.
    pub fn identity(gram: DMatrix<f64>) -> Result<Self> {
        let m = gram.nrows();
        let inverse = gram
            .clone()
            .cholesky()
            .ok_or(DgpError::RankDeficient { context: "gram matrix" })?
            .inverse();
        Self::new(inverse, DMatrix::zeros(m, m), gram)
    }

    pub fn size(&self) -> usize {
        self.gram.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn disturbance(&self) -> &DMatrix<f64> {
        &self.disturbance
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }
}

/// Belief `(z_{t|l}, Ψ_{t|l})` over the basis coefficients.
#[derive(Debug, Clone)]
pub struct SeparableState<B> {
    basis: B,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    t: usize,
    stage: Stage,
}

impl<B: Basis> SeparableState<B> {
    /// Prior belief `z_{0|-1} = z̄`, `Ψ_{0|-1} = Λ_f`.
    pub fn init(basis: B, prior_cov: DMatrix<f64>, prior_mean: DVector<f64>) -> Result<Self> {
        let m = basis.size();
        if prior_mean.len() != m {
            return Err(DgpError::DimensionMismatch {
                context: "prior mean coefficients",
                expected: m,
                actual: prior_mean.len(),
            });
        }
        if prior_cov.nrows() != m || prior_cov.ncols() != m {
            return Err(DgpError::DimensionMismatch {
                context: "prior covariance coefficients",
                expected: m,
                actual: prior_cov.nrows(),
            });
        }
        if !linalg::is_symmetric(&prior_cov) {
            return Err(DgpError::InvalidParameter {
                name: "prior covariance coefficients",
                reason: "must be symmetric".into(),
            });
        }
        linalg::ensure_psd(&prior_cov, "prior covariance coefficients")?;
        Ok(Self {
            basis,
            mean: prior_mean,
            cov: prior_cov,
            t: 0,
            stage: Stage::Predicted,
        })
    }

    pub fn basis(&self) -> &B {
        &self.basis
    }

    /// Mean coefficients `z`.
    pub fn mean_coefficients(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Covariance coefficients `Ψ`.
    pub fn cov_coefficients(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Conditions on the batch observed at the current step.
    pub fn update(mut self, obs: &ObservationBatch) -> Result<Self> {
        if self.stage != Stage::Predicted {
            return Err(DgpError::OrderViolation {
                operation: "update",
                expected: "predicted",
            });
        }
        self.stage = Stage::Filtered;
        if obs.is_empty() {
            return Ok(self);
        }
        let u = self.basis.eval_matrix(obs.locations())?;
        // H = 𝐔ᵀΨ, so Γ𝐔ᵀΨ = Γ H and Γᵀ = S⁻¹ H by symmetry of S and Ψ.
        let h = u.tr_mul(&self.cov);
        let mut innovation_cov = &h * &u + obs.noise();
        linalg::symmetrize(&mut innovation_cov);
        let (chol, _) = linalg::jittered_cholesky(&innovation_cov, "separable innovation covariance")?;
        let gain_t = chol.solve(&h);
        let innovation = obs.values() - u.tr_mul(&self.mean);
        self.mean += gain_t.tr_mul(&innovation);
        self.cov -= gain_t.tr_mul(&h);
        linalg::symmetrize(&mut self.cov);
        linalg::ensure_psd(&self.cov, "separable posterior covariance")?;
        Ok(self)
    }

    /// Propagates the filtered belief one step through the dynamics.
    pub fn predict(mut self, dynamics: &SeparableDynamics) -> Result<Self> {
        if self.stage != Stage::Filtered {
            return Err(DgpError::OrderViolation {
                operation: "predict",
                expected: "filtered",
            });
        }
        if dynamics.size() != self.mean.len() {
            return Err(DgpError::DimensionMismatch {
                context: "separable dynamics",
                expected: self.mean.len(),
                actual: dynamics.size(),
            });
        }
        let a = &dynamics.propagator;
        self.mean = a * &self.mean;
        self.cov = a * &self.cov * a.transpose() + &dynamics.disturbance;
        linalg::symmetrize(&mut self.cov);
        linalg::ensure_psd(&self.cov, "separable predicted covariance")?;
        self.t += 1;
        self.stage = Stage::Predicted;
        Ok(self)
    }

    /// `Uᵀ(x) z`.
    pub fn query_mean(&self, x: f64) -> Result<f64> {
        Ok(self.basis.eval(x)?.dot(&self.mean))
    }

    /// `Uᵀ(x) Ψ U(x')`.
    pub fn query_cov(&self, x: f64, y: f64) -> Result<f64> {
        let ux = self.basis.eval(x)?;
        let uy = self.basis.eval(y)?;
        Ok(ux.dot(&(&self.cov * uy)))
    }

    pub fn mean_on(&self, xs: &[f64]) -> Result<DVector<f64>> {
        Ok(self.basis.eval_matrix(xs)?.tr_mul(&self.mean))
    }

    /// Covariance matrix `𝐔ᵀ(X) Ψ 𝐔(X')`.
    pub fn cov_on(&self, xs: &[f64], ys: &[f64]) -> Result<DMatrix<f64>> {
        let ux = self.basis.eval_matrix(xs)?;
        let uy = self.basis.eval_matrix(ys)?;
        Ok(ux.tr_mul(&(&self.cov * uy)))
    }

    /// Pointwise variances `Uᵀ(x_j) Ψ U(x_j)`.
    pub fn variance_on(&self, xs: &[f64]) -> Result<DVector<f64>> {
        let u = self.basis.eval_matrix(xs)?;
        let psi_u = &self.cov * &u;
        Ok(DVector::from_iterator(
            xs.len(),
            (0..xs.len()).map(|j| u.column(j).dot(&psi_u.column(j))),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{gram_matrix, BasisSet};
    use crate::grid::{Domain, QuadratureGrid};
    use crate::kernel::WhiteNoiseKernel;

    #[derive(Debug, Clone)]
    struct Ones(Domain);

    impl Basis for Ones {
        fn size(&self) -> usize {
            1
        }
        fn domain(&self) -> &Domain {
            &self.0
        }
        fn eval_into(&self, _: f64, out: &mut [f64]) {
            out[0] = 1.0;
        }
    }

    fn fourier(m: usize) -> BasisSet {
        BasisSet::fourier(m, Domain::symmetric_unit()).unwrap()
    }

    fn noise(sd: f64) -> WhiteNoiseKernel {
        WhiteNoiseKernel::new(sd).unwrap()
    }

    #[test]
    fn zero_prior_queries_zero() {
        let s = SeparableState::init(fourier(5), DMatrix::zeros(5, 5), DVector::zeros(5)).unwrap();
        for x in [-1.0, 0.0, 0.4] {
            assert_eq!(s.query_mean(x).unwrap(), 0.0);
            assert_eq!(s.query_cov(x, 0.1).unwrap(), 0.0);
        }
    }

    #[test]
    fn identity_prior_gives_basis_inner_products() {
        let b = fourier(5);
        let s = SeparableState::init(b, DMatrix::identity(5, 5), DVector::zeros(5)).unwrap();
        let x = 0.3;
        let y = -0.8;
        let expected = b.eval(x).unwrap().dot(&b.eval(y).unwrap());
        assert!((s.query_cov(x, y).unwrap() - expected).abs() < 1e-14);
        let norm2 = b.eval(x).unwrap().norm_squared();
        assert!((s.query_cov(x, x).unwrap() - norm2).abs() < 1e-14);
    }

    #[test]
    fn mean_query_of_unit_coefficient() {
        let b = fourier(5);
        let mut z = DVector::zeros(5);
        z[0] = 1.0;
        let s = SeparableState::init(b, DMatrix::zeros(5, 5), z).unwrap();
        assert_eq!(s.query_mean(0.7).unwrap(), b.eval(0.7).unwrap()[0]);
    }

    #[test]
    fn init_rejects_indefinite_prior() {
        let mut lf = DMatrix::identity(3, 3);
        lf[(2, 2)] = -1e-3;
        assert!(matches!(
            SeparableState::init(fourier(3), lf, DVector::zeros(3)),
            Err(DgpError::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn scalar_update_by_hand() {
        // Γ = 1/(1+1) = 0.5, z' = 0.5·2 = 1, Ψ' = 1 − 0.5 = 0.5.
        let b = Ones(Domain::symmetric_unit());
        let s = SeparableState::init(b, DMatrix::identity(1, 1), DVector::zeros(1)).unwrap();
        let obs = ObservationBatch::new(vec![0.3], vec![2.0], &noise(1.0)).unwrap();
        let s = s.update(&obs).unwrap();
        assert!((s.mean_coefficients()[0] - 1.0).abs() < 1e-15);
        assert!((s.cov_coefficients()[(0, 0)] - 0.5).abs() < 1e-15);
        for x in [-1.0, 0.0, 0.9] {
            assert!((s.query_mean(x).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_batch_leaves_belief() {
        let b = fourier(3);
        let s = SeparableState::init(b, DMatrix::identity(3, 3), DVector::from_element(3, 0.5)).unwrap();
        let u = s.clone().update(&ObservationBatch::empty()).unwrap();
        assert_eq!(u.mean_coefficients(), s.mean_coefficients());
        assert_eq!(u.cov_coefficients(), s.cov_coefficients());
        assert_eq!(u.stage(), Stage::Filtered);
    }

    #[test]
    fn huge_noise_barely_moves_belief() {
        let b = fourier(5);
        let s = SeparableState::init(b, DMatrix::identity(5, 5), DVector::from_element(5, 1.0)).unwrap();
        let obs = ObservationBatch::new(vec![-0.5, 0.2], vec![10.0, -3.0], &noise(1e6)).unwrap();
        let u = s.clone().update(&obs).unwrap();
        let dz = (u.mean_coefficients() - s.mean_coefficients()).abs().max();
        let dpsi = (u.cov_coefficients() - s.cov_coefficients()).abs().max();
        assert!(dz < 1e-6 && dpsi < 1e-6, "dz={dz} dpsi={dpsi}");
    }

    #[test]
    fn zero_transition_keeps_only_disturbance() {
        let b = fourier(4);
        let lw = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.2, 0.1, 0.0]));
        let dynamics = SeparableDynamics::new(DMatrix::zeros(4, 4), lw.clone(), DMatrix::identity(4, 4)).unwrap();
        let s = SeparableState::init(b, DMatrix::identity(4, 4), DVector::from_element(4, 2.0))
            .unwrap()
            .update(&ObservationBatch::empty())
            .unwrap()
            .predict(&dynamics)
            .unwrap();
        assert_eq!(s.mean_coefficients(), &DVector::zeros(4));
        assert_eq!(s.cov_coefficients(), &lw);
        assert_eq!(s.time(), 1);
    }

    #[test]
    fn identity_dynamics_is_a_no_op() {
        let b = fourier(7);
        let gram = gram_matrix(&b, &QuadratureGrid::new(*b.domain(), 64).unwrap()).unwrap();
        let dynamics = SeparableDynamics::identity(gram).unwrap();
        let lf = DMatrix::from_fn(7, 7, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let z = DVector::from_fn(7, |i, _| i as f64 - 3.0);
        let s = SeparableState::init(b, lf, z)
            .unwrap()
            .update(&ObservationBatch::empty())
            .unwrap();
        let p = s.clone().predict(&dynamics).unwrap();
        assert!((p.mean_coefficients() - s.mean_coefficients()).abs().max() < 1e-12);
        assert!((p.cov_coefficients() - s.cov_coefficients()).abs().max() < 1e-12);
    }

    #[test]
    fn predict_without_disturbance_cannot_raise_rank() {
        let b = fourier(4);
        let v = DVector::from_vec(vec![1.0, 2.0, 0.0, -1.0]);
        let psi = &v * v.transpose();
        let lambda = DMatrix::from_fn(4, 4, |i, j| (i as f64 - j as f64).sin() + 0.3);
        let dynamics = SeparableDynamics::new(lambda, DMatrix::zeros(4, 4), DMatrix::identity(4, 4)).unwrap();
        let s = SeparableState::init(b, psi, DVector::zeros(4))
            .unwrap()
            .update(&ObservationBatch::empty())
            .unwrap()
            .predict(&dynamics)
            .unwrap();
        assert!(s.cov_coefficients().rank(1e-10) <= 1);
    }

    #[test]
    fn call_order_is_enforced() {
        let b = fourier(3);
        let dynamics = SeparableDynamics::new(DMatrix::identity(3, 3), DMatrix::zeros(3, 3), DMatrix::identity(3, 3)).unwrap();
        let s = SeparableState::init(b, DMatrix::identity(3, 3), DVector::zeros(3)).unwrap();
        assert!(matches!(
            s.clone().predict(&dynamics),
            Err(DgpError::OrderViolation { .. })
        ));
        let s = s.update(&ObservationBatch::empty()).unwrap();
        assert!(matches!(
            s.clone().update(&ObservationBatch::empty()),
            Err(DgpError::OrderViolation { .. })
        ));
        assert!(s.predict(&dynamics).is_ok());
    }

    #[test]
    fn dynamics_dimension_checks() {
        assert!(SeparableDynamics::new(DMatrix::identity(2, 2), DMatrix::zeros(3, 3), DMatrix::identity(3, 3)).is_err());
        let indefinite = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(SeparableDynamics::new(DMatrix::identity(2, 2), indefinite, DMatrix::identity(2, 2)).is_err());
        let b = fourier(3);
        let s = SeparableState::init(b, DMatrix::identity(3, 3), DVector::zeros(3))
            .unwrap()
            .update(&ObservationBatch::empty())
            .unwrap();
        let small = SeparableDynamics::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 2), DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(s.predict(&small), Err(DgpError::DimensionMismatch { .. })));
    }

    #[test]
    fn queries_check_domain() {
        let s = SeparableState::init(fourier(3), DMatrix::identity(3, 3), DVector::zeros(3)).unwrap();
        assert!(s.query_mean(1.5).is_err());
        assert!(s.query_cov(0.0, -1.5).is_err());
    }
}
