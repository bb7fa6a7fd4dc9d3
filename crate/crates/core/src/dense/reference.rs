//! Closed-form references the dynamic estimators reduce to: batch GP
//! regression and the combined-form Kalman filter.

use nalgebra::{DMatrix, DVector};

use crate::error::{DgpError, Result};
use crate::kernel::Kernel;

/// GP posterior mean and covariance on a probe set.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

fn gram<K: Kernel + ?Sized>(kernel: &K, xs: &[f64], ys: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(xs.len(), ys.len(), |i, j| kernel.eval(xs[i], ys[j]))
}

/// Batch GP regression of `ys` observed at `xs` with i.i.d. noise variance
/// `noise_var`, evaluated on `probe`:
///
/// `f̂(x) = f̄(x) + 𝐋(x,X)(Y − f̄(X))`, `ĉ(x,x') = k(x,x') − 𝐋(x,X) k(X,x')`
/// with `𝐋 = k(x,X)[k(X,X) + σ²I]⁻¹`.
pub fn gp_reference<K, F>(
    xs: &[f64],
    ys: &[f64],
    mean_fn: F,
    kernel: &K,
    noise_var: f64,
    probe: &[f64],
) -> Result<GpPosterior>
where
    K: Kernel + ?Sized,
    F: Fn(f64) -> f64,
{
    if xs.len() != ys.len() {
        return Err(DgpError::DimensionMismatch {
            context: "gp reference data",
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    let prior_mean = DVector::from_iterator(probe.len(), probe.iter().map(|&x| mean_fn(x)));
    let prior_cov = gram(kernel, probe, probe);
    if xs.is_empty() {
        return Ok(GpPosterior {
            mean: prior_mean,
            cov: prior_cov,
        });
    }
    let mut k_xx = gram(kernel, xs, xs);
    for i in 0..xs.len() {
        k_xx[(i, i)] += noise_var;
    }
    let chol = k_xx.cholesky().ok_or(DgpError::Factorization {
        context: "gp reference gram matrix",
    })?;
    let residual = DVector::from_iterator(xs.len(), xs.iter().zip(ys).map(|(&x, &y)| y - mean_fn(x)));
    let k_xp = gram(kernel, xs, probe);
    // 𝐋ᵀ = [k(X,X) + σ²I]⁻¹ k(X, probe)
    let gain_t = chol.solve(&k_xp);
    let k_px = gram(kernel, probe, xs);
    Ok(GpPosterior {
        mean: prior_mean + gain_t.tr_mul(&residual),
        cov: prior_cov - gain_t.tr_mul(&k_px.transpose()),
    })
}

/// Measurement model `y_t = C_t x_t + v_t`, `v_t ~ N(0, V_t)`, at one step.
#[derive(Debug, Clone)]
pub struct KalmanStep {
    pub observation: DMatrix<f64>,
    pub noise: DMatrix<f64>,
    pub values: DVector<f64>,
}

/// One-step-ahead prediction `(x̂_{t+1|t}, S_{t+1|t})`.
#[derive(Debug, Clone)]
pub struct KalmanPrediction {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Kalman filter in combined update–predict form, started from
/// `x̂_{0|-1} = x̄_0`, `S_{0|-1} = S̄`:
///
/// ```text
/// L_t       = S Cᵀ (C S Cᵀ + V)⁻¹
/// x̂_{t+1|t} = A x̂ + A L_t (y_t − C x̂)
/// S_{t+1|t} = A S Aᵀ − A L_t C S Aᵀ + W
/// ```
///
/// Returns one prediction per step.
pub fn kalman_reference(
    a: &DMatrix<f64>,
    w: &DMatrix<f64>,
    x0: &DVector<f64>,
    s0: &DMatrix<f64>,
    steps: &[KalmanStep],
) -> Result<Vec<KalmanPrediction>> {
    let n = x0.len();
    for (context, m) in [("kalman A", a), ("kalman W", w), ("kalman S0", s0)] {
        if m.nrows() != n || m.ncols() != n {
            return Err(DgpError::DimensionMismatch {
                context,
                expected: n,
                actual: m.nrows().max(m.ncols()),
            });
        }
    }
    let mut x = x0.clone();
    let mut s = s0.clone();
    let mut out = Vec::with_capacity(steps.len());
    for step in steps {
        let c = &step.observation;
        let p = c.nrows();
        if c.ncols() != n || step.noise.shape() != (p, p) || step.values.len() != p {
            return Err(DgpError::DimensionMismatch {
                context: "kalman step",
                expected: p,
                actual: step.values.len(),
            });
        }
        let (next_x, next_s) = if p == 0 {
            (a * &x, a * &s * a.transpose() + w)
        } else {
            let innovation_cov = c * &s * c.transpose() + &step.noise;
            let chol = innovation_cov.cholesky().ok_or(DgpError::Factorization {
                context: "kalman innovation covariance",
            })?;
            let gain = chol.solve(&(c * &s)).transpose();
            let al = a * &gain;
            let next_x = a * &x + &al * (&step.values - c * &x);
            let next_s = a * &s * a.transpose() - &al * c * &s * a.transpose() + w;
            (next_x, next_s)
        };
        x = next_x;
        s = next_s;
        out.push(KalmanPrediction {
            mean: x.clone(),
            cov: s.clone(),
        });
    }
    Ok(out)
}
