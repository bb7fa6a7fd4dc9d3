//! Reduction checks: the dynamic estimators against batch GP regression and
//! the Kalman filter, and the separable estimator against the dense one.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::basis::{Basis, BasisSet, KernelRole, Projector};
use crate::dense::{
    build_transfer_operator, gp_reference, kalman_reference, DenseDynamics, DenseState, KalmanStep, PointMass,
};
use crate::error::Result;
use crate::grid::{Domain, QuadratureGrid, Snap};
use crate::kernel::{kernel_matrix_self, Kernel, SeparableKernel, SqExpKernel};
use crate::observation::ObservationBatch;
use crate::separable::{SeparableDynamics, SeparableState};

/// Largest absolute deviation found by a check and the bound it must meet.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_abs_diff: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_abs_diff <= self.tolerance
    }
}

fn max_diff_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

fn max_diff_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// `B Bᵀ / n + ridge·I` for a Gaussian `B`.
fn random_psd(rng: &mut ChaCha8Rng, n: usize, ridge: f64) -> DMatrix<f64> {
    let b = normal_matrix(rng, n, n);
    let mut m = &b * b.transpose() / n as f64 + DMatrix::identity(n, n) * ridge;
    crate::linalg::symmetrize(&mut m);
    m
}

/// Random `A` rescaled to spectral norm 0.95.
fn random_stable(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = normal_matrix(rng, n, n);
    let norm = a.clone().singular_values().max();
    a * (0.95 / norm)
}

/// Dense estimator with point-mass dynamics `T = A` against the Kalman
/// filter, observing `p` random states per step.
pub fn kf_dense(seed: u64, n: usize, p: usize, steps: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = QuadratureGrid::new(Domain::symmetric_unit(), n)?;
    let a = random_stable(&mut rng, n);
    let w = random_psd(&mut rng, n, 0.0);
    let s0 = random_psd(&mut rng, n, 0.1);
    let x0 = normal_vector(&mut rng, n);

    let transfer = build_transfer_operator(None, &PointMass::from_matrix(&a, &grid)?, &grid)?;
    let dynamics = DenseDynamics::from_matrices(transfer, w.clone())?;
    let mut state = DenseState::init(grid.clone(), x0.clone(), s0.clone())?;

    let mut kf_steps = Vec::with_capacity(steps);
    let mut dense_predictions = Vec::with_capacity(steps);
    for _ in 0..steps {
        let idx = sample(&mut rng, n, p.min(n)).into_vec();
        let v = random_psd(&mut rng, idx.len(), 0.1);
        let y = normal_vector(&mut rng, idx.len()) * 3.0;
        let c = DMatrix::from_fn(idx.len(), n, |r, col| if idx[r] == col { 1.0 } else { 0.0 });
        let locations = idx.iter().map(|&i| grid.nodes()[i]).collect();
        let obs = ObservationBatch::with_noise_matrix(locations, y.iter().copied().collect(), v.clone())?;
        state = state.update(&obs, Snap::strict(&grid))?.predict(&dynamics)?;
        dense_predictions.push((state.mean().clone(), state.cov().clone()));
        kf_steps.push(KalmanStep {
            observation: c,
            noise: v,
            values: y,
        });
    }
    let reference = kalman_reference(&a, &w, &x0, &s0, &kf_steps)?;
    let max_abs_diff = reference
        .iter()
        .zip(&dense_predictions)
        .map(|(r, (m, c))| max_diff_vec(&r.mean, m).max(max_diff_mat(&r.cov, c)))
        .fold(0.0, f64::max);
    Ok(CheckResult {
        name: "kf_dense",
        max_abs_diff,
        tolerance: 1e-10,
    })
}

fn gp_data(rng: &mut ChaCha8Rng, steps: usize, p: usize, pick: impl Fn(&mut ChaCha8Rng) -> f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..steps)
        .map(|_| {
            let xs: Vec<f64> = (0..p).map(|_| pick(rng)).collect();
            let ys: Vec<f64> = (0..p).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            (xs, ys)
        })
        .collect()
}

fn flatten(data: &[(Vec<f64>, Vec<f64>)]) -> (Vec<f64>, Vec<f64>) {
    let xs = data.iter().flat_map(|(x, _)| x.iter().copied()).collect();
    let ys = data.iter().flat_map(|(_, y)| y.iter().copied()).collect();
    (xs, ys)
}

/// Dense estimator with identity dynamics and no disturbance against batch
/// GP regression on all data, with observations at grid nodes.
pub fn gp_dense(seed: u64, steps: usize, p: usize) -> Result<CheckResult> {
    const NOISE_STD: f64 = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = QuadratureGrid::new(Domain::symmetric_unit(), 101)?;
    let kernel = SqExpKernel::new(1.0, 0.7)?;
    let mean_fn = |x: f64| (3.0 * x).sin();

    let transfer = build_transfer_operator(None, &[PointMass::identity(&grid)], &grid)?;
    let dynamics = DenseDynamics::new(transfer, None, &grid)?;
    let mut state = DenseState::from_prior(grid.clone(), mean_fn, &kernel)?;
    let data = gp_data(&mut rng, steps, p, |r| grid.nodes()[r.random_range(0..grid.len())]);
    let noise = crate::kernel::WhiteNoiseKernel::new(NOISE_STD)?;
    for (t, (xs, ys)) in data.iter().enumerate() {
        if t > 0 {
            state = state.predict(&dynamics)?;
        }
        let obs = ObservationBatch::new(xs.clone(), ys.clone(), &noise)?;
        state = state.update(&obs, Snap::strict(&grid))?;
    }
    let (xs, ys) = flatten(&data);
    let reference = gp_reference(&xs, &ys, mean_fn, &kernel, NOISE_STD * NOISE_STD, grid.nodes())?;
    Ok(CheckResult {
        name: "gp_dense",
        max_abs_diff: max_diff_vec(state.mean(), &reference.mean).max(max_diff_mat(state.cov(), &reference.cov)),
        tolerance: 1e-8,
    })
}

/// Separable estimator with identity dynamics against batch GP regression
/// under the separable prior it represents, at arbitrary locations.
pub fn gp_separable(seed: u64, steps: usize, p: usize) -> Result<CheckResult> {
    const NOISE_STD: f64 = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = Domain::symmetric_unit();
    let basis = BasisSet::fourier(9, domain)?;
    let projector = Projector::new(basis, QuadratureGrid::new(domain, 1024)?)?;
    let prior_cov = projector
        .project_kernel(&SqExpKernel::new(1.0, 0.7)?, KernelRole::Covariance)?
        .lambda;
    let prior_mean = projector.project_function(|x| (3.0 * x).sin())?;
    let kernel = SeparableKernel::covariance(basis, prior_cov.clone())?;
    let dynamics = SeparableDynamics::identity(projector.gram().clone())?;

    let mut state = SeparableState::init(basis, prior_cov, prior_mean.coefficients.clone())?;
    let data = gp_data(&mut rng, steps, p, |r| r.random_range(domain.lo()..=domain.hi()));
    let noise = crate::kernel::WhiteNoiseKernel::new(NOISE_STD)?;
    for (t, (xs, ys)) in data.iter().enumerate() {
        if t > 0 {
            state = state.predict(&dynamics)?;
        }
        state = state.update(&ObservationBatch::new(xs.clone(), ys.clone(), &noise)?)?;
    }
    let probe = QuadratureGrid::new(domain, 101)?;
    let (xs, ys) = flatten(&data);
    let mean_fn = |x: f64| prior_mean.eval(x).unwrap_or(f64::NAN);
    let reference = gp_reference(&xs, &ys, mean_fn, &kernel, NOISE_STD * NOISE_STD, probe.nodes())?;
    let mean = state.mean_on(probe.nodes())?;
    let cov = state.cov_on(probe.nodes(), probe.nodes())?;
    Ok(CheckResult {
        name: "gp_separable",
        max_abs_diff: max_diff_vec(&mean, &reference.mean).max(max_diff_mat(&cov, &reference.cov)),
        tolerance: 1e-8,
    })
}

/// Separable estimator on `m` bins against the dense estimator on the grid
/// of bin centres, with the case-study kernels and random locations.
pub fn separable_vs_dense(seed: u64, m: usize, steps: usize) -> Result<CheckResult> {
    const NOISE_STD: f64 = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = Domain::symmetric_unit();
    let grid = QuadratureGrid::new(domain, m)?;
    let basis = BasisSet::bins(m, domain)?;
    let projector = Projector::new(basis, grid.clone())?;
    let transition = SqExpKernel::new(5.13, 0.07)?;
    let prior = SqExpKernel::new(1.0, 0.7)?;
    let disturbance = SqExpKernel::new(0.35, 0.15)?;
    let bump = SqExpKernel::new(10.0, 0.05)?;
    let mean_fn = |x: f64| bump.eval(x, 0.0);

    let sep_dynamics = SeparableDynamics::new(
        projector.project_kernel(&transition, KernelRole::Transition)?.lambda,
        projector.project_kernel(&disturbance, KernelRole::Covariance)?.lambda,
        projector.gram().clone(),
    )?;
    let mut sep = SeparableState::init(
        basis,
        projector.project_kernel(&prior, KernelRole::Covariance)?.lambda,
        projector.project_function(mean_fn)?.coefficients,
    )?;

    let transfer = build_transfer_operator(Some(&transition), &[], &grid)?;
    let dense_dynamics = DenseDynamics::new(transfer, Some(&disturbance), &grid)?;
    let mut dense = DenseState::init(
        grid.clone(),
        DVector::from_iterator(m, grid.nodes().iter().map(|&x| mean_fn(x))),
        kernel_matrix_self(&prior, &domain, grid.nodes())?,
    )?;

    let noise = crate::kernel::WhiteNoiseKernel::new(NOISE_STD)?;
    let mut max_abs_diff: f64 = 0.0;
    for t in 0..steps {
        if t > 0 {
            sep = sep.predict(&sep_dynamics)?;
            dense = dense.predict(&dense_dynamics)?;
        }
        let xs: Vec<f64> = (0..3).map(|_| rng.random_range(domain.lo()..=domain.hi())).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| mean_fn(x) + rng.sample::<f64, _>(StandardNormal)).collect();
        let obs = ObservationBatch::new(xs, ys, &noise)?;
        sep = sep.update(&obs)?;
        dense = dense.update(&obs, Snap::Nearest)?;
        let mean = sep.mean_on(grid.nodes())?;
        let cov = sep.cov_on(grid.nodes(), grid.nodes())?;
        max_abs_diff = max_abs_diff
            .max(max_diff_vec(&mean, dense.mean()))
            .max(max_diff_mat(&cov, dense.cov()));
    }
    debug_assert_eq!(basis.size(), m);
    Ok(CheckResult {
        name: "separable_vs_dense",
        max_abs_diff,
        tolerance: 1e-8,
    })
}

pub fn run_all(seed: u64) -> Result<Vec<CheckResult>> {
    Ok(vec![
        gp_dense(seed, 5, 3)?,
        gp_separable(seed, 5, 3)?,
        kf_dense(seed, 10, 3, 20)?,
        separable_vs_dense(seed, 64, 10)?,
    ])
}

/// One `<name> <max_abs_diff> <tolerance> PASS|FAIL` line per check.
pub fn render(checks: &[CheckResult]) -> String {
    let mut out = String::new();
    for c in checks {
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{} {:.3e} {:.0e} {verdict}", c.name, c.max_abs_diff, c.tolerance);
    }
    out
}
