//! Ground-truth trajectories and noisy local observations.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dense::build_transfer_operator;
use crate::error::{DgpError, Result};
use crate::grid::{Domain, QuadratureGrid, Snap};
use crate::kernel::{kernel_matrix_self, GaussianSampler, Kernel, SqExpKernel, WhiteNoiseKernel};
use crate::observation::ObservationBatch;

/// Parameters of the simulated system.
///
/// A `None` kernel is the zero kernel; a `None` initial mean is `f̄_0 ≡ 0`.
/// The initial mean `Some(φ)` is the bump `x ↦ φ(x - 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthConfig {
    pub domain: Domain,
    pub grid_size: usize,
    pub transition: Option<SqExpKernel>,
    pub initial_cov: Option<SqExpKernel>,
    pub disturbance: Option<SqExpKernel>,
    pub initial_mean: Option<SqExpKernel>,
    pub noise: WhiteNoiseKernel,
    pub horizon: usize,
    pub sensors: usize,
}

impl GroundTruthConfig {
    /// The case-study setup on `[-1, 1]` with a 625-node truth grid.
    pub fn case_study() -> Self {
        Self {
            domain: Domain::symmetric_unit(),
            grid_size: 625,
            transition: Some(SqExpKernel::new(5.13, 0.07).expect("valid")),
            initial_cov: Some(SqExpKernel::new(1.0, 0.7).expect("valid")),
            disturbance: Some(SqExpKernel::new(0.35, 0.15).expect("valid")),
            initial_mean: Some(SqExpKernel::new(10.0, 0.05).expect("valid")),
            noise: WhiteNoiseKernel::new(0.1).expect("valid"),
            horizon: 10,
            sensors: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 {
            return Err(DgpError::InvalidParameter {
                name: "truth grid size",
                reason: format!("need at least 2 nodes, got {}", self.grid_size),
            });
        }
        Ok(())
    }

    pub fn initial_mean_at(&self, x: f64) -> f64 {
        self.initial_mean.map_or(0.0, |k| k.eval(x, 0.0))
    }

    pub fn grid(&self) -> Result<QuadratureGrid> {
        QuadratureGrid::new(self.domain, self.grid_size)
    }
}

/// Truth and observations at one time step.
#[derive(Debug, Clone)]
pub struct TrajectoryStep {
    pub truth: DVector<f64>,
    pub observations: ObservationBatch,
}

/// Realization of `f_t` on the truth grid for `t = 0..=N`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: QuadratureGrid,
    pub steps: Vec<TrajectoryStep>,
}

fn sampler_for(kernel: Option<&SqExpKernel>, grid: &QuadratureGrid) -> Result<GaussianSampler> {
    let cov = match kernel {
        Some(k) => kernel_matrix_self(k, grid.domain(), grid.nodes())?,
        None => nalgebra::DMatrix::zeros(grid.len(), grid.len()),
    };
    GaussianSampler::new(&cov)
}

/// Simulates `f_0 ~ GP(f̄_0, Q_f)`, then per step draws the observation
/// batch and propagates `f_{t+1} = T f_t + w_t` with `w_t ~ GP(0, Q_w)`,
/// all on the truth grid.
///
/// Random draws happen in a fixed order (initial condition, then per step
/// locations, noise, disturbance), so a seeded `rng` gives a reproducible
/// trajectory.
pub fn simulate<R: Rng + ?Sized>(config: &GroundTruthConfig, rng: &mut R) -> Result<Trajectory> {
    config.validate()?;
    let grid = config.grid()?;
    let transfer = build_transfer_operator(config.transition.as_ref().map(|k| k as &dyn Kernel), &[], &grid)?;
    let initial = sampler_for(config.initial_cov.as_ref(), &grid)?;
    let disturbance = sampler_for(config.disturbance.as_ref(), &grid)?;

    let mean0 = DVector::from_iterator(grid.len(), grid.nodes().iter().map(|&x| config.initial_mean_at(x)));
    let mut f = initial.sample(&mean0, rng)?;
    let zero = DVector::zeros(grid.len());
    let mut steps = Vec::with_capacity(config.horizon + 1);
    for t in 0..=config.horizon {
        let observations = draw_observations(&f, &grid, config.sensors, &config.noise, rng)?;
        let next = if t < config.horizon {
            Some(transfer.apply(&f) + disturbance.sample(&zero, rng)?)
        } else {
            None
        };
        steps.push(TrajectoryStep { truth: f, observations });
        match next {
            Some(n) => f = n,
            None => break,
        }
    }
    Ok(Trajectory { grid, steps })
}

/// Draws `p` i.i.d. uniform locations and reads the truth at the nearest grid
/// node, adding independent `N(0, σ_v²)` noise.
pub fn draw_observations<R: Rng + ?Sized>(
    truth: &DVector<f64>,
    grid: &QuadratureGrid,
    p: usize,
    noise: &WhiteNoiseKernel,
    rng: &mut R,
) -> Result<ObservationBatch> {
    if truth.len() != grid.len() {
        return Err(DgpError::DimensionMismatch {
            context: "truth vector",
            expected: grid.len(),
            actual: truth.len(),
        });
    }
    let domain = grid.domain();
    let locations: Vec<f64> = (0..p).map(|_| rng.random_range(domain.lo()..=domain.hi())).collect();
    let mut values = Vec::with_capacity(p);
    for &x in &locations {
        let node = grid.snap(x, Snap::Nearest)?;
        let eps: f64 = rng.sample(StandardNormal);
        values.push(truth[node] + noise.std_dev() * eps);
    }
    ObservationBatch::new(locations, values, noise)
}

/// Maps values on `from` onto `to` by nearest-node lookup.
pub fn inject_nearest(values: &DVector<f64>, from: &QuadratureGrid, to: &QuadratureGrid) -> Result<DVector<f64>> {
    if values.len() != from.len() {
        return Err(DgpError::DimensionMismatch {
            context: "injected values",
            expected: from.len(),
            actual: values.len(),
        });
    }
    to.nodes()
        .iter()
        .map(|&x| from.nearest_index(x).map(|i| values[i]))
        .collect::<Result<Vec<_>>>()
        .map(DVector::from_vec)
}
