//! Configuration-driven experiments: simulation, estimation, the basis-size
//! sweep and the reduction checks, with CSV output.

mod config;
mod output;
pub mod reduce;

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use config::{DomainSection, EstimatorSection, ExperimentConfig, KernelParams, OutputSection, TruthSection};
pub use output::{write_errors, write_estimates, write_observations, write_truth};

use crate::basis::{BasisSet, KernelRole, Projector};
use crate::error::DgpError;
use crate::grid::QuadratureGrid;
use crate::separable::{SeparableDynamics, SeparableState};
use crate::simulator::{inject_nearest, simulate, GroundTruthConfig, Trajectory};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{module} failed{}: {source}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    Numerical {
        module: &'static str,
        step: Option<usize>,
        #[source]
        source: DgpError,
    },
}

impl ExperimentError {
    fn numerical(module: &'static str, step: Option<usize>) -> impl FnOnce(DgpError) -> Self {
        move |source| Self::Numerical { module, step, source }
    }

    /// One-line `key=value` rendering for scripted consumers.
    pub fn machine_line(&self) -> String {
        let quoted = |s: &str| format!("{:?}", s);
        match self {
            Self::Config(msg) => format!("error kind=config message={}", quoted(msg)),
            Self::Io { path, source } => format!(
                "error kind=io path={} message={}",
                quoted(&path.display().to_string()),
                quoted(&source.to_string())
            ),
            Self::Numerical { module, step, source } => format!(
                "error kind=numerical module={module} step={} message={}",
                step.map_or_else(|| "none".to_owned(), |s| s.to_string()),
                quoted(&source.to_string())
            ),
        }
    }
}

/// Estimation error of one basis size at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub t: usize,
    pub basis_size: usize,
    pub error_2norm: f64,
}

/// Filtered estimate `f̂_{t|t}` and its pointwise variance on the probe grid.
#[derive(Debug, Clone)]
pub struct EstimateRecord {
    pub t: usize,
    pub mean: DVector<f64>,
    pub variance: DVector<f64>,
}

/// Riemann L² norm `√(Σ_q (f̂_q − f_q)² Δx)`.
pub fn error_norm(estimate: &DVector<f64>, truth: &DVector<f64>, dx: f64) -> Result<f64, DgpError> {
    if estimate.len() != truth.len() {
        return Err(DgpError::DimensionMismatch {
            context: "error norm",
            expected: truth.len(),
            actual: estimate.len(),
        });
    }
    Ok(((estimate - truth).norm_squared() * dx).sqrt())
}

/// Separable estimator whose priors and dynamics are the truth kernels
/// projected onto a basis.
#[derive(Debug, Clone)]
pub struct ProjectedModel {
    pub prior: SeparableState<BasisSet>,
    pub dynamics: SeparableDynamics,
}

impl ProjectedModel {
    pub fn new(truth: &GroundTruthConfig, basis: BasisSet, quadrature_nodes: usize) -> Result<Self, ExperimentError> {
        let err = ExperimentError::numerical;
        let grid = QuadratureGrid::new(truth.domain, quadrature_nodes).map_err(err("basis_projection", None))?;
        let projector = Projector::new(basis, grid).map_err(err("basis_projection", None))?;
        let m = basis_size(&basis);
        let project = |k: Option<&crate::kernel::SqExpKernel>, role| match k {
            Some(k) => projector.project_kernel(k, role).map(|p| p.lambda),
            None => Ok(DMatrix::zeros(m, m)),
        };
        let prior_cov = project(truth.initial_cov.as_ref(), KernelRole::Covariance).map_err(err("basis_projection", None))?;
        let transition = project(truth.transition.as_ref(), KernelRole::Transition).map_err(err("basis_projection", None))?;
        let disturbance = project(truth.disturbance.as_ref(), KernelRole::Covariance).map_err(err("basis_projection", None))?;
        let prior_mean = projector
            .project_function(|x| truth.initial_mean_at(x))
            .map_err(err("basis_projection", None))?
            .coefficients;
        let dynamics = SeparableDynamics::new(transition, disturbance, projector.gram().clone())
            .map_err(err("separable_estimator", None))?;
        let prior = SeparableState::init(basis, prior_cov, prior_mean).map_err(err("separable_estimator", None))?;
        Ok(Self { prior, dynamics })
    }
}

fn basis_size(b: &BasisSet) -> usize {
    use crate::basis::Basis;
    b.size()
}

/// Output of one estimator run over a trajectory.
#[derive(Debug, Clone)]
pub struct EstimatorRun {
    pub errors: Vec<ErrorRecord>,
    pub estimates: Vec<EstimateRecord>,
}

/// Runs update/predict over the trajectory, recording the filtered estimate
/// on `probe` at every step.
pub fn run_estimator(
    model: &ProjectedModel,
    trajectory: &Trajectory,
    probe: &QuadratureGrid,
) -> Result<EstimatorRun, ExperimentError> {
    let m = basis_size(model.prior.basis());
    let mut state = model.prior.clone();
    let mut errors = Vec::with_capacity(trajectory.steps.len());
    let mut estimates = Vec::with_capacity(trajectory.steps.len());
    let last = trajectory.steps.len().saturating_sub(1);
    for (t, step) in trajectory.steps.iter().enumerate() {
        let err = ExperimentError::numerical;
        state = state.update(&step.observations).map_err(err("separable_estimator", Some(t)))?;
        let mean = state.mean_on(probe.nodes()).map_err(err("separable_estimator", Some(t)))?;
        let variance = state.variance_on(probe.nodes()).map_err(err("separable_estimator", Some(t)))?;
        let truth = inject_nearest(&step.truth, &trajectory.grid, probe).map_err(err("experiment_cli", Some(t)))?;
        let error_2norm = error_norm(&mean, &truth, probe.spacing()).map_err(err("experiment_cli", Some(t)))?;
        errors.push(ErrorRecord {
            t,
            basis_size: m,
            error_2norm,
        });
        estimates.push(EstimateRecord { t, mean, variance });
        if t < last {
            state = state.predict(&model.dynamics).map_err(err("separable_estimator", Some(t)))?;
        }
    }
    Ok(EstimatorRun { errors, estimates })
}

/// Error records for every basis size, all estimating the same trajectory.
/// Sizes run in parallel; records come back grouped in `sizes` order.
pub fn basis_sweep(
    config: &ExperimentConfig,
    truth: &GroundTruthConfig,
    trajectory: &Trajectory,
    sizes: &[usize],
) -> Result<Vec<ErrorRecord>, ExperimentError> {
    let probe = probe_grid(config)?;
    let runs = sizes
        .par_iter()
        .map(|&m| {
            let basis = BasisSet::new(config.estimator.family, m, truth.domain)
                .map_err(ExperimentError::numerical("basis_projection", None))?;
            let model = ProjectedModel::new(truth, basis, config.estimator.quadrature_nodes)?;
            run_estimator(&model, trajectory, &probe).map(|r| r.errors)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(runs.into_iter().flatten().collect())
}

fn probe_grid(config: &ExperimentConfig) -> Result<QuadratureGrid, ExperimentError> {
    QuadratureGrid::new(config.domain()?, config.probe_grid_size()).map_err(ExperimentError::numerical("experiment_cli", None))
}

/// Simulates the configured ground truth with a seeded generator.
pub fn simulate_truth(truth: &GroundTruthConfig, seed: u64) -> Result<Trajectory, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate(truth, &mut rng).map_err(ExperimentError::numerical("simulator", None))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Estimate,
    Sweep,
    ReduceCheck,
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub no_disturbance: bool,
}

/// Result of a run: files written and, for `reduce-check`, whether every
/// check passed.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub checks_passed: bool,
    pub report: Option<String>,
}

pub fn run(mode: Mode, mut config: ExperimentConfig, overrides: &Overrides) -> Result<RunSummary, ExperimentError> {
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(out) = &overrides.out {
        config.output.directory = out.clone();
    }
    if overrides.no_disturbance {
        config.truth.disturbances = false;
    }
    config.validate()?;
    let dir = config.output.directory.clone();
    std::fs::create_dir_all(&dir).map_err(|source| ExperimentError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut files = Vec::new();

    if mode == Mode::ReduceCheck {
        let checks = reduce::run_all(config.seed).map_err(ExperimentError::numerical("reduce_check", None))?;
        let report = reduce::render(&checks);
        let path = dir.join("reduce_check.txt");
        output::write_file(&path, &report)?;
        files.push(path);
        return Ok(RunSummary {
            files,
            checks_passed: checks.iter().all(|c| c.passed()),
            report: Some(report),
        });
    }

    let truth = config.ground_truth()?;
    let trajectory = simulate_truth(&truth, config.seed)?;
    files.push(write_truth(&dir.join("truth.csv"), &trajectory)?);
    files.push(write_observations(&dir.join("observations.csv"), &trajectory)?);

    match mode {
        Mode::Simulate | Mode::ReduceCheck => {}
        Mode::Estimate => {
            let m = config.estimator.sizes[0];
            let basis = BasisSet::new(config.estimator.family, m, truth.domain)
                .map_err(ExperimentError::numerical("basis_projection", None))?;
            let model = ProjectedModel::new(&truth, basis, config.estimator.quadrature_nodes)?;
            let probe = probe_grid(&config)?;
            let run = run_estimator(&model, &trajectory, &probe)?;
            files.push(write_estimates(&dir.join("estimate.csv"), &probe, &run.estimates)?);
            files.push(write_errors(&dir.join("errors.csv"), &run.errors)?);
        }
        Mode::Sweep => {
            let records = basis_sweep(&config, &truth, &trajectory, &config.estimator.sizes)?;
            files.push(write_errors(&dir.join("errors.csv"), &records)?);
        }
    }
    Ok(RunSummary {
        files,
        checks_passed: true,
        report: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Basis;

    #[test]
    fn error_norm_examples() {
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(error_norm(&v, &v, 0.1).unwrap(), 0.0);

        let grid = QuadratureGrid::new(crate::grid::Domain::symmetric_unit(), 1000).unwrap();
        let ones = DVector::from_element(1000, 1.0);
        let zeros = DVector::zeros(1000);
        assert!((error_norm(&ones, &zeros, grid.spacing()).unwrap() - 2f64.sqrt()).abs() < 1e-12);

        assert!(error_norm(&ones, &DVector::zeros(3), 0.1).is_err());
    }

    #[test]
    fn error_norm_of_basis_function_is_one() {
        let grid = QuadratureGrid::new(crate::grid::Domain::symmetric_unit(), 20_000).unwrap();
        let b = BasisSet::fourier(9, *grid.domain()).unwrap();
        for k in [0, 3, 8] {
            let u = DVector::from_iterator(grid.len(), grid.nodes().iter().map(|&x| b.eval(x).unwrap()[k]));
            let n = error_norm(&u, &DVector::zeros(grid.len()), grid.spacing()).unwrap();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sweep_without_data_reports_projection_residual() {
        // Noise-free truth equal to f̄_0 and no sensors: the t = 0 error is
        // the L² residual of projecting f̄_0, computed here on the truth grid.
        let mut config = ExperimentConfig::default();
        config.truth.horizon = 0;
        config.truth.sensors = 0;
        config.truth.initial_covariance.amplitude = 0.0;
        config.estimator.sizes = vec![3];
        let truth = config.ground_truth().unwrap();
        let traj = simulate_truth(&truth, 1).unwrap();
        let records = basis_sweep(&config, &truth, &traj, &[3]).unwrap();
        assert_eq!(records.len(), 1);

        let model_grid = QuadratureGrid::new(truth.domain, config.estimator.quadrature_nodes).unwrap();
        let basis = BasisSet::fourier(3, truth.domain).unwrap();
        let z = Projector::new(basis, model_grid)
            .unwrap()
            .project_function(|x| truth.initial_mean_at(x))
            .unwrap();
        let probe = &traj.grid;
        let f0 = DVector::from_iterator(probe.len(), probe.nodes().iter().map(|&x| truth.initial_mean_at(x)));
        let expected = error_norm(&z.eval_many(probe.nodes()).unwrap(), &f0, probe.spacing()).unwrap();
        assert!((records[0].error_2norm - expected).abs() < 1e-12);
        assert!(expected > 1.0);
    }

    #[test]
    fn numerical_errors_carry_module_and_step() {
        let truth = ExperimentConfig::default().ground_truth().unwrap();
        // A 1-node quadrature grid cannot support 9 Fourier functions.
        let basis = BasisSet::fourier(9, truth.domain).unwrap();
        let err = ProjectedModel::new(&truth, basis, 1).unwrap_err();
        assert!(err.machine_line().starts_with("error kind=numerical module=basis_projection"));

        let e = ExperimentError::Numerical {
            module: "separable_estimator",
            step: Some(4),
            source: DgpError::Factorization { context: "x" },
        };
        assert!(e.to_string().contains("at step 4"));
        assert!(e.machine_line().contains("step=4"));
    }

    #[test]
    fn estimator_variance_drops_at_observation() {
        let mut config = ExperimentConfig::default();
        config.truth.horizon = 2;
        let truth = config.ground_truth().unwrap();
        let traj = simulate_truth(&truth, 9).unwrap();
        let basis = BasisSet::fourier(31, truth.domain).unwrap();
        let model = ProjectedModel::new(&truth, basis, 1024).unwrap();
        let obs = &traj.steps[0].observations;
        let x = obs.locations()[0];
        let prior_var = model.prior.query_cov(x, x).unwrap();
        let post = model.prior.clone().update(obs).unwrap();
        assert!(post.query_cov(x, x).unwrap() < prior_var);
    }
}
