//! TOML experiment configuration. Every field defaults to the case-study
//! setup; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::basis::BasisFamily;
use crate::grid::Domain;
use crate::kernel::{SqExpKernel, WhiteNoiseKernel};
use crate::simulator::GroundTruthConfig;

use super::ExperimentError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub domain: DomainSection,
    pub truth: TruthSection,
    pub estimator: EstimatorSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSection {
    pub lo: f64,
    pub hi: f64,
}

/// Squared-exponential parameters; an amplitude of zero selects the zero
/// kernel.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    pub amplitude: f64,
    pub length_scale: f64,
}

impl KernelParams {
    const fn new(amplitude: f64, length_scale: f64) -> Self {
        Self {
            amplitude,
            length_scale,
        }
    }

    fn build(&self, field: &str) -> Result<Option<SqExpKernel>, ExperimentError> {
        if self.amplitude == 0.0 {
            return Ok(None);
        }
        SqExpKernel::new(self.amplitude, self.length_scale)
            .map(Some)
            .map_err(|e| ExperimentError::Config(format!("{field}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruthSection {
    pub grid_size: usize,
    pub horizon: usize,
    pub sensors: usize,
    pub noise_std: f64,
    pub disturbances: bool,
    pub transition: KernelParams,
    pub initial_covariance: KernelParams,
    pub disturbance: KernelParams,
    pub initial_mean: KernelParams,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub family: BasisFamily,
    /// Basis sizes for the sweep; `estimate` uses the first entry.
    pub sizes: Vec<usize>,
    pub quadrature_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Probe grid for estimates and errors; defaults to the truth grid.
    pub probe_grid_size: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            domain: DomainSection::default(),
            truth: TruthSection::default(),
            estimator: EstimatorSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl Default for DomainSection {
    fn default() -> Self {
        Self { lo: -1.0, hi: 1.0 }
    }
}

impl Default for TruthSection {
    fn default() -> Self {
        Self {
            grid_size: 625,
            horizon: 10,
            sensors: 3,
            noise_std: 0.1,
            disturbances: true,
            transition: KernelParams::new(5.13, 0.07),
            initial_covariance: KernelParams::new(1.0, 0.7),
            disturbance: KernelParams::new(0.35, 0.15),
            initial_mean: KernelParams::new(10.0, 0.05),
        }
    }
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            family: BasisFamily::Fourier,
            sizes: vec![3, 9, 31, 91],
            quadrature_nodes: 1024,
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            probe_grid_size: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        let config: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string().trim_end().to_owned()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        self.domain()?;
        if self.truth.grid_size < 2 {
            return bad(format!("truth.grid_size: need at least 2, got {}", self.truth.grid_size));
        }
        if self.estimator.sizes.is_empty() {
            return bad("estimator.sizes: need at least one basis size".into());
        }
        if let Some(m) = self.estimator.sizes.iter().find(|&&m| m == 0) {
            return bad(format!("estimator.sizes: every size must be >= 1, got {m}"));
        }
        if self.estimator.quadrature_nodes == 0 {
            return bad("estimator.quadrature_nodes: must be >= 1".into());
        }
        if self.output.probe_grid_size == Some(0) {
            return bad("output.probe_grid_size: must be >= 1".into());
        }
        self.ground_truth()?;
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain, ExperimentError> {
        Domain::new(self.domain.lo, self.domain.hi).map_err(|e| ExperimentError::Config(format!("domain: {e}")))
    }

    /// Simulator configuration; `disturbances = false` zeroes `Q_w`.
    pub fn ground_truth(&self) -> Result<GroundTruthConfig, ExperimentError> {
        let t = &self.truth;
        Ok(GroundTruthConfig {
            domain: self.domain()?,
            grid_size: t.grid_size,
            transition: t.transition.build("truth.transition")?,
            initial_cov: t.initial_covariance.build("truth.initial_covariance")?,
            disturbance: if t.disturbances {
                t.disturbance.build("truth.disturbance")?
            } else {
                None
            },
            initial_mean: t.initial_mean.build("truth.initial_mean")?,
            noise: WhiteNoiseKernel::new(t.noise_std).map_err(|e| ExperimentError::Config(format!("truth.noise_std: {e}")))?,
            horizon: t.horizon,
            sensors: t.sensors,
        })
    }

    pub fn probe_grid_size(&self) -> usize {
        self.output.probe_grid_size.unwrap_or(self.truth.grid_size)
    }
}
