//! CSV writers. Floats are written with 17 significant digits so files
//! round-trip exactly and are byte-stable for a fixed seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::grid::QuadratureGrid;
use crate::simulator::Trajectory;

use super::{ErrorRecord, EstimateRecord, ExperimentError};

fn num(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<PathBuf, ExperimentError> {
    std::fs::write(path, contents).map_err(|source| ExperimentError::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(path.to_owned())
}

/// `t,x,f_true` on the truth grid for every step.
pub fn write_truth(path: &Path, trajectory: &Trajectory) -> Result<PathBuf, ExperimentError> {
    let mut out = String::from("t,x,f_true\n");
    for (t, step) in trajectory.steps.iter().enumerate() {
        for (&x, &f) in trajectory.grid.nodes().iter().zip(step.truth.iter()) {
            let _ = write!(out, "{t},");
            num(&mut out, x);
            out.push(',');
            num(&mut out, f);
            out.push('\n');
        }
    }
    write_file(path, &out)
}

/// `t,x,y` for every observation.
pub fn write_observations(path: &Path, trajectory: &Trajectory) -> Result<PathBuf, ExperimentError> {
    let mut out = String::from("t,x,y\n");
    for (t, step) in trajectory.steps.iter().enumerate() {
        let obs = &step.observations;
        for (&x, &y) in obs.locations().iter().zip(obs.values().iter()) {
            let _ = write!(out, "{t},");
            num(&mut out, x);
            out.push(',');
            num(&mut out, y);
            out.push('\n');
        }
    }
    write_file(path, &out)
}

/// `t,x,f_hat,var_hat` on the probe grid.
pub fn write_estimates(path: &Path, probe: &QuadratureGrid, estimates: &[EstimateRecord]) -> Result<PathBuf, ExperimentError> {
    let mut out = String::from("t,x,f_hat,var_hat\n");
    for e in estimates {
        for (q, &x) in probe.nodes().iter().enumerate() {
            let _ = write!(out, "{},", e.t);
            num(&mut out, x);
            out.push(',');
            num(&mut out, e.mean[q]);
            out.push(',');
            num(&mut out, e.variance[q]);
            out.push('\n');
        }
    }
    write_file(path, &out)
}

/// `t,M,error_2norm`.
pub fn write_errors(path: &Path, records: &[ErrorRecord]) -> Result<PathBuf, ExperimentError> {
    let mut out = String::from("t,M,error_2norm\n");
    for r in records {
        let _ = write!(out, "{},{},", r.t, r.basis_size);
        num(&mut out, r.error_2norm);
        out.push('\n');
    }
    write_file(path, &out)
}
