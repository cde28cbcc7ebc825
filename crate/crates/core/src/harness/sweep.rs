use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::rate::fit_rate;
use super::report::{ConvergenceReport, ReportMetadata, ReportRow};
use crate::collision::drift_u;
use crate::equilibrium::VelocityQuadrature;
use crate::error::{Error, Result};
use crate::fractional::LimitConstants;
use crate::solvers::{kinetic_solve, macro_solve, rel_l2_error, KineticProblem, MacroDrift, MacroProblem, TurningField};
use crate::vector::Vec2;

/// An ε-sweep of the kinetic solver against the limit equation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub base: RunConfig,
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    pub compare_time: f64,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl SweepConfig {
    /// Sweep over `base.epsilons`, compared at `base.t_final`.
    pub fn new(base: RunConfig) -> Result<Self> {
        let cfg = SweepConfig {
            epsilons: base.epsilons.clone(),
            compare_time: base.t_final,
            output_dir: base.output.clone(),
            seed: base.seed,
            base,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::param("epsilon", "empty list"));
        }
        if self.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::param("epsilon", "list must be strictly decreasing"));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::param("epsilon", "values must be positive"));
        }
        if !(self.compare_time > 0.0 && self.compare_time.is_finite()) {
            return Err(Error::param("time.T", format!("comparison time must be positive, got {}", self.compare_time)));
        }
        let kernel = self.base.kernel()?;
        let s = self.epsilons[0].powf(self.base.alpha - 1.0) * kernel.phi_bound(self.base.c);
        if s >= 1.0 {
            return Err(Error::NonContraction(s));
        }
        Ok(())
    }
}

/// Per-ε quantities kept in the metadata but not in the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryDiagnostics {
    pub epsilon: f64,
    pub steps: usize,
    pub kernel_rank: usize,
    /// Largest relative increase of the weighted L² norm between steps.
    pub weighted_l2_increase: f64,
    pub min_f: f64,
    pub max_first_moment: f64,
}

/// A solver failure for one ε.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFailure {
    pub epsilon: f64,
    pub error: String,
}

struct Shared {
    quad: VelocityQuadrature,
    constants: LimitConstants,
    drift: Vec2,
}

fn run_entry(cfg: &SweepConfig, shared: &Shared, eps: f64) -> Result<(ReportRow, EntryDiagnostics)> {
    let start = Instant::now();
    let base = &cfg.base;
    let kernel = base.kernel()?;
    let rho_in = base.initial_density()?;
    let problem = KineticProblem::new(
        &shared.quad,
        kernel.as_ref(),
        TurningField::Constant(base.c),
        eps,
        rho_in.clone(),
        cfg.compare_time,
        base.dt,
    );
    let kinetic = kinetic_solve(&problem)?;
    let limit = macro_solve(&MacroProblem::new(
        &shared.constants,
        MacroDrift::Constant(shared.drift),
        rho_in,
        cfg.compare_time,
        base.dt,
    ))?;
    let error = rel_l2_error(kinetic.final_density(), limit.final_field())?;
    let d = &kinetic.diagnostics;
    let row = ReportRow {
        epsilon: eps,
        rel_l2_error: error,
        mass_drift: d.max_mass_drift(),
        micro_residual: d.max_micro_residual(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let diag = EntryDiagnostics {
        epsilon: eps,
        steps: kinetic.steps,
        kernel_rank: kinetic.kernel_rank,
        weighted_l2_increase: d.max_weighted_l2_increase(),
        min_f: kinetic.snapshots.iter().map(|s| s.min_f).fold(f64::INFINITY, f64::min),
        max_first_moment: d.max_first_moment(),
    };
    Ok((row, diag))
}

/// Runs the kinetic and the limit solver for every ε (in parallel) from the
/// same initial density and compares the densities at the comparison time.
///
/// Solver failures are recorded per ε and mark the report as partial.
pub fn run_sweep(config: &SweepConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let base = &config.base;
    let spec = base.spec()?;
    let quad = VelocityQuadrature::build(&spec, base.core_order, base.tail_order)?;
    let constants = LimitConstants::compute(&spec)?;
    let kernel = base.kernel()?;
    let drift = drift_u(kernel.as_ref(), base.c, &quad)?.u;
    let shared = Shared { quad, constants, drift };

    let outcomes: Vec<(f64, Result<(ReportRow, EntryDiagnostics)>)> =
        config.epsilons.par_iter().map(|&eps| (eps, run_entry(config, &shared, eps))).collect();

    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut failures = Vec::new();
    for (eps, outcome) in outcomes {
        match outcome {
            Ok((row, diag)) => {
                rows.push(row);
                diagnostics.push(diag);
            }
            Err(e) => {
                log::error!("sweep entry eps = {eps} failed: {e}");
                failures.push(SweepFailure { epsilon: eps, error: e.to_string() });
            }
        }
    }
    let fitted_rate = if rows.len() >= 3 {
        let errors: Vec<f64> = rows.iter().map(|r| r.rel_l2_error).collect();
        let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
        fit_rate(&errors, &eps).ok()
    } else {
        None
    };
    let metadata = ReportMetadata::new(config, constants, drift);
    Ok(ConvergenceReport { rows, fitted_rate, metadata, diagnostics, failures })
}
