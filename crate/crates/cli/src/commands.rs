use std::path::{Path, PathBuf};

use levykin::collision::drift_u;
use levykin::equilibrium::VelocityQuadrature;
use levykin::fractional::LimitConstants;
use levykin::grid::{MacroField, TorusGrid};
use levykin::harness::config::{RunConfig, COMMAND_LINE};
use levykin::harness::verify::{run_criterion, CRITERIA};
use levykin::harness::{emit_report, run_sweep, SweepConfig};
use levykin::particles::{empirical_density, simulate, InitialPositions, ParticleModel, SimulationConfig};
use levykin::solvers::{kinetic_solve, macro_solve, KineticProblem, MacroDrift, MacroProblem, TurningField};
use levykin::symbols::symbol_eps_with;
use levykin::vector::{norm, Vec2};
use levykin::Error;

use crate::error::CliError;
use crate::output::{companion, Table};

const QUANTILE_LEVELS: [f64; 11] = [0.001, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 0.999];

fn required_output(cfg: &RunConfig) -> Result<&Path, CliError> {
    cfg.output.as_deref().ok_or_else(|| {
        Error::Config {
            line: COMMAND_LINE,
            key: "output.path".into(),
            message: "required by this subcommand".into(),
        }
        .into()
    })
}

/// The ε of a single run: the first entry of the list.
fn single_eps(cfg: &RunConfig) -> f64 {
    if cfg.epsilons.len() > 1 {
        eprintln!("note: using epsilon = {} (first of {} values)", cfg.epsilons[0], cfg.epsilons.len());
    }
    cfg.epsilons[0]
}

fn quadrature(cfg: &RunConfig) -> Result<VelocityQuadrature, CliError> {
    Ok(VelocityQuadrature::build(&cfg.spec()?, cfg.core_order, cfg.tail_order)?)
}

fn parse_vector(key: &str, text: &str) -> Result<Vec2, CliError> {
    let parts = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| Error::Config { line: COMMAND_LINE, key: key.into(), message: e.to_string() })?;
    match parts.as_slice() {
        [x] => Ok([*x, 0.0]),
        [x, y] => Ok([*x, *y]),
        _ => Err(Error::Config { line: COMMAND_LINE, key: key.into(), message: "expected one or two components".into() }
            .into()),
    }
}

fn field_header(dim: usize, value: &'static str) -> Vec<&'static str> {
    if dim == 1 {
        vec!["t", "x", value]
    } else {
        vec!["t", "x", "y", value]
    }
}

fn write_field(table: &mut Table, field: &MacroField) -> Result<(), CliError> {
    let grid = field.grid();
    for (idx, value) in field.values().iter().enumerate() {
        let x = grid.point(idx);
        if grid.dim() == 1 {
            table.row(&[field.t(), x[0], *value])?;
        } else {
            table.row(&[field.t(), x[0], x[1], *value])?;
        }
    }
    Ok(())
}

pub fn constants(cfg: &RunConfig) -> Result<(), CliError> {
    let k = LimitConstants::compute(&cfg.spec()?)?;
    let mut table = Table::create(cfg.output.as_deref(), &["N", "alpha", "gamma", "A", "B", "c_norm"])?;
    table.row(&[k.dim as f64, k.alpha, k.gamma, k.a, k.b, k.c_norm])?;
    table.finish()
}

pub fn equilibrium(cfg: &RunConfig) -> Result<(), CliError> {
    let quad = quadrature(cfg)?;
    match &cfg.output {
        Some(path) => std::fs::File::create(path)
            .and_then(|f| quad.write_csv(std::io::BufWriter::new(f)))
            .map_err(|source| CliError::Io { path: path.clone(), source }),
        None => quad
            .write_csv(std::io::stdout().lock())
            .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source }),
    }
}

pub fn symbol(cfg: &RunConfig, k: &str, p: f64) -> Result<(), CliError> {
    let k = parse_vector("k", k)?;
    let quad = quadrature(cfg)?;
    let constants = LimitConstants::compute(quad.spec())?;
    let mut table = Table::create(
        cfg.output.as_deref(),
        &["epsilon", "real", "imag", "limit_real", "limit_imag", "gap_real", "gap_imag"],
    )?;
    for &eps in &cfg.epsilons {
        let s = symbol_eps_with(&constants, &quad, cfg.c, eps, k, p)?;
        table.row(&[eps, s.real_part, s.imag_part, s.limit_real, s.limit_imag, s.gap_real, s.gap_imag])?;
    }
    table.finish()
}

pub fn solve_kinetic(cfg: &RunConfig) -> Result<(), CliError> {
    let path = required_output(cfg)?;
    let eps = single_eps(cfg);
    let quad = quadrature(cfg)?;
    let kernel = cfg.kernel()?;
    let problem = KineticProblem::new(
        &quad,
        kernel.as_ref(),
        TurningField::Constant(cfg.c),
        eps,
        cfg.initial_density()?,
        cfg.t_final,
        cfg.dt,
    )
    .with_snapshots(cfg.snapshots.clone());
    let run = kinetic_solve(&problem)?;

    let mut table = Table::create(Some(path), &field_header(cfg.dim, "rho"))?;
    for snap in &run.snapshots {
        write_field(&mut table, &snap.rho)?;
    }
    table.finish()?;

    let d = &run.diagnostics;
    let diag_path = companion(path, "diagnostics");
    let mut diag = Table::create(
        Some(&diag_path),
        &["t", "mass", "weighted_l2", "micro_residual", "first_moment"],
    )?;
    for i in 0..d.len() {
        diag.row(&[d.times[i], d.mass[i], d.weighted_l2[i], d.micro_residual[i], d.first_moment[i]])?;
    }
    diag.finish()?;
    eprintln!(
        "eps {eps}: {} steps, mass drift {:.2e}, kernel rank {}, {:.2} s",
        run.steps,
        d.max_mass_drift(),
        run.kernel_rank,
        run.wall_time_s
    );
    Ok(())
}

pub fn solve_macro(cfg: &RunConfig) -> Result<(), CliError> {
    let path = required_output(cfg)?;
    let quad = quadrature(cfg)?;
    let constants = LimitConstants::compute(quad.spec())?;
    let u = drift_u(cfg.kernel()?.as_ref(), cfg.c, &quad)?.u;
    let problem = MacroProblem::new(&constants, MacroDrift::Constant(u), cfg.initial_density()?, cfg.t_final, cfg.dt)
        .with_snapshots(cfg.snapshots.clone());
    let run = macro_solve(&problem)?;

    let mut table = Table::create(Some(path), &field_header(cfg.dim, "rho"))?;
    for field in &run.snapshots {
        write_field(&mut table, field)?;
    }
    table.finish()?;
    let mut diag = Table::create(Some(&companion(path, "diagnostics")), &["t", "mass", "l2_norm"])?;
    for field in &run.snapshots {
        diag.row(&[field.t(), field.integral(), field.l2_norm()])?;
    }
    diag.finish()?;
    eprintln!("A = {:.8}, u = ({:.8}, {:.8})", constants.a, u[0], u[1]);
    Ok(())
}

/// Empirical quantile of sorted samples by linear interpolation.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn particles(cfg: &RunConfig, bins: usize) -> Result<(), CliError> {
    let seed = cfg.require_seed()?;
    let path = required_output(cfg)?;
    let eps = single_eps(cfg);
    let quad = quadrature(cfg)?;
    let kernel = cfg.kernel()?;
    let model = ParticleModel::new(&quad, kernel.as_ref(), cfg.c, eps)?;
    let run = simulate(
        &model,
        &SimulationConfig {
            n_particles: cfg.particles,
            t_final: cfg.t_final,
            snapshot_times: cfg.snapshots.clone(),
            initial: InitialPositions::Density(cfg.initial_density()?),
            seed,
        },
    )?;

    let cells = TorusGrid::new(cfg.dim, bins, cfg.grid_length)?;
    let mut hist = Table::create(Some(path), &field_header(cfg.dim, "density"))?;
    for ensemble in &run.snapshots {
        write_field(&mut hist, &empirical_density(ensemble, &cells)?)?;
    }
    hist.finish()?;

    let mut quant = Table::create(Some(&companion(path, "quantiles")), &["t", "p", "dx", "abs_displacement"])?;
    for (idx, ensemble) in run.snapshots.iter().enumerate() {
        let disp = run.displacements(idx);
        let mut dx: Vec<f64> = disp.iter().map(|d| d[0]).collect();
        let mut mag: Vec<f64> = disp.iter().map(|d| norm(*d)).collect();
        dx.sort_by(f64::total_cmp);
        mag.sort_by(f64::total_cmp);
        for p in QUANTILE_LEVELS {
            quant.row(&[ensemble.t, p, quantile(&dx, p), quantile(&mag, p)])?;
        }
    }
    quant.finish()?;
    eprintln!(
        "{} particles, {} jumps, acceptance {:.3}, {:.2} s",
        cfg.particles,
        run.jumps,
        run.acceptance_rate(),
        run.wall_time_s
    );
    Ok(())
}

/// Returns false when some ε failed.
pub fn sweep(cfg: &RunConfig) -> Result<bool, CliError> {
    let path = required_output(cfg)?.to_path_buf();
    let report = run_sweep(&SweepConfig::new(cfg.clone())?)?;
    let sidecar = emit_report(&report, &path)?;
    for row in &report.rows {
        println!(
            "eps {:<8} rel_l2 {:.4e}  mass drift {:.1e}  micro {:.3}  {:.2} s",
            row.epsilon, row.rel_l2_error, row.mass_drift, row.micro_residual, row.wall_time_s
        );
    }
    for failure in &report.failures {
        println!("eps {:<8} FAILED: {}", failure.epsilon, failure.error);
    }
    match report.fitted_rate {
        Some(rate) => println!("fitted rate {rate:.3}"),
        None => println!("fitted rate: fewer than 3 points"),
    }
    println!("report {} (metadata {})", path.display(), sidecar.display());
    Ok(!report.is_partial())
}

/// Prints one line per criterion; returns whether all passed.
pub fn verify(seed: u64, only: &[u8]) -> bool {
    let mut all = true;
    let (mut count, mut passed) = (0, 0);
    for &(id, _) in CRITERIA.iter().filter(|(id, _)| only.is_empty() || only.contains(id)) {
        let outcome = run_criterion(id, seed);
        println!("{outcome}");
        all &= outcome.passed;
        count += 1;
        passed += usize::from(outcome.passed);
    }
    if let Some(bad) = only.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
        println!("[FAIL] {bad}: no such criterion");
        all = false;
    }
    println!("{passed} of {count} criteria passed");
    all
}
