//! The acceptance suite behind `levykin verify`.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::rate::fit_rate;
use super::sweep::{run_sweep, SweepConfig};
use crate::collision::{coercivity_gap, drift_u, CollisionOperator, VelocityProfile};
use crate::equilibrium::{
    solve_feps_with, DecayKernel, EquilibriumSpec, SimpleKernel, TurningKernel, VelocityQuadrature,
    DEFAULT_MAX_ITERATIONS,
};
use crate::error::{Error, Result};
use crate::fractional::{
    constant_a, frac_laplacian_integral, frac_laplacian_spectral, LimitConstants,
};
use crate::grid::{MacroField, SpectralTransform, TorusGrid};
use crate::particles::{
    empirical_density, mean_with_error, simulate, tail_exponent, InitialPositions, ParticleModel,
    SimulationConfig,
};
use crate::solvers::{
    kinetic_solve, macro_solve, KineticProblem, MacroDrift, MacroProblem, TurningField,
};
use crate::special::gamma;
use crate::symbols::{chi_diagnostics, symbol_eps_with, weak_form_residual, PlaneWave};
use crate::vector::unit;

pub const CONSTANT_TOL: f64 = 1e-8;
pub const C_NORM_TOL: f64 = 1e-6;
pub const DUALITY_TOL: f64 = 1e-4;
pub const SYMBOL_MIN_ORDER: f64 = 0.35;
pub const FEPS_RESIDUAL_TOL: f64 = 1e-10;
pub const FEPS_CLOSED_FORM_TOL: f64 = 1e-10;
pub const COERCIVITY_TRIALS: usize = 100;
pub const MASS_DRIFT_TOL: f64 = 1e-10;
/// Allowed growth of the micro residual from the largest to any smaller ε.
pub const MICRO_RESIDUAL_GROWTH: f64 = 2.0;
pub const SWEEP_BUDGET_S: f64 = 600.0;
pub const HISTOGRAM_L1_TOL: f64 = 0.05;
pub const TAIL_SLOPE_TOL: f64 = 0.1;
pub const DRIFT_SIGMAS: f64 = 3.0;
pub const PARTICLE_BUDGET_S: f64 = 300.0;
pub const CHI_ORDER_RANGE: (f64, f64) = (0.85, 1.15);
pub const FRAC_ORDER_TOL: f64 = 0.15;

pub const CRITERIA: [(u8, &str); 8] = [
    (1, "limit constants"),
    (2, "fractional Laplacian duality"),
    (3, "symbol convergence"),
    (4, "perturbed equilibrium"),
    (5, "coercivity"),
    (6, "kinetic to macroscopic convergence"),
    (7, "particle cross-check"),
    (8, "moment-method test functions"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{status}] {} {}: {} ({:.1} s)", self.id, self.title, self.detail, self.seconds)
    }
}

/// Accumulates named checks into one verdict.
#[derive(Default)]
struct Checks {
    passed: bool,
    notes: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Checks { passed: true, notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, note: String) {
        self.passed &= ok;
        self.notes.push(if ok { note } else { format!("!! {note}") });
    }
}

/// Runs the selected criteria (all when `ids` is empty) in order.
pub fn verify(ids: &[u8], seed: u64) -> Vec<CriterionOutcome> {
    CRITERIA
        .iter()
        .filter(|(id, _)| ids.is_empty() || ids.contains(id))
        .map(|&(id, _)| run_criterion(id, seed))
        .collect()
}

pub fn run_criterion(id: u8, seed: u64) -> CriterionOutcome {
    let title = CRITERIA.iter().find(|c| c.0 == id).map(|c| c.1).unwrap_or("unknown");
    let start = Instant::now();
    let result = match id {
        1 => constants(),
        2 => duality(),
        3 => symbol_convergence(),
        4 => perturbed_equilibrium(),
        5 => coercivity(seed),
        6 => kinetic_limit(),
        7 => particle_cross_check(seed),
        8 => moment_method(),
        _ => Err(Error::param("criterion", format!("no criterion {id}"))),
    };
    let (passed, detail) = match result {
        Ok(checks) => (checks.passed, checks.notes.join("; ")),
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionOutcome { id, title, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// 2^α Γ((1+α)/2) / (√π |Γ(-α/2)|), the whole-line normalization.
fn standard_c_norm(alpha: f64) -> f64 {
    2f64.powf(alpha) * gamma(0.5 * (1.0 + alpha)) / (PI.sqrt() * gamma(-0.5 * alpha).abs())
}

fn constants() -> Result<Checks> {
    let mut checks = Checks::new();
    let alpha = 1.5;
    let spec = EquilibriumSpec::flat(1, alpha)?;
    let k = LimitConstants::compute(&spec)?;
    // closed forms for N = 1, flat core
    let gamma_exact = alpha / (2.0 * (alpha + 1.0));
    let b_exact = gamma_exact * (alpha + 1.0) / (alpha - 1.0);
    let a_exact = gamma_exact * PI / (0.5 * PI * alpha).sin();
    let c_exact = gamma(alpha + 1.0) * (0.5 * PI * alpha).sin() / PI;
    for (name, got, want, tol) in [
        ("gamma", k.gamma, gamma_exact, CONSTANT_TOL),
        ("B", k.b, b_exact, CONSTANT_TOL),
        ("A", k.a, a_exact, CONSTANT_TOL),
        ("c_norm", k.c_norm, c_exact, C_NORM_TOL),
    ] {
        checks.check((got - want).abs() <= tol, format!("{name} = {got:.10} (|diff| {:.1e})", (got - want).abs()));
    }
    let mut worst: f64 = 0.0;
    for alpha in [1.1, 1.25, 1.5, 1.75, 1.9] {
        let spec = EquilibriumSpec::flat(1, alpha)?;
        let a = constant_a(&spec)?;
        worst = worst.max((standard_c_norm(alpha) * a - gamma(alpha + 1.0) * spec.gamma()).abs());
    }
    checks.check(worst <= CONSTANT_TOL, format!("max |c A - Gamma(a+1) gamma| = {worst:.1e}"));
    Ok(checks)
}

fn duality() -> Result<Checks> {
    let mut checks = Checks::new();
    let alpha = 1.5;
    // a torus long enough that periodic images are below the tolerance
    let grid = TorusGrid::new(1, 8192, 2.0 * PI * 64.0)?;
    let transform = SpectralTransform::new(grid);
    let centre = grid.point(grid.n() / 2)[0];
    let functions: [(&str, fn(f64) -> f64); 5] = [
        ("gauss", |x| (-x * x).exp()),
        ("wide gauss", |x| (-(x - 0.5).powi(2) / 4.0).exp()),
        ("odd gauss", |x| x * (-x * x).exp()),
        ("modulated", |x| (-x * x).exp() * (2.0 * x).cos()),
        ("sech", |x| 1.0 / x.cosh()),
    ];
    let offsets = [-40, -20, 0, 14, 41];
    for (name, phi) in functions {
        let field = MacroField::from_fn(grid, 0.0, |x| phi(x[0] - centre));
        let spectral = frac_laplacian_spectral(&field, &transform, alpha);
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for off in offsets {
            let idx = (grid.n() as i64 / 2 + off) as usize;
            let x = grid.point(idx)[0] - centre;
            let exact = frac_laplacian_integral(|y| phi(y[0]), 1, alpha, [x, 0.0])?;
            diff = diff.max((spectral.values()[idx] - exact).abs());
            scale = scale.max(exact.abs());
        }
        let rel = diff / scale;
        checks.check(rel <= DUALITY_TOL, format!("{name} {rel:.1e}"));
    }
    Ok(checks)
}

fn symbol_convergence() -> Result<Checks> {
    let mut checks = Checks::new();
    let spec = EquilibriumSpec::flat(1, 1.5)?;
    let quad = VelocityQuadrature::build(&spec, 16, 64)?;
    let k = LimitConstants::compute(&spec)?;
    let eps: Vec<f64> = (3..=10).map(|j| 2f64.powi(-j)).collect();
    let gaps = eps
        .iter()
        .map(|&e| symbol_eps_with(&k, &quad, [1.0, 0.0], e, [1.0, 0.0], 1.0).map(|s| s.gap()))
        .collect::<Result<Vec<f64>>>()?;
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    checks.check(monotone, format!("gaps {:.2e} .. {:.2e} decreasing: {monotone}", gaps[0], gaps[gaps.len() - 1]));
    let order = fit_rate(&gaps, &eps)?;
    checks.check(order >= SYMBOL_MIN_ORDER, format!("order {order:.3}"));
    Ok(checks)
}

fn perturbed_equilibrium() -> Result<Checks> {
    let mut checks = Checks::new();
    let spec = EquilibriumSpec::flat(1, 1.5)?;
    let quad = VelocityQuadrature::build(&spec, 16, 64)?;
    let c = [1.0, 0.0];
    let kernels: [&dyn TurningKernel; 2] = [&SimpleKernel, &DecayKernel];
    for kernel in kernels {
        let mut worst_residual: f64 = 0.0;
        let mut bounds = true;
        let mut closed: f64 = 0.0;
        for eps in [0.2, 0.1, 0.05] {
            let op = CollisionOperator::new(&quad, kernel, c, eps)?;
            let feps = solve_feps_with(&op, 1e-15, DEFAULT_MAX_ITERATIONS)?;
            worst_residual = worst_residual.max(feps.residual);
            bounds &= feps.within_bounds();
            if kernel.name() == "simple" {
                for ((&v, &m), &f) in quad.nodes().iter().zip(quad.m_values()).zip(&feps.values) {
                    let want = m * (1.0 + feps.eps_factor * crate::vector::dot(c, unit(v)));
                    closed = closed.max((f - want).abs());
                }
            }
        }
        let name = kernel.name();
        checks.check(worst_residual <= FEPS_RESIDUAL_TOL, format!("{name} residual {worst_residual:.1e}"));
        checks.check(bounds, format!("{name} bounds hold: {bounds}"));
        if name == "simple" {
            checks.check(closed <= FEPS_CLOSED_FORM_TOL, format!("closed form {closed:.1e}"));
        }
    }
    Ok(checks)
}

fn coercivity(seed: u64) -> Result<Checks> {
    let mut checks = Checks::new();
    let spec = EquilibriumSpec::flat(1, 1.5)?;
    let quad = VelocityQuadrature::build(&spec, 16, 32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kernels: [&dyn TurningKernel; 2] = [&SimpleKernel, &DecayKernel];
    let mut trials = 0;
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for kernel in kernels {
        for eps in [0.2, 0.1, 0.05] {
            let op = CollisionOperator::new(&quad, kernel, [1.0, 0.0], eps)?;
            let feps = solve_feps_with(&op, 1e-14, DEFAULT_MAX_ITERATIONS)?;
            for _ in 0..COERCIVITY_TRIALS {
                let mass: f64 = rng.gen_range(-2.0..2.0);
                let values: Vec<f64> =
                    quad.m_values().iter().map(|m| m * (mass + rng.gen_range(-1.0..1.0))).collect();
                let check = coercivity_gap(&op, &VelocityProfile::new(&quad, values)?, &feps)?;
                trials += 1;
                if !check.holds() {
                    violations += 1;
                }
                min_margin = min_margin.min(check.lhs - check.rhs);
            }
        }
    }
    checks.check(violations == 0, format!("{violations} violations in {trials} trials, min lhs - rhs {min_margin:.2e}"));
    Ok(checks)
}

fn kinetic_limit() -> Result<Checks> {
    let mut checks = Checks::new();
    let start = Instant::now();
    let report = run_sweep(&SweepConfig::new(RunConfig::default())?)?;
    let elapsed = start.elapsed().as_secs_f64();
    checks.check(!report.is_partial(), format!("{} of {} entries", report.rows.len(), report.rows.len() + report.failures.len()));
    let errors = report.errors();
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let listed: Vec<String> = errors.iter().map(|e| format!("{e:.3e}")).collect();
    checks.check(decreasing && !errors.is_empty(), format!("rel_l2 [{}]", listed.join(", ")));
    let drift = report.rows.iter().map(|r| r.mass_drift).fold(0.0, f64::max);
    checks.check(drift <= MASS_DRIFT_TOL, format!("mass drift {drift:.1e}"));
    let growth = report.diagnostics.iter().map(|d| d.weighted_l2_increase).fold(f64::NEG_INFINITY, f64::max);
    checks.check(growth <= 0.0, format!("weighted L2 max step change {growth:.1e}"));
    let micro: Vec<f64> = report.rows.iter().map(|r| r.micro_residual).collect();
    let bounded = micro.iter().all(|m| m.is_finite())
        && micro.iter().all(|m| *m <= MICRO_RESIDUAL_GROWTH * micro.first().copied().unwrap_or(0.0));
    let top = micro.iter().copied().fold(0.0, f64::max);
    checks.check(bounded, format!("micro residual <= {top:.2}"));
    checks.check(elapsed <= SWEEP_BUDGET_S, format!("{elapsed:.1} s"));
    Ok(checks)
}

/// Cell averages of `field` over `cells` equal intervals, computed exactly
/// from its Fourier series.
fn cell_averages(field: &MacroField, cells: usize) -> Result<Vec<f64>> {
    let grid = *field.grid();
    if grid.dim() != 1 || grid.n() % cells != 0 {
        return Err(Error::GridMismatch(format!("{} points do not split into {cells} cells", grid.n())));
    }
    let width = grid.length() / cells as f64;
    let transform = SpectralTransform::new(grid);
    // (e^{ikH} - 1) / (ikH) maps point values to averages over [x, x + H]
    let averaged = field.apply_multiplier(&transform, |k| {
        let kh = k[0] * width;
        if kh == 0.0 {
            1.0.into()
        } else {
            num_complex::Complex64::new(kh.sin(), 1.0 - kh.cos()) / kh
        }
    });
    let stride = grid.n() / cells;
    Ok((0..cells).map(|j| averaged.values()[j * stride]).collect())
}

fn particle_cross_check(seed: u64) -> Result<Checks> {
    let mut checks = Checks::new();
    let start = Instant::now();
    let cfg = RunConfig::default();
    let (eps, t_final, c) = (0.05, cfg.t_final, cfg.c);
    let spec = cfg.spec()?;
    let quad = VelocityQuadrature::build(&spec, cfg.core_order, cfg.tail_order)?;
    let constants = LimitConstants::compute(&spec)?;
    let u = drift_u(&SimpleKernel, c, &quad)?.u;
    let rho_in = cfg.initial_density()?;
    let limit = macro_solve(&MacroProblem::new(&constants, MacroDrift::Constant(u), rho_in.clone(), t_final, cfg.dt))?;

    let model = ParticleModel::new(&quad, &SimpleKernel, c, eps)?;
    let run = simulate(
        &model,
        &SimulationConfig {
            n_particles: cfg.particles,
            t_final,
            snapshot_times: Vec::new(),
            initial: InitialPositions::Density(rho_in),
            seed,
        },
    )?;
    let cells = 64;
    let coarse = TorusGrid::new(1, cells, cfg.grid_length)?;
    let hist = empirical_density(run.final_ensemble(), &coarse)?;
    let field = limit.final_field();
    let mass = field.integral();
    let l1: f64 = cell_averages(field, cells)?
        .iter()
        .zip(hist.values())
        .map(|(m, h)| (h - m / mass).abs() * coarse.cell_volume())
        .sum();
    checks.check(l1 <= HISTOGRAM_L1_TOL, format!("histogram L1 {l1:.4}"));

    let dx: Vec<f64> = run.displacements(run.snapshots.len() - 1).iter().map(|d| d[0]).collect();
    let (mean, se) = mean_with_error(&dx);
    let expected = u[0] * t_final;
    checks.check(
        (mean - expected).abs() <= DRIFT_SIGMAS * se,
        format!("mean drift {mean:.4} +- {se:.4} vs u t = {expected:.4}"),
    );

    let unbiased = ParticleModel::new(&quad, &SimpleKernel, [0.0, 0.0], eps)?;
    let free = simulate(
        &unbiased,
        &SimulationConfig {
            n_particles: cfg.particles,
            t_final,
            snapshot_times: Vec::new(),
            initial: InitialPositions::Origin,
            seed: seed.wrapping_add(1),
        },
    )?;
    let dx: Vec<f64> = free.displacements(free.snapshots.len() - 1).iter().map(|d| d[0]).collect();
    let slope = tail_exponent(&dx, 0.03, 1e-3)?;
    checks.check((slope + spec.alpha()).abs() <= TAIL_SLOPE_TOL, format!("tail slope {slope:.3}"));
    let elapsed = start.elapsed().as_secs_f64();
    checks.check(elapsed <= PARTICLE_BUDGET_S, format!("{elapsed:.1} s"));
    Ok(checks)
}

fn moment_method() -> Result<Checks> {
    let mut checks = Checks::new();
    let spec = EquilibriumSpec::flat(1, 1.5)?;
    let quad = VelocityQuadrature::build(&spec, 16, 64)?;
    let constants = LimitConstants::compute(&spec)?;
    let wave = PlaneWave::new([1.0, 0.0], 0.8, 0.0);
    let eps: Vec<f64> = (4..=8).map(|j| 2f64.powi(-j)).collect();
    let evals = eps
        .iter()
        .map(|&e| chi_diagnostics(&wave, &constants, &quad, e, [0.0, 0.0], 0.0))
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = CHI_ORDER_RANGE;
    for (name, values) in [
        ("dev_0", evals.iter().map(|d| d.dev_0).collect::<Vec<f64>>()),
        ("dev_t", evals.iter().map(|d| d.dev_t).collect()),
        ("dev_x", evals.iter().map(|d| d.dev_x).collect()),
    ] {
        let order = fit_rate(&values, &eps)?;
        checks.check((lo..=hi).contains(&order), format!("{name} order {order:.3}"));
    }
    let gaps: Vec<f64> = evals.iter().map(|d| (d.frac_term - d.frac_limit).abs()).collect();
    let order = fit_rate(&gaps, &eps)?;
    let target = 2.0 - spec.alpha();
    checks.check((order - target).abs() <= FRAC_ORDER_TOL, format!("frac_term gap order {order:.3}"));

    let weak = weak_form_sequence(&quad)?;
    let decreasing = weak.windows(2).all(|w| w[1] < w[0]);
    let listed: Vec<String> = weak.iter().map(|r| format!("{r:.2e}")).collect();
    checks.check(decreasing, format!("weak-form residual [{}]", listed.join(", ")));
    Ok(checks)
}

/// Relative weak-form residuals along a joint (ε, Δt) refinement.
fn weak_form_sequence(quad: &VelocityQuadrature) -> Result<Vec<f64>> {
    let grid = TorusGrid::new(1, 64, 16.0 * PI)?;
    let rho = MacroField::from_fn(grid, 0.0, |x| 1.0 + 0.5 * (x[0] / 8.0).cos());
    [(0.2, 0.02), (0.1, 0.01), (0.05, 0.005)]
        .iter()
        .map(|&(eps, dt)| {
            let problem =
                KineticProblem::new(quad, &SimpleKernel, TurningField::Constant([1.0, 0.0]), eps, rho.clone(), 0.5, dt)
                    .with_probes(vec![1]);
            let run = kinetic_solve(&problem)?;
            Ok(weak_form_residual(&run, &SimpleKernel, quad, 1, 0.5)?.relative)
        })
        .collect()
}
