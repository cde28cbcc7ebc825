use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::lowrank::LowRankCollision;
use super::{KineticState, RunDiagnostics, TurningField};
use crate::collision::CollisionOperator;
use crate::equilibrium::{
    solve_feps_with, FepsSolution, TurningKernel, VelocityQuadrature, DEFAULT_MAX_ITERATIONS,
};
use crate::error::{Error, Result};
use crate::grid::{MacroField, SpectralTransform, TorusGrid};
use crate::vector::{dot, norm, Vec2};

const FEPS_TOL: f64 = 1e-14;

/// Inputs of a kinetic run. Built with [`KineticProblem::new`] and refined
/// with the `with_*` methods.
#[derive(Clone)]
pub struct KineticProblem<'a> {
    pub quad: &'a VelocityQuadrature,
    pub kernel: &'a dyn TurningKernel,
    pub field: TurningField,
    pub eps: f64,
    pub rho_in: MacroField,
    /// Velocity shape g of the initial datum f = ρ_in g; M when absent.
    pub velocity_profile: Option<Vec<f64>>,
    pub t_final: f64,
    pub dt: f64,
    pub snapshot_times: Vec<f64>,
    /// Spectral indices whose nodal coefficients are recorded every step.
    pub probe_modes: Vec<usize>,
    pub store_states: bool,
}

impl<'a> KineticProblem<'a> {
    pub fn new(
        quad: &'a VelocityQuadrature,
        kernel: &'a dyn TurningKernel,
        field: TurningField,
        eps: f64,
        rho_in: MacroField,
        t_final: f64,
        dt: f64,
    ) -> Self {
        KineticProblem {
            quad,
            kernel,
            field,
            eps,
            rho_in,
            velocity_profile: None,
            t_final,
            dt,
            snapshot_times: Vec::new(),
            probe_modes: Vec::new(),
            store_states: false,
        }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn with_probes(mut self, modes: Vec<usize>) -> Self {
        self.probe_modes = modes;
        self
    }

    pub fn with_velocity_profile(mut self, profile: Vec<f64>) -> Self {
        self.velocity_profile = Some(profile);
        self
    }

    pub fn storing_states(mut self) -> Self {
        self.store_states = true;
        self
    }

    fn validate(&self) -> Result<()> {
        let dim = self.quad.spec().dim();
        if self.rho_in.grid().dim() != dim {
            return Err(Error::GridMismatch(format!(
                "grid dimension {} differs from velocity dimension {dim}",
                self.rho_in.grid().dim()
            )));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::param("epsilon", format!("must be positive, got {}", self.eps)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::param("time.T", format!("must be positive, got {}", self.t_final)));
        }
        if !(self.dt > 0.0 && self.dt <= self.t_final) {
            return Err(Error::param("time.dt", format!("must lie in (0, T], got {}", self.dt)));
        }
        if let Some(g) = &self.velocity_profile {
            if g.len() != self.quad.len() || g.iter().any(|x| !x.is_finite()) {
                return Err(Error::param("velocity_profile", "wrong length or non-finite"));
            }
        }
        if let Some(&m) = self.probe_modes.iter().find(|&&m| m >= self.rho_in.grid().len()) {
            return Err(Error::param("probe_modes", format!("index {m} out of range")));
        }
        if !self.field.is_constant() && self.kernel.lipschitz_c().is_none() {
            return Err(Error::param(
                "kernel.name",
                format!("kernel `{}` is not admissible for a variable field", self.kernel.name()),
            ));
        }
        Ok(())
    }
}

/// Density and positivity at one requested time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub rho: MacroField,
    pub min_f: f64,
    pub state: Option<KineticState>,
}

/// Unnormalized nodal Fourier coefficients `Σ_x f(x, v_i) e^{-ik·x}` of one
/// mode, recorded at every step.
#[derive(Debug, Clone, Serialize)]
pub struct ModeProbe {
    pub mode: usize,
    pub k: Vec2,
    pub times: Vec<f64>,
    pub values: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone)]
pub struct KineticRun {
    pub eps: f64,
    /// Step actually used, `T / steps`.
    pub dt: f64,
    pub steps: usize,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: RunDiagnostics,
    pub probes: Vec<ModeProbe>,
    pub final_state: KineticState,
    /// F_ε for a constant field.
    pub feps: Option<FepsSolution>,
    /// Rank of the truncated kernel used by the implicit step (maximum over x).
    pub kernel_rank: usize,
    pub wall_time_s: f64,
}

impl KineticRun {
    /// The snapshot closest to time `t`.
    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }

    pub fn final_density(&self) -> &MacroField {
        &self.snapshots.last().expect("the final time is always recorded").rho
    }
}

struct Schedule {
    steps: usize,
    dt: f64,
    snapshot_steps: Vec<usize>,
}

impl Schedule {
    fn new(t_final: f64, dt: f64, times: &[f64]) -> Self {
        let steps = (t_final / dt - 1e-9).ceil().max(1.0) as usize;
        let dt = t_final / steps as f64;
        let mut snapshot_steps: Vec<usize> = times
            .iter()
            .filter(|t| t.is_finite())
            .map(|t| ((t / dt).round().max(0.0) as usize).min(steps))
            .collect();
        snapshot_steps.push(steps);
        snapshot_steps.sort_unstable();
        snapshot_steps.dedup();
        Schedule { steps, dt, snapshot_steps }
    }

    fn is_snapshot(&self, step: usize) -> bool {
        self.snapshot_steps.binary_search(&step).is_ok()
    }
}

/// Advances `ε^α ∂_t f + ε v·∇_x f = Q_ε(f)` on the torus.
///
/// Constant field: implicit Euler per Fourier mode, with transport and loss
/// on the diagonal and the gain and density couplings closed through a small
/// capacitance system. Variable field: Strang splitting between exact
/// spectral transport and a pointwise implicit collision step.
pub fn kinetic_solve(problem: &KineticProblem<'_>) -> Result<KineticRun> {
    problem.validate()?;
    let start = Instant::now();
    let mut run = match &problem.field {
        TurningField::Constant(c) => solve_constant(problem, *c)?,
        TurningField::Variable { .. } => solve_variable(problem)?,
    };
    run.wall_time_s = start.elapsed().as_secs_f64();
    Ok(run)
}

fn initial_profile<'p>(problem: &'p KineticProblem<'_>) -> &'p [f64] {
    problem.velocity_profile.as_deref().unwrap_or(problem.quad.m_values())
}

fn new_probes(problem: &KineticProblem<'_>, grid: &TorusGrid) -> Vec<ModeProbe> {
    problem
        .probe_modes
        .iter()
        .map(|&mode| ModeProbe {
            mode,
            k: grid.wavevector(mode),
            times: Vec::new(),
            values: Vec::new(),
        })
        .collect()
}

fn non_finite(t: f64, rho: Vec<f64>) -> Error {
    log::error!("non-finite kinetic state at t = {t}");
    Error::NonFinite { t, state: Box::new(rho) }
}

// ---------------------------------------------------------------------------
// constant field

struct SpectralDiagnostics {
    mass: f64,
    weighted_l2: f64,
    micro: f64,
    first: f64,
}

fn spectral_diagnostics(
    spec: &[Complex64],
    quad: &VelocityQuadrature,
    feps: &[f64],
    grid: &TorusGrid,
    eps: f64,
) -> SpectralDiagnostics {
    let nv = quad.len();
    let w = quad.weights_plain();
    let m = quad.m_values();
    let per_mode: Vec<(f64, f64)> = spec
        .par_chunks(nv)
        .map(|f| {
            let rho: Complex64 = f.iter().zip(w).map(|(z, a)| z * a).sum();
            let mut l2 = 0.0;
            let mut micro = 0.0;
            for i in 0..nv {
                l2 += w[i] * f[i].norm_sqr() / feps[i];
                micro += w[i] * (f[i] - rho * m[i]).norm_sqr() / m[i];
            }
            (l2, micro)
        })
        .collect();
    let (l2, micro) = per_mode.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let cv = grid.cell_volume();
    let parseval = cv / grid.len() as f64;
    let zero = &spec[..nv];
    let mass = cv * zero.iter().zip(w).map(|(z, a)| z.re * a).sum::<f64>();
    let first = cv
        * zero
            .iter()
            .zip(w)
            .zip(quad.nodes())
            .map(|((z, a), v)| z.re * a * norm(*v))
            .sum::<f64>();
    let scale = eps.powf(1.0 - quad.spec().alpha());
    SpectralDiagnostics {
        mass,
        weighted_l2: (l2 * parseval).sqrt(),
        micro: scale * (micro * parseval).sqrt(),
        first,
    }
}

/// Mode-major spectrum to x-major physical values.
fn spectral_to_physical(spec: &[Complex64], nv: usize, transform: &SpectralTransform) -> Vec<f64> {
    let len = transform.grid().len();
    let columns: Vec<Vec<f64>> = (0..nv)
        .into_par_iter()
        .map(|i| {
            let col: Vec<Complex64> = (0..len).map(|mode| spec[mode * nv + i]).collect();
            transform.inverse_real(&col)
        })
        .collect();
    let mut out = vec![0.0; len * nv];
    for (i, col) in columns.iter().enumerate() {
        for (x, v) in col.iter().enumerate() {
            out[x * nv + i] = *v;
        }
    }
    out
}

fn density_from_spectrum(
    spec: &[Complex64],
    quad: &VelocityQuadrature,
    transform: &SpectralTransform,
    t: f64,
) -> MacroField {
    let w = quad.weights_plain();
    let rho_hat: Vec<Complex64> =
        spec.chunks(quad.len()).map(|f| f.iter().zip(w).map(|(z, a)| z * a).sum()).collect();
    MacroField::from_spectrum(transform, &rho_hat, t).expect("spectrum matches the grid")
}

fn solve_constant(problem: &KineticProblem<'_>, c: Vec2) -> Result<KineticRun> {
    let quad = problem.quad;
    let grid = *problem.rho_in.grid();
    let eps = problem.eps;
    let nv = quad.len();
    let len = grid.len();
    let alpha = quad.spec().alpha();

    let op = CollisionOperator::new(quad, problem.kernel, c, eps)?;
    let feps = solve_feps_with(&op, FEPS_TOL, DEFAULT_MAX_ITERATIONS)?;
    let collision = LowRankCollision::new(&op);
    let transform = SpectralTransform::new(grid);
    let schedule = Schedule::new(problem.t_final, problem.dt, &problem.snapshot_times);
    let dt = schedule.dt;
    let speed = eps.powf(1.0 - alpha);

    let rho_hat = transform.forward_real(problem.rho_in.values());
    let profile = initial_profile(problem);
    let mut spec: Vec<Complex64> = Vec::with_capacity(len * nv);
    for r in &rho_hat {
        spec.extend(profile.iter().map(|g| r * g));
    }

    let mut diagnostics = RunDiagnostics::default();
    let mut snapshots = Vec::new();
    let mut probes = new_probes(problem, &grid);
    let t0 = problem.rho_in.t();

    let record = |step: usize,
                  spec: &[Complex64],
                  diagnostics: &mut RunDiagnostics,
                  snapshots: &mut Vec<Snapshot>,
                  probes: &mut Vec<ModeProbe>|
     -> Result<()> {
        let t = t0 + step as f64 * dt;
        let d = spectral_diagnostics(spec, quad, &feps.values, &grid, eps);
        diagnostics.push(t, d.mass, d.weighted_l2, d.micro, d.first);
        for p in probes.iter_mut() {
            p.times.push(t);
            p.values.push(spec[p.mode * nv..(p.mode + 1) * nv].to_vec());
        }
        let finite = [d.mass, d.weighted_l2, d.micro, d.first].iter().all(|x| x.is_finite());
        if !finite {
            return Err(non_finite(t, density_from_spectrum(spec, quad, &transform, t).into_values()));
        }
        if schedule.is_snapshot(step) {
            let physical = spectral_to_physical(spec, nv, &transform);
            let state = KineticState::new(grid, nv, t, eps, physical)?;
            snapshots.push(Snapshot {
                t,
                rho: state.density(quad),
                min_f: state.min(),
                state: problem.store_states.then_some(state),
            });
        }
        Ok(())
    };

    record(0, &spec, &mut diagnostics, &mut snapshots, &mut probes)?;
    let nodes = quad.nodes();
    let cdiag = collision.collision_diag();
    for step in 1..=schedule.steps {
        spec.par_chunks_mut(nv).enumerate().for_each(|(mode, f)| {
            let k = grid.wavevector(mode);
            let d: Vec<Complex64> = (0..nv)
                .map(|i| Complex64::new(1.0 / dt + cdiag[i], speed * dot(nodes[i], k)))
                .collect();
            for z in f.iter_mut() {
                *z /= dt;
            }
            collision.solve(&d, f);
        });
        record(step, &spec, &mut diagnostics, &mut snapshots, &mut probes)?;
    }

    let t_end = t0 + schedule.steps as f64 * dt;
    let final_state =
        KineticState::new(grid, nv, t_end, eps, spectral_to_physical(&spec, nv, &transform))?;
    Ok(KineticRun {
        eps,
        dt,
        steps: schedule.steps,
        snapshots,
        diagnostics,
        probes,
        final_state,
        feps: Some(feps),
        kernel_rank: collision.rank(),
        wall_time_s: 0.0,
    })
}

// ---------------------------------------------------------------------------
// variable field

struct LocalCollision {
    collision: LowRankCollision,
    feps: Vec<f64>,
}

fn local_collisions(problem: &KineticProblem<'_>, grid: &TorusGrid, t: f64) -> Result<Vec<LocalCollision>> {
    (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let c = problem.field.at(grid.point(x), t);
            let op = CollisionOperator::new(problem.quad, problem.kernel, c, problem.eps)?;
            let feps = solve_feps_with(&op, FEPS_TOL, DEFAULT_MAX_ITERATIONS)?;
            Ok(LocalCollision { collision: LowRankCollision::new(&op), feps: feps.values })
        })
        .collect()
}

/// Exact transport over `tau` for every node; `node_major[i * len + x]`.
fn transport(node_major: &mut [f64], problem: &KineticProblem<'_>, transform: &SpectralTransform, tau: f64) {
    let grid = transform.grid();
    let len = grid.len();
    let speed = problem.eps.powf(1.0 - problem.quad.spec().alpha());
    let nodes = problem.quad.nodes();
    node_major.par_chunks_mut(len).enumerate().for_each(|(i, col)| {
        let mut spec = transform.forward_real(col);
        for (mode, z) in spec.iter_mut().enumerate() {
            let phase = -speed * dot(nodes[i], grid.wavevector(mode)) * tau;
            *z *= Complex64::from_polar(1.0, phase);
        }
        col.copy_from_slice(&transform.inverse_real(&spec));
    });
}

fn transpose(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}

fn physical_diagnostics(
    x_major: &[f64],
    quad: &VelocityQuadrature,
    locals: &[LocalCollision],
    grid: &TorusGrid,
    eps: f64,
) -> (f64, f64, f64, f64) {
    let nv = quad.len();
    let w = quad.weights_plain();
    let m = quad.m_values();
    let nodes = quad.nodes();
    let per_x: Vec<[f64; 4]> = x_major
        .par_chunks(nv)
        .zip(locals.par_iter())
        .map(|(f, local)| {
            let rho: f64 = f.iter().zip(w).map(|(a, b)| a * b).sum();
            let mut acc = [rho, 0.0, 0.0, 0.0];
            for i in 0..nv {
                acc[1] += w[i] * f[i] * f[i] / local.feps[i];
                acc[2] += w[i] * (f[i] - rho * m[i]).powi(2) / m[i];
                acc[3] += w[i] * norm(nodes[i]) * f[i];
            }
            acc
        })
        .collect();
    let mut sum = [0.0; 4];
    for a in &per_x {
        for j in 0..4 {
            sum[j] += a[j];
        }
    }
    let cv = grid.cell_volume();
    let scale = eps.powf(1.0 - quad.spec().alpha());
    (cv * sum[0], (cv * sum[1]).sqrt(), scale * (cv * sum[2]).sqrt(), cv * sum[3])
}

fn probe_values(x_major: &[f64], nv: usize, grid: &TorusGrid, mode: usize) -> Vec<Complex64> {
    let k = grid.wavevector(mode);
    let mut out = vec![Complex64::new(0.0, 0.0); nv];
    for (x, f) in x_major.chunks(nv).enumerate() {
        let e = Complex64::from_polar(1.0, -dot(k, grid.point(x)));
        for (o, v) in out.iter_mut().zip(f) {
            *o += e * v;
        }
    }
    out
}

fn solve_variable(problem: &KineticProblem<'_>) -> Result<KineticRun> {
    let quad = problem.quad;
    let grid = *problem.rho_in.grid();
    let eps = problem.eps;
    let nv = quad.len();
    let len = grid.len();
    let time_dependent = matches!(problem.field, TurningField::Variable { time_dependent: true, .. });
    let transform = SpectralTransform::new(grid);
    let schedule = Schedule::new(problem.t_final, problem.dt, &problem.snapshot_times);
    let dt = schedule.dt;
    let t0 = problem.rho_in.t();

    let profile = initial_profile(problem);
    let mut state = KineticState::product(&problem.rho_in, profile, eps);
    let mut locals = local_collisions(problem, &grid, t0)?;
    let mut kernel_rank = locals.iter().map(|l| l.collision.rank()).max().unwrap_or(0);

    let mut diagnostics = RunDiagnostics::default();
    let mut snapshots = Vec::new();
    let mut probes = new_probes(problem, &grid);

    let record = |step: usize,
                  values: &[f64],
                  locals: &[LocalCollision],
                  diagnostics: &mut RunDiagnostics,
                  snapshots: &mut Vec<Snapshot>,
                  probes: &mut Vec<ModeProbe>|
     -> Result<()> {
        let t = t0 + step as f64 * dt;
        let (mass, l2, micro, first) = physical_diagnostics(values, quad, locals, &grid, eps);
        diagnostics.push(t, mass, l2, micro, first);
        for p in probes.iter_mut() {
            p.times.push(t);
            p.values.push(probe_values(values, nv, &grid, p.mode));
        }
        let state = KineticState::new(grid, nv, t, eps, values.to_vec())?;
        if ![mass, l2, micro, first].iter().all(|x| x.is_finite()) {
            return Err(non_finite(t, state.density(quad).into_values()));
        }
        if schedule.is_snapshot(step) {
            snapshots.push(Snapshot {
                t,
                rho: state.density(quad),
                min_f: state.min(),
                state: problem.store_states.then_some(state),
            });
        }
        Ok(())
    };

    record(0, &state.values, &locals, &mut diagnostics, &mut snapshots, &mut probes)?;
    for step in 1..=schedule.steps {
        let t_mid = t0 + (step as f64 - 0.5) * dt;
        if time_dependent {
            locals = local_collisions(problem, &grid, t_mid)?;
            kernel_rank = kernel_rank.max(locals.iter().map(|l| l.collision.rank()).max().unwrap_or(0));
        }
        let mut node_major = transpose(&state.values, len, nv);
        transport(&mut node_major, problem, &transform, 0.5 * dt);
        let mut x_major = transpose(&node_major, nv, len);
        x_major.par_chunks_mut(nv).zip(locals.par_iter()).for_each(|(f, local)| {
            let cd = local.collision.collision_diag();
            let d: Vec<Complex64> = cd.iter().map(|c| Complex64::new(1.0 / dt + c, 0.0)).collect();
            let mut rhs: Vec<Complex64> = f.iter().map(|v| Complex64::new(v / dt, 0.0)).collect();
            local.collision.solve(&d, &mut rhs);
            for (v, z) in f.iter_mut().zip(&rhs) {
                *v = z.re;
            }
        });
        let mut node_major = transpose(&x_major, len, nv);
        transport(&mut node_major, problem, &transform, 0.5 * dt);
        state.values = transpose(&node_major, nv, len);
        state.t = t0 + step as f64 * dt;
        if time_dependent {
            // diagnostics use F_ε at the current time
            locals = local_collisions(problem, &grid, state.t)?;
        }
        record(step, &state.values, &locals, &mut diagnostics, &mut snapshots, &mut probes)?;
    }

    Ok(KineticRun {
        eps,
        dt,
        steps: schedule.steps,
        snapshots,
        diagnostics,
        probes,
        final_state: state,
        feps: None,
        kernel_rank,
        wall_time_s: 0.0,
    })
}
