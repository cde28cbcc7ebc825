//! Kinetic and macroscopic solvers on the periodic torus.

mod kinetic;
mod lowrank;
mod macroscopic;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

pub use kinetic::{kinetic_solve, KineticProblem, KineticRun, ModeProbe, Snapshot};
pub use macroscopic::{macro_solve, MacroDrift, MacroProblem, MacroRun};

use crate::equilibrium::{FepsSolution, VelocityQuadrature};
use crate::error::{Error, Result};
use crate::grid::{MacroField, TorusGrid};
use crate::vector::Vec2;

/// Field value c(x, t) seen by the turning kernel.
#[derive(Clone)]
pub enum TurningField {
    Constant(Vec2),
    Variable {
        c: Arc<dyn Fn(Vec2, f64) -> Vec2 + Send + Sync>,
        time_dependent: bool,
    },
}

impl TurningField {
    pub fn variable<F>(c: F, time_dependent: bool) -> Self
    where
        F: Fn(Vec2, f64) -> Vec2 + Send + Sync + 'static,
    {
        TurningField::Variable { c: Arc::new(c), time_dependent }
    }

    pub fn at(&self, x: Vec2, t: f64) -> Vec2 {
        match self {
            TurningField::Constant(c) => *c,
            TurningField::Variable { c, .. } => c(x, t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TurningField::Constant(_))
    }
}

impl fmt::Debug for TurningField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TurningField::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            TurningField::Variable { time_dependent, .. } => f
                .debug_struct("Variable")
                .field("time_dependent", time_dependent)
                .finish_non_exhaustive(),
        }
    }
}

/// Distribution f on grid × velocity nodes, stored x-major:
/// `values[x * nodes + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    grid: TorusGrid,
    nodes: usize,
    t: f64,
    eps: f64,
    values: Vec<f64>,
}

impl KineticState {
    pub fn new(grid: TorusGrid, nodes: usize, t: f64, eps: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * nodes {
            return Err(Error::GridMismatch(format!(
                "state has {} values, expected {} x {}",
                values.len(),
                grid.len(),
                nodes
            )));
        }
        Ok(KineticState { grid, nodes, t, eps, values })
    }

    /// f(x, v) = ρ(x) g(v).
    pub fn product(rho: &MacroField, profile: &[f64], eps: f64) -> Self {
        let nodes = profile.len();
        let values = rho
            .values()
            .iter()
            .flat_map(|&r| profile.iter().map(move |&g| r * g))
            .collect();
        KineticState { grid: *rho.grid(), nodes, t: rho.t(), eps, values }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Velocity profile at grid point `x`.
    pub fn at(&self, x: usize) -> &[f64] {
        &self.values[x * self.nodes..(x + 1) * self.nodes]
    }

    pub fn density(&self, quad: &VelocityQuadrature) -> MacroField {
        let w = quad.weights_plain();
        let rho = self
            .values
            .chunks(self.nodes)
            .map(|f| f.iter().zip(w).map(|(a, b)| a * b).sum())
            .collect();
        MacroField::new(self.grid, rho, self.t).expect("density has one value per grid point")
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mass(&self, quad: &VelocityQuadrature) -> f64 {
        self.density(quad).integral()
    }
}

/// Time series recorded after every step (and at t = 0).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunDiagnostics {
    pub times: Vec<f64>,
    /// ∫∫ f dv dx
    pub mass: Vec<f64>,
    /// ‖f‖ in L²(dv dx / F_ε)
    pub weighted_l2: Vec<f64>,
    /// ‖ε^{1-α}(f - ρ M)‖ in L²(dv dx / M)
    pub micro_residual: Vec<f64>,
    /// ∫∫ |v| f dv dx
    pub first_moment: Vec<f64>,
}

impl RunDiagnostics {
    pub(crate) fn push(&mut self, t: f64, mass: f64, weighted_l2: f64, micro: f64, first: f64) {
        self.times.push(t);
        self.mass.push(mass);
        self.weighted_l2.push(weighted_l2);
        self.micro_residual.push(micro);
        self.first_moment.push(first);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// max_t |mass(t) - mass(0)|.
    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.mass.first().copied().unwrap_or(0.0);
        self.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max)
    }

    /// Largest increase of the weighted norm between consecutive steps,
    /// relative to its initial value (zero or negative when nonincreasing).
    pub fn max_weighted_l2_increase(&self) -> f64 {
        let scale = self.weighted_l2.first().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
        self.weighted_l2
            .windows(2)
            .map(|w| (w[1] - w[0]) / scale)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_micro_residual(&self) -> f64 {
        self.micro_residual.iter().copied().fold(0.0, f64::max)
    }

    /// (∫_0^T ‖r_ε‖² dt)^{1/2} by the trapezoid rule.
    pub fn micro_residual_l2_time(&self) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.times.len() {
            let dt = self.times[i] - self.times[i - 1];
            acc += 0.5 * dt * (self.micro_residual[i].powi(2) + self.micro_residual[i - 1].powi(2));
        }
        acc.sqrt()
    }

    pub fn max_first_moment(&self) -> f64 {
        self.first_moment.iter().copied().fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        [&self.mass, &self.weighted_l2, &self.micro_residual, &self.first_moment]
            .iter()
            .all(|s| s.iter().all(|x| x.is_finite()))
    }
}

/// ‖ρ_a - ρ_b‖₂ / ‖ρ_b‖₂.
pub fn rel_l2_error(a: &MacroField, b: &MacroField) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch("fields live on different grids".into()));
    }
    if (a.t() - b.t()).abs() > 1e-9 * a.t().abs().max(1.0) {
        return Err(Error::GridMismatch(format!(
            "fields at different times {} and {}",
            a.t(),
            b.t()
        )));
    }
    let num: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.values().iter().map(|y| y * y).sum();
    Ok((num / den).sqrt())
}

/// (‖f - ρ F_ε‖ in L²(dv dx / F_ε), ‖ε^{1-α}(f - ρ M)‖ in L²(dv dx / M)).
pub fn micro_residual(
    state: &KineticState,
    quad: &VelocityQuadrature,
    feps: &FepsSolution,
) -> Result<(f64, f64)> {
    let n = quad.len();
    if state.nodes() != n || feps.values.len() != n {
        return Err(Error::GridMismatch("state, quadrature and F_eps differ in size".into()));
    }
    let w = quad.weights_plain();
    let m = quad.m_values();
    let scale = state.eps().powf(1.0 - quad.spec().alpha());
    let mut to_feps = 0.0;
    let mut to_m = 0.0;
    for f in state.values().chunks(n) {
        let rho: f64 = f.iter().zip(w).map(|(a, b)| a * b).sum();
        for i in 0..n {
            let d = f[i] - rho * feps.values[i];
            to_feps += w[i] * d * d / feps.values[i];
            let r = scale * (f[i] - rho * m[i]);
            to_m += w[i] * r * r / m[i];
        }
    }
    let cv = state.grid().cell_volume();
    Ok(((to_feps * cv).sqrt(), (to_m * cv).sqrt()))
}
