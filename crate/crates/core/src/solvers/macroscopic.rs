use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fractional::LimitConstants;
use crate::grid::{wavenumber, MacroField, SpectralTransform, TorusGrid};
use crate::vector::{dot, norm, Vec2};

/// RK4 is stable on the imaginary axis up to 2√2.
const RK4_IMAGINARY_LIMIT: f64 = 2.8;

/// Drift in `∂_t ρ + ∇·(u ρ) + A(-Δ)^{α/2} ρ = 0`.
#[derive(Clone)]
pub enum MacroDrift {
    Constant(Vec2),
    Field(Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>),
}

impl MacroDrift {
    pub fn field<F: Fn(Vec2) -> Vec2 + Send + Sync + 'static>(u: F) -> Self {
        MacroDrift::Field(Arc::new(u))
    }
}

impl fmt::Debug for MacroDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MacroDrift::Constant(u) => f.debug_tuple("Constant").field(u).finish(),
            MacroDrift::Field(_) => f.write_str("Field(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MacroProblem {
    /// Diffusion coefficient A.
    pub a: f64,
    pub alpha: f64,
    pub drift: MacroDrift,
    pub rho_in: MacroField,
    pub t_final: f64,
    /// Step of the integrator for a variable drift; unused for a constant one.
    pub dt: f64,
    pub snapshot_times: Vec<f64>,
}

impl MacroProblem {
    pub fn new(
        constants: &LimitConstants,
        drift: MacroDrift,
        rho_in: MacroField,
        t_final: f64,
        dt: f64,
    ) -> Self {
        MacroProblem {
            a: constants.a,
            alpha: constants.alpha,
            drift,
            rho_in,
            t_final,
            dt,
            snapshot_times: Vec::new(),
        }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }
}

#[derive(Debug, Clone)]
pub struct MacroRun {
    pub snapshots: Vec<MacroField>,
    pub steps: usize,
}

impl MacroRun {
    pub fn final_field(&self) -> &MacroField {
        self.snapshots.last().expect("the final time is always recorded")
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&MacroField> {
        self.snapshots.iter().min_by(|a, b| (a.t() - t).abs().total_cmp(&(b.t() - t).abs()))
    }
}

/// Solves the fractional advection-diffusion equation on the torus.
///
/// A constant drift is integrated exactly per mode and snapshots land on the
/// requested times. A variable drift uses an integrating-factor RK4 with the
/// fractional part exact and the advection term dealiased by the 2/3 rule.
pub fn macro_solve(problem: &MacroProblem) -> Result<MacroRun> {
    if !(problem.t_final > 0.0 && problem.t_final.is_finite()) {
        return Err(Error::param("time.T", format!("must be positive, got {}", problem.t_final)));
    }
    if !(problem.a >= 0.0) {
        return Err(Error::param("A", format!("must be nonnegative, got {}", problem.a)));
    }
    let grid = *problem.rho_in.grid();
    let transform = SpectralTransform::new(grid);
    let t0 = problem.rho_in.t();
    let mut times: Vec<f64> = problem
        .snapshot_times
        .iter()
        .copied()
        .filter(|t| (0.0..problem.t_final).contains(t))
        .collect();
    times.push(problem.t_final);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let rho_hat = problem.rho_in.spectrum(&transform);
    match &problem.drift {
        MacroDrift::Constant(u) => {
            let snapshots = times
                .iter()
                .map(|&t| {
                    let evolved = exact_modes(&rho_hat, &grid, problem.a, problem.alpha, *u, t);
                    MacroField::from_spectrum(&transform, &evolved, t0 + t)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(MacroRun { snapshots, steps: 0 })
        }
        MacroDrift::Field(u) => integrate_variable(problem, u.as_ref(), &transform, rho_hat, &times),
    }
}

fn exact_modes(rho_hat: &[Complex64], grid: &TorusGrid, a: f64, alpha: f64, u: Vec2, t: f64) -> Vec<Complex64> {
    rho_hat
        .iter()
        .enumerate()
        .map(|(idx, z)| {
            let k = grid.wavevector(idx);
            let decay = a * wavenumber(k).powf(alpha) * t;
            z * Complex64::from_polar((-decay).exp(), -dot(k, u) * t)
        })
        .collect()
}

fn dealias_mask(grid: &TorusGrid) -> Vec<bool> {
    let cut = grid.k_max() * 2.0 / 3.0;
    (0..grid.len())
        .map(|idx| {
            let k = grid.wavevector(idx);
            k[0].abs() < cut && k[1].abs() < cut
        })
        .collect()
}

fn integrate_variable(
    problem: &MacroProblem,
    u: &(dyn Fn(Vec2) -> Vec2 + Send + Sync),
    transform: &SpectralTransform,
    mut rho_hat: Vec<Complex64>,
    times: &[f64],
) -> Result<MacroRun> {
    let grid = *transform.grid();
    let t0 = problem.rho_in.t();
    if !(problem.dt > 0.0) {
        return Err(Error::param("time.dt", format!("must be positive, got {}", problem.dt)));
    }
    let steps = (problem.t_final / problem.dt - 1e-9).ceil().max(1.0) as usize;
    let h = problem.t_final / steps as f64;
    let velocity: Vec<Vec2> = grid.points().into_iter().map(u).collect();
    let u_max = velocity.iter().map(|v| norm(*v)).fold(0.0, f64::max);
    let limit = RK4_IMAGINARY_LIMIT / (u_max * grid.k_max() * 2.0 / 3.0).max(f64::MIN_POSITIVE);
    if h > limit {
        return Err(Error::TimeStep { dt: h, limit });
    }
    let mask = dealias_mask(&grid);
    let kvec = grid.wavevectors();
    let lambda: Vec<f64> =
        kvec.iter().map(|k| problem.a * wavenumber(*k).powf(problem.alpha)).collect();
    let e_full: Vec<f64> = lambda.iter().map(|l| (-l * h).exp()).collect();
    let e_half: Vec<f64> = lambda.iter().map(|l| (-l * h * 0.5).exp()).collect();

    // h N(ρ̂) = -h i k·FFT(u ρ), dealiased
    let rhs = |r: &[Complex64]| -> Vec<Complex64> {
        let masked: Vec<Complex64> =
            r.iter().zip(&mask).map(|(z, &keep)| if keep { *z } else { Complex64::default() }).collect();
        let rho = transform.inverse_real(&masked);
        let mut flux = [vec![Complex64::default(); rho.len()], vec![Complex64::default(); rho.len()]];
        for (x, (r, v)) in rho.iter().zip(&velocity).enumerate() {
            flux[0][x] = Complex64::new(r * v[0], 0.0);
            flux[1][x] = Complex64::new(r * v[1], 0.0);
        }
        transform.forward_in_place(&mut flux[0]);
        if grid.dim() == 2 {
            transform.forward_in_place(&mut flux[1]);
        }
        (0..r.len())
            .map(|idx| {
                if !mask[idx] {
                    return Complex64::default();
                }
                let k = kvec[idx];
                let mut div = flux[0][idx] * k[0];
                if grid.dim() == 2 {
                    div += flux[1][idx] * k[1];
                }
                Complex64::new(0.0, -h) * div
            })
            .collect()
    };

    let snapshot_steps: Vec<usize> =
        times.iter().map(|t| ((t / h).round() as usize).min(steps)).collect();
    let mut snapshots = Vec::with_capacity(times.len());
    let mut next = 0;
    while next < snapshot_steps.len() && snapshot_steps[next] == 0 {
        snapshots.push(MacroField::from_spectrum(transform, &rho_hat, t0)?);
        next += 1;
    }
    let n = rho_hat.len();
    for step in 1..=steps {
        let a = rhs(&rho_hat);
        let arg: Vec<Complex64> = (0..n).map(|i| e_half[i] * (rho_hat[i] + a[i] * 0.5)).collect();
        let b = rhs(&arg);
        let arg: Vec<Complex64> = (0..n).map(|i| e_half[i] * rho_hat[i] + b[i] * 0.5).collect();
        let c = rhs(&arg);
        let arg: Vec<Complex64> = (0..n).map(|i| e_full[i] * rho_hat[i] + e_half[i] * c[i]).collect();
        let d = rhs(&arg);
        for i in 0..n {
            rho_hat[i] = e_full[i] * rho_hat[i]
                + (e_full[i] * a[i] + (b[i] + c[i]) * (2.0 * e_half[i]) + d[i]) / 6.0;
        }
        if rho_hat.iter().any(|z| !z.is_finite()) {
            let t = t0 + step as f64 * h;
            return Err(Error::NonFinite { t, state: Box::new(transform.inverse_real(&rho_hat)) });
        }
        while next < snapshot_steps.len() && snapshot_steps[next] == step {
            snapshots.push(MacroField::from_spectrum(transform, &rho_hat, t0 + step as f64 * h)?);
            next += 1;
        }
    }
    Ok(MacroRun { snapshots, steps })
}
