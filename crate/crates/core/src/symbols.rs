//! Fourier–Laplace symbols of the scaled kinetic equation and the
//! auxiliary function χ_ε of the moment method.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::collision::CollisionOperator;
use crate::equilibrium::{integrate_against_m, TurningKernel, VelocityQuadrature};
use crate::error::{Error, Result};
use crate::fractional::LimitConstants;
use crate::grid::{MacroField, SpectralTransform};
use crate::quadrature::{adaptive, gauss_laguerre, GaussRule, Tolerance};
use crate::solvers::KineticRun;
use crate::vector::{dot, norm, Vec2};

/// The symbol S_ε(k, p) of the simple-kernel model next to its limit
/// `p + A|k|^α + i B c·k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymbolEvaluation {
    pub eps: f64,
    pub k: Vec2,
    pub p: f64,
    pub real_part: f64,
    pub imag_part: f64,
    pub limit_real: f64,
    pub limit_imag: f64,
    pub gap_real: f64,
    pub gap_imag: f64,
}

impl SymbolEvaluation {
    /// |S_ε - S_0|.
    pub fn gap(&self) -> f64 {
        self.gap_real.hypot(self.gap_imag)
    }
}

fn tol() -> Tolerance {
    Tolerance::new(1e-15, 1e-12)
}

/// `∫_lower^∞ g(w) w^{1-α} dw` for bounded `g` decaying like w^{-2}.
fn stretched_tail<G: Fn(f64) -> f64>(alpha: f64, lower: f64, g: G) -> Result<f64> {
    let mut total = 0.0;
    if lower < 1.0 {
        // w = u^{1/(2-α)}: w^{1-α} dw = du / (2-α)
        let p = 1.0 / (2.0 - alpha);
        total += p * adaptive(|u: f64| g(u.powf(p)), lower.powf(2.0 - alpha), 1.0, tol())?.value;
    }
    // w = u^{-1/α}: w^{1-α} dw = u^{-2/α} du / α
    let top = lower.max(1.0).powf(-alpha);
    total += adaptive(
        |u: f64| if u > 0.0 { g(u.powf(-1.0 / alpha)) * u.powf(-2.0 / alpha) } else { 0.0 },
        0.0,
        top,
        tol(),
    )?
    .value
        / alpha;
    Ok(total)
}

/// Radial tail pieces `∫_1^∞ h(r θ) r^{-1-α} dr` of the real and imaginary
/// symbol integrands along a direction with `κ = θ·k` and `c_θ = c·θ`.
fn tail_along(alpha: f64, eps: f64, p: f64, kappa: f64, c_dir: f64) -> Result<(f64, f64)> {
    let d = (1.0 + eps.powf(alpha) * p).powi(2);
    let pterm = p + eps.powf(alpha) * p * p;
    let ek2 = (eps * kappa).powi(2);
    // r = u^{-1/α}
    let q = 2.0 / alpha;
    let loss = if pterm == 0.0 {
        0.0
    } else {
        pterm / alpha
            * adaptive(
                |u: f64| if u > 0.0 { 1.0 / (d + ek2 * u.powf(-q)) } else { 0.0 },
                0.0,
                1.0,
                tol(),
            )?
            .value
    };
    if kappa == 0.0 {
        return Ok((loss, 0.0));
    }
    // w = ε|κ| r
    let spread = kappa.abs().powf(alpha)
        * stretched_tail(alpha, eps * kappa.abs(), |w| 1.0 / (d + w * w))?;
    // r = u^{-1/(α-1)}
    let s = 2.0 / (alpha - 1.0);
    let drift = c_dir * kappa / (alpha - 1.0)
        * adaptive(
            |u: f64| if u > 0.0 { 1.0 / (d + ek2 * u.powf(-s)) } else { 0.0 },
            0.0,
            1.0,
            tol(),
        )?
        .value;
    Ok((loss + spread, drift))
}

/// Symbol of the simple-kernel model at (ε, k, p), with the limit taken from
/// `constants`.
///
/// The core |v| < 1 is integrated with the core nodes of `quad`; the tail is
/// integrated adaptively, its spreading part in the stretched variable
/// w = ε|v·k| so that small ε causes no cancellation.
pub fn symbol_eps_with(
    constants: &LimitConstants,
    quad: &VelocityQuadrature,
    c: Vec2,
    eps: f64,
    k: Vec2,
    p: f64,
) -> Result<SymbolEvaluation> {
    if !(p > 0.0) {
        return Err(Error::param("p", format!("Laplace variable must be positive, got {p}")));
    }
    if !(eps > 0.0) {
        return Err(Error::param("eps", format!("must be positive, got {eps}")));
    }
    let spec = quad.spec();
    let alpha = spec.alpha();
    let ea = eps.powf(alpha);
    let d = (1.0 + ea * p).powi(2);

    let mut real_part = 0.0;
    let mut imag_part = 0.0;
    for (&v, &m) in quad.nodes().iter().zip(quad.weights_m()) {
        let r = norm(v);
        if r >= 1.0 {
            continue;
        }
        let vk = dot(v, k);
        let denom = d + (eps * vk).powi(2);
        real_part += m * (p + ea * p * p + eps.powf(2.0 - alpha) * vk * vk) / denom;
        imag_part += m * dot(c, [v[0] / r, v[1] / r]) * vk / denom;
    }

    let gamma = spec.gamma();
    if spec.dim() == 1 {
        for sign in [1.0, -1.0] {
            let (re, im) = tail_along(alpha, eps, p, sign * k[0], sign * c[0])?;
            real_part += gamma * re;
            imag_part += gamma * im;
        }
    } else {
        let failed = RefCell::new(None);
        let along = |theta: f64, part: usize| {
            let dir = [theta.cos(), theta.sin()];
            match tail_along(alpha, eps, p, dot(dir, k), dot(dir, c)) {
                Ok(pair) => {
                    if part == 0 {
                        pair.0
                    } else {
                        pair.1
                    }
                }
                Err(e) => {
                    failed.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        };
        // split where θ·k changes sign
        let base = k[1].atan2(k[0]) + 0.5 * PI;
        let mut cuts: Vec<f64> = vec![0.0, 2.0 * PI];
        if norm(k) > 0.0 {
            for j in 0..2 {
                cuts.push((base + j as f64 * PI).rem_euclid(2.0 * PI));
            }
        }
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup();
        for part in 0..2 {
            let mut sum = 0.0;
            for w in cuts.windows(2) {
                sum += adaptive(|t| along(t, part), w[0], w[1], tol())?.value;
            }
            if part == 0 {
                real_part += gamma * sum;
            } else {
                imag_part += gamma * sum;
            }
        }
        if let Some(e) = failed.into_inner() {
            return Err(e);
        }
    }

    let (limit_real, limit_imag) = symbol_limit(constants, c, k, p)?;
    Ok(SymbolEvaluation {
        eps,
        k,
        p,
        real_part,
        imag_part,
        limit_real,
        limit_imag,
        gap_real: (real_part - limit_real).abs(),
        gap_imag: (imag_part - limit_imag).abs(),
    })
}

/// [`symbol_eps_with`] computing the limit constants from the spec.
pub fn symbol_eps(
    quad: &VelocityQuadrature,
    c: Vec2,
    eps: f64,
    k: Vec2,
    p: f64,
) -> Result<SymbolEvaluation> {
    let constants = LimitConstants::compute(quad.spec())?;
    symbol_eps_with(&constants, quad, c, eps, k, p)
}

/// `(p + A|k|^α, B c·k)`.
pub fn symbol_limit(constants: &LimitConstants, c: Vec2, k: Vec2, p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0) {
        return Err(Error::param("p", format!("Laplace variable must be positive, got {p}")));
    }
    Ok((p + constants.a * norm(k).powf(constants.alpha), constants.b * dot(c, k)))
}

/// `ε^{-α} ∫ ε²(v·k)² / (1 + ε²(v·k)²) M dv`, the fractional part of the
/// symbol; tends to A|k|^α.
pub fn spreading_symbol(
    constants: &LimitConstants,
    quad: &VelocityQuadrature,
    eps: f64,
    k: Vec2,
) -> Result<f64> {
    // p → 0 limit of the real part with the p-terms removed
    let p = f64::MIN_POSITIVE;
    let s = symbol_eps_with(constants, quad, [0.0, 0.0], eps, k, p)?;
    Ok(s.real_part - p)
}

/// χ_ε(x, v) = ∫_0^∞ e^{-z} φ(x + ε v z) dz by Gauss–Laguerre quadrature.
#[derive(Debug, Clone)]
pub struct ChiEvaluator {
    rule: GaussRule,
}

pub const DEFAULT_LAGUERRE_ORDER: usize = 48;

impl Default for ChiEvaluator {
    fn default() -> Self {
        Self::new(DEFAULT_LAGUERRE_ORDER)
    }
}

impl ChiEvaluator {
    pub fn new(order: usize) -> Self {
        ChiEvaluator { rule: gauss_laguerre(order.max(1)) }
    }

    pub fn order(&self) -> usize {
        self.rule.len()
    }

    pub fn eval<F: Fn(Vec2) -> f64>(&self, phi: F, eps: f64, x: Vec2, v: Vec2) -> f64 {
        self.rule.integrate(|z| phi([x[0] + eps * v[0] * z, x[1] + eps * v[1] * z]))
    }
}

/// One-off evaluation of χ_ε with a rule of the given order.
pub fn chi_eps<F: Fn(Vec2) -> f64>(phi: F, eps: f64, x: Vec2, v: Vec2, order: usize) -> f64 {
    ChiEvaluator::new(order).eval(phi, eps, x, v)
}

/// χ_ε for a field on the torus, via the multiplier `1 / (1 - i ε v·k)`.
pub fn chi_eps_torus(
    field: &MacroField,
    transform: &SpectralTransform,
    eps: f64,
    v: Vec2,
) -> MacroField {
    field.apply_multiplier(transform, |k| Complex64::new(1.0, -eps * dot(v, k)).inv())
}

/// Space-time plane wave φ(x, t) = cos(k·x - ω t + phase).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlaneWave {
    pub k: Vec2,
    pub omega: f64,
    pub phase: f64,
}

impl PlaneWave {
    pub fn new(k: Vec2, omega: f64, phase: f64) -> Self {
        PlaneWave { k, omega, phase }
    }

    pub fn arg(&self, x: Vec2, t: f64) -> f64 {
        dot(self.k, x) - self.omega * t + self.phase
    }

    pub fn value(&self, x: Vec2, t: f64) -> f64 {
        self.arg(x, t).cos()
    }

    /// χ_ε in closed form, `Re e^{iψ} / (1 - i ε v·k)`.
    pub fn chi(&self, eps: f64, x: Vec2, v: Vec2, t: f64) -> f64 {
        let psi = self.arg(x, t);
        let a = eps * dot(v, self.k);
        (psi.cos() - a * psi.sin()) / (1.0 + a * a)
    }
}

/// Lemma-type diagnostics of χ_ε for a plane wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiEvaluation {
    pub eps: f64,
    /// sup over x of ∫ M |χ_ε - φ| dv
    pub dev_0: f64,
    /// sup over x of ∫ M |∂_t χ_ε - ∂_t φ| dv
    pub dev_t: f64,
    /// sup over x of ∫ M |∇χ_ε - ∇φ| dv
    pub dev_x: f64,
    /// ε^{-α} ∫ M (χ_ε - φ) dv at the requested point
    pub frac_term: f64,
    /// -A (-Δ)^{α/2} φ at the requested point
    pub frac_limit: f64,
}

/// Phases sampled for the sup over x.
const PHASES: usize = 16;

/// Deviations of χ_ε from φ and the rescaled fractional term, for a plane
/// wave. The deviations depend on x only through the phase of φ and are
/// maximized over [`PHASES`] equispaced phases.
pub fn chi_diagnostics(
    phi: &PlaneWave,
    constants: &LimitConstants,
    quad: &VelocityQuadrature,
    eps: f64,
    x: Vec2,
    t: f64,
) -> Result<ChiEvaluation> {
    let spec = quad.spec();
    let kn = norm(phi.k);
    let breaks: Vec<f64> = if eps * kn > 0.0 { vec![1.0 / (eps * kn)] } else { vec![] };
    let tol = Tolerance::new(1e-14, 1e-10);
    let mut dev = [0.0f64; 3];
    for j in 0..PHASES {
        let psi = 2.0 * PI * j as f64 / PHASES as f64;
        let (s, c) = psi.sin_cos();
        let d0 = integrate_against_m(
            spec,
            |v| {
                let a = eps * dot(v, phi.k);
                (a * s + a * a * c).abs() / (1.0 + a * a)
            },
            &breaks,
            tol,
        )?;
        let d1 = integrate_against_m(
            spec,
            |v| {
                let a = eps * dot(v, phi.k);
                (a * c - a * a * s).abs() / (1.0 + a * a)
            },
            &breaks,
            tol,
        )?;
        dev[0] = dev[0].max(d0);
        dev[1] = dev[1].max(phi.omega.abs() * d1);
        dev[2] = dev[2].max(kn * d1);
    }
    let value = phi.value(x, t);
    let spreading = if kn > 0.0 { spreading_symbol(constants, quad, eps, phi.k)? } else { 0.0 };
    Ok(ChiEvaluation {
        eps,
        dev_0: dev[0],
        dev_t: dev[1],
        dev_x: dev[2],
        frac_term: -spreading * value,
        frac_limit: -constants.a * kn.powf(constants.alpha) * value,
    })
}

/// The four terms of the weak form of the kinetic equation tested against
/// `θ(t) e^{ik·x} χ̃(v)`, with `χ̃ = 1/(1 - iε v·k)` and the time cut-off
/// `θ(t) = (1 + cos(πt/T_s))/2` on `[0, T_s]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakFormResidual {
    /// ∫ θ' Σ_v w F_v χ̃_v dt
    pub time_derivative: Complex64,
    /// θ(0) Σ_v w F_v(0) χ̃_v
    pub initial: Complex64,
    /// ε^{-α} ∫ θ ρ̂ (Σ_v w M χ̃_v - 1) dt
    pub fractional: Complex64,
    /// ε^{-1} ∫ θ Σ_v w χ̃_v Q_1(F)_v dt
    pub drift: Complex64,
    /// |sum of the four terms|
    pub residual: f64,
    /// residual divided by the largest term
    pub relative: f64,
    pub samples: usize,
}

/// Minimum number of recorded times inside the support of θ.
pub const MIN_WEAK_FORM_SAMPLES: usize = 16;

/// Assembles the weak form for a constant-field kinetic run from the probe
/// of spectral index `mode`, with `F_v(t) = ∫ f(x, v, t) e^{ik·x} dx`. The
/// terms cancel for the time-continuous solution, so the residual measures
/// the time discretization. Time integrals use the trapezoid rule, with the
/// θ' term written as a sum over exact increments of θ.
pub fn weak_form_residual(
    run: &KineticRun,
    kernel: &dyn TurningKernel,
    quad: &VelocityQuadrature,
    mode: usize,
    support: f64,
) -> Result<WeakFormResidual> {
    let feps = run
        .feps
        .as_ref()
        .ok_or_else(|| Error::Insufficient("weak form needs a constant-field run".into()))?;
    let probe = run
        .probes
        .iter()
        .find(|p| p.mode == mode)
        .ok_or_else(|| Error::Insufficient(format!("mode {mode} was not probed")))?;
    if !(support > 0.0) {
        return Err(Error::param("support", format!("must be positive, got {support}")));
    }
    let inside = probe.times.iter().filter(|&&t| t - probe.times[0] <= support * (1.0 + 1e-12)).count();
    if inside < MIN_WEAK_FORM_SAMPLES {
        return Err(Error::Insufficient(format!(
            "{inside} snapshots inside the time support, need at least {MIN_WEAK_FORM_SAMPLES}"
        )));
    }
    if probe.times.last().copied().unwrap_or(0.0) - probe.times[0] < support * (1.0 - 1e-12) {
        return Err(Error::Insufficient("run ends before the time support".into()));
    }

    let n = quad.len();
    let eps = run.eps;
    let alpha = quad.spec().alpha();
    let w = quad.weights_plain();
    let wm = quad.weights_m();
    let cell = run.final_state.grid().cell_volume();
    let chi: Vec<Complex64> =
        quad.nodes().iter().map(|v| Complex64::new(1.0, -eps * dot(*v, probe.k)).inv()).collect();
    let m_chi: Complex64 = wm.iter().zip(&chi).map(|(a, z)| z * a).sum::<Complex64>() - 1.0;
    let op = CollisionOperator::new(quad, kernel, feps.c, eps)?;

    let t0 = probe.times[0];
    let theta = |t: f64| 0.5 * (1.0 + (PI * (t - t0) / support).cos());
    struct Sample {
        t: f64,
        fractional: Complex64,
        drift: Complex64,
        paired: Complex64,
    }
    let mut samples = Vec::with_capacity(inside);
    for (t, values) in probe.times.iter().zip(&probe.values).take(inside) {
        let f: Vec<Complex64> = values.iter().map(|z| z.conj() * cell).collect();
        let paired: Complex64 = (0..n).map(|i| f[i] * chi[i] * w[i]).sum();
        let rho: Complex64 = (0..n).map(|i| f[i] * w[i]).sum();
        let re: Vec<f64> = f.iter().map(|z| z.re).collect();
        let im: Vec<f64> = f.iter().map(|z| z.im).collect();
        let (q_re, q_im) = (op.apply_q1_values(&re), op.apply_q1_values(&im));
        let q1: Complex64 = (0..n).map(|i| Complex64::new(q_re[i], q_im[i]) * chi[i] * w[i]).sum();
        samples.push(Sample {
            t: *t,
            fractional: rho * m_chi * theta(*t) * eps.powf(-alpha),
            drift: q1 * theta(*t) / eps,
            paired,
        });
    }
    let trapezoid = |pick: fn(&Sample) -> Complex64| -> Complex64 {
        samples.windows(2).map(|p| (pick(&p[0]) + pick(&p[1])) * (0.5 * (p[1].t - p[0].t))).sum()
    };
    // exact increments of θ make this term telescope for constant data
    let time_derivative: Complex64 = samples
        .windows(2)
        .map(|p| (p[0].paired + p[1].paired) * (0.5 * (theta(p[1].t) - theta(p[0].t))))
        .sum();
    let fractional = trapezoid(|x| x.fractional);
    let drift = trapezoid(|x| x.drift);
    let initial = samples[0].paired * theta(t0);
    let total = time_derivative + initial + fractional + drift;
    let scale = [time_derivative, initial, fractional, drift]
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Ok(WeakFormResidual {
        time_derivative,
        initial,
        fractional,
        drift,
        residual: total.norm(),
        relative: if scale > 0.0 { total.norm() / scale } else { 0.0 },
        samples: inside,
    })
}
