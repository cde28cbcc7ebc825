//! Limit constants and the fractional Laplacian.

use std::f64::consts::PI;

use serde::Serialize;

use crate::equilibrium::{moment, EquilibriumSpec, VelocityQuadrature};
use crate::error::{Error, Result};
use crate::grid::MacroField;
use crate::grid::SpectralTransform;
use crate::quadrature::{adaptive, Tolerance};
use crate::special::gamma;
use crate::vector::{norm, Vec2};

/// Constants of the limit equation `∂_t ρ + u·∇ρ + A (-Δ)^{α/2} ρ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitConstants {
    pub a: f64,
    pub b: f64,
    pub c_norm: f64,
    pub alpha: f64,
    pub dim: usize,
    pub gamma: f64,
}

impl LimitConstants {
    pub fn compute(spec: &EquilibriumSpec) -> Result<Self> {
        let quad = VelocityQuadrature::build(spec, 16, 16)?;
        let a = constant_a(spec)?;
        Ok(LimitConstants {
            a,
            b: constant_b(&quad),
            c_norm: gamma(spec.alpha() + 1.0) * spec.gamma() / a,
            alpha: spec.alpha(),
            dim: spec.dim(),
            gamma: spec.gamma(),
        })
    }
}

fn tol() -> Tolerance {
    Tolerance::new(1e-14, 1e-13)
}

/// `∫_0^∞ r^{1-α} a / (1 + a r²) dr` for `a > 0`, split at r = 1 and
/// mapped to bounded integrands on both halves.
fn radial_integral(alpha: f64, a: f64) -> Result<f64> {
    // r = u^{1/(2-α)} on [0, 1]
    let p = 1.0 / (2.0 - alpha);
    let inner = adaptive(|u: f64| a / (1.0 + a * u.powf(2.0 * p)), 0.0, 1.0, tol())?;
    // r = u^{-1/α} on [1, ∞)
    let q = 2.0 / alpha;
    let outer = adaptive(|u: f64| a / (u.powf(q) + a), 0.0, 1.0, tol())?;
    Ok(p * inner.value + outer.value / alpha)
}

/// A = γ ∫ w₁² |w|^{-N-α} / (1 + w₁²) dw by adaptive quadrature.
pub fn constant_a(spec: &EquilibriumSpec) -> Result<f64> {
    let alpha = spec.alpha();
    let integral = if spec.dim() == 1 {
        2.0 * radial_integral(alpha, 1.0)?
    } else {
        // polar coordinates; the integrand depends on θ through cos²θ
        let failed = std::cell::RefCell::new(None);
        let outer = adaptive(
            |theta: f64| {
                let a = theta.cos().powi(2);
                if a == 0.0 {
                    return 0.0;
                }
                radial_integral(alpha, a).unwrap_or_else(|e| {
                    failed.borrow_mut().get_or_insert(e);
                    0.0
                })
            },
            0.0,
            0.5 * PI,
            tol(),
        )?;
        if let Some(e) = failed.into_inner() {
            return Err(e);
        }
        4.0 * outer.value
    };
    Ok(spec.gamma() * integral)
}

/// B = (1/N) ∫ |v| M dv.
pub fn constant_b(quad: &VelocityQuadrature) -> f64 {
    moment(quad, norm) / quad.spec().dim() as f64
}

/// c_{N,α} = Γ(α+1) / ∫ w₁² |w|^{-N-α} / (1 + w₁²) dw.
pub fn constant_c_norm(dim: usize, alpha: f64) -> Result<f64> {
    let spec = EquilibriumSpec::flat(dim, alpha)?;
    Ok(gamma(alpha + 1.0) * spec.gamma() / constant_a(&spec)?)
}

/// (-Δ)^{α/2} on the torus as the multiplier |k|^α.
pub fn frac_laplacian_spectral(
    field: &MacroField,
    transform: &SpectralTransform,
    alpha: f64,
) -> MacroField {
    field.apply_multiplier(transform, |k| norm(k).powf(alpha).into())
}

const TAYLOR_RADIUS: f64 = 1e-3;

/// `∫_0^∞ D(h) h^{-1-α} dh` with `D` the second difference along a fixed
/// direction. Below [`TAYLOR_RADIUS`] the quotient D/h² is frozen.
fn radial_second_difference<D: Fn(f64) -> f64>(d: D, alpha: f64, tol: Tolerance) -> Result<f64> {
    let frozen = d(TAYLOR_RADIUS) / (TAYLOR_RADIUS * TAYLOR_RADIUS);
    let p = 1.0 / (2.0 - alpha);
    let inner = adaptive(
        |u: f64| {
            let h = u.powf(p);
            if h < TAYLOR_RADIUS {
                frozen
            } else {
                d(h) / (h * h)
            }
        },
        0.0,
        1.0,
        tol,
    )?;
    let outer = adaptive(
        |u: f64| if u == 0.0 { d(f64::INFINITY) } else { d(u.powf(-1.0 / alpha)) },
        0.0,
        1.0,
        tol,
    )?;
    Ok(p * inner.value + outer.value / alpha)
}

/// (-Δ)^{α/2} φ(x) on the whole space from the singular integral
/// `c_{N,α} ∫ (φ(x) - φ(y) - (x-y)·∇φ(x)) |x-y|^{-N-α} dy`,
/// evaluated in its symmetrized form with second differences.
///
/// `φ` must decay at infinity; `φ(±∞)` is taken as 0.
pub fn frac_laplacian_integral<F>(phi: F, dim: usize, alpha: f64, x: Vec2) -> Result<f64>
where
    F: Fn(Vec2) -> f64,
{
    let c_norm = constant_c_norm(dim, alpha)?;
    let tol = Tolerance::new(1e-12, 1e-11);
    let phi_x = phi(x);
    let second_difference = |dir: Vec2, h: f64| {
        if h.is_infinite() {
            return 2.0 * phi_x;
        }
        2.0 * phi_x - phi([x[0] + h * dir[0], x[1] + h * dir[1]]) - phi([x[0] - h * dir[0], x[1] - h * dir[1]])
    };
    if dim == 1 {
        let value = radial_second_difference(|h| second_difference([1.0, 0.0], h), alpha, tol)?;
        return Ok(c_norm * value);
    }
    let failed = std::cell::RefCell::new(None);
    let outer = adaptive(
        |theta: f64| {
            let dir = [theta.cos(), theta.sin()];
            radial_second_difference(|h| second_difference(dir, h), alpha, tol).unwrap_or_else(|e| {
                failed.borrow_mut().get_or_insert(e);
                0.0
            })
        },
        0.0,
        PI,
        tol,
    )
    .map_err(|e| match e {
        Error::Quadrature { value, error } => Error::Quadrature { value: c_norm * value, error },
        other => other,
    })?;
    if let Some(e) = failed.into_inner() {
        return Err(e);
    }
    Ok(c_norm * outer.value)
}
