use std::cell::RefCell;
use std::f64::consts::PI;
use std::io::Write;

use super::EquilibriumSpec;
use crate::error::{Error, Result};
use crate::quadrature::{adaptive, gauss_jacobi_unit, gauss_legendre, Tolerance};
use crate::vector::Vec2;

/// Discrete velocity set with weights for plain and M-weighted integrals.
///
/// The rule is a product of a radial rule and a set of directions (the two
/// signs in one dimension, equispaced angles in two). Radially, the unit
/// ball uses Gauss–Legendre; the tail |v| > 1 is mapped by t = 1/|v| onto
/// (0, 1], where `γ |v|^{-N-α} d|v|^N` becomes `γ t^{α-1} dt` up to the
/// angular factor. A Gauss–Jacobi rule for the weight t^{α-2} then makes the
/// M-weighted rule exact for every g = |v| P(1/|v|) with P a polynomial of
/// degree < 2 `tail_order`; in particular for 1 and |v|.
#[derive(Debug, Clone)]
pub struct VelocityQuadrature {
    spec: EquilibriumSpec,
    nodes: Vec<Vec2>,
    weights_plain: Vec<f64>,
    weights_m: Vec<f64>,
    m_values: Vec<f64>,
    core_order: usize,
    tail_order: usize,
    angular_order: usize,
    v_max_resolved: f64,
}

impl VelocityQuadrature {
    /// Builds the rule; in two dimensions the angular count defaults to the
    /// smallest multiple of 4 that is at least `2 * core_order`.
    pub fn build(spec: &EquilibriumSpec, core_order: usize, tail_order: usize) -> Result<Self> {
        let angular = if spec.dim() == 1 { 2 } else { (2 * core_order).div_ceil(4) * 4 };
        Self::build_with_angles(spec, core_order, tail_order, angular)
    }

    pub fn build_with_angles(
        spec: &EquilibriumSpec,
        core_order: usize,
        tail_order: usize,
        angular_order: usize,
    ) -> Result<Self> {
        if core_order < 2 {
            return Err(Error::param("core_order", "must be at least 2"));
        }
        if tail_order < 2 {
            return Err(Error::param("tail_order", "must be at least 2"));
        }
        let dim = spec.dim();
        if dim == 2 && (angular_order < 4 || angular_order % 4 != 0) {
            return Err(Error::param("angular_order", "must be a positive multiple of 4"));
        }
        let gamma = spec.gamma();
        let alpha = spec.alpha();

        // radial nodes r and M-weights per direction (without angular factor)
        let mut radial: Vec<(f64, f64)> = Vec::with_capacity(core_order + tail_order);
        let core = gauss_legendre(core_order).mapped(0.0, 1.0);
        for (&r, &w) in core.nodes.iter().zip(&core.weights) {
            let jac = if dim == 1 { 1.0 } else { r };
            radial.push((r, w * jac * spec.eval_radial(r)));
        }
        let tail = gauss_jacobi_unit(tail_order, alpha - 2.0);
        for (&t, &w) in tail.nodes.iter().zip(&tail.weights) {
            radial.push((1.0 / t, gamma * w * t));
        }
        radial.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut nodes = Vec::new();
        let mut weights_m = Vec::new();
        if dim == 1 {
            for &(r, m) in radial.iter().rev() {
                nodes.push([-r, 0.0]);
                weights_m.push(m);
            }
            for &(r, m) in &radial {
                nodes.push([r, 0.0]);
                weights_m.push(m);
            }
        } else {
            let dtheta = 2.0 * PI / angular_order as f64;
            for j in 0..angular_order {
                let theta = (j as f64 + 0.5) * dtheta;
                let (s, c) = theta.sin_cos();
                for &(r, m) in &radial {
                    nodes.push([r * c, r * s]);
                    weights_m.push(m * dtheta);
                }
            }
        }
        let m_values: Vec<f64> = nodes.iter().map(|&v| spec.eval(v)).collect();
        let weights_plain: Vec<f64> =
            weights_m.iter().zip(&m_values).map(|(&w, &m)| w / m).collect();
        let v_max_resolved = radial.last().map(|p| p.0).unwrap_or(1.0);

        let quad = VelocityQuadrature {
            spec: *spec,
            nodes,
            weights_plain,
            weights_m,
            m_values,
            core_order,
            tail_order,
            angular_order: if dim == 1 { 2 } else { angular_order },
            v_max_resolved,
        };
        let total: f64 = quad.weights_m.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Normalization((total - 1.0).abs()));
        }
        if quad.weights_m.iter().chain(&quad.weights_plain).any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::param("weights", "non-finite or negative quadrature weight"));
        }
        Ok(quad)
    }

    /// Same construction with a different tail order.
    pub fn with_tail_order(&self, tail_order: usize) -> Result<Self> {
        Self::build_with_angles(&self.spec, self.core_order, tail_order, self.angular_order.max(4))
    }

    pub fn spec(&self) -> &EquilibriumSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn weights_plain(&self) -> &[f64] {
        &self.weights_plain
    }

    pub fn weights_m(&self) -> &[f64] {
        &self.weights_m
    }

    /// M evaluated at the nodes.
    pub fn m_values(&self) -> &[f64] {
        &self.m_values
    }

    pub fn core_order(&self) -> usize {
        self.core_order
    }

    pub fn tail_order(&self) -> usize {
        self.tail_order
    }

    pub fn angular_order(&self) -> usize {
        self.angular_order
    }

    pub fn v_max_resolved(&self) -> f64 {
        self.v_max_resolved
    }

    /// Σ w_j f_j, the plain integral ∫ f dv of nodal values.
    pub fn integrate_plain(&self, values: &[f64]) -> f64 {
        self.weights_plain.iter().zip(values).map(|(w, f)| w * f).sum()
    }

    /// Writes the rule as CSV: node components, plain weight, M-weight.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        if self.spec.dim() == 1 {
            writeln!(out, "v1,weight_plain,weight_m")?;
        } else {
            writeln!(out, "v1,v2,weight_plain,weight_m")?;
        }
        for ((v, wp), wm) in self.nodes.iter().zip(&self.weights_plain).zip(&self.weights_m) {
            if self.spec.dim() == 1 {
                writeln!(out, "{:e},{:e},{:e}", v[0], wp, wm)?;
            } else {
                writeln!(out, "{:e},{:e},{:e},{:e}", v[0], v[1], wp, wm)?;
            }
        }
        Ok(())
    }
}

/// ∫ g M dv by the quadrature; the caller owns integrability.
pub fn moment<G: Fn(Vec2) -> f64>(quad: &VelocityQuadrature, g: G) -> f64 {
    quad.nodes.iter().zip(&quad.weights_m).map(|(&v, &m)| m * g(v)).sum()
}

/// Vector-valued moment ∫ g M dv.
pub fn moment_vec<G: Fn(Vec2) -> Vec2>(quad: &VelocityQuadrature, g: G) -> Vec2 {
    let mut acc = [0.0; 2];
    for (&v, &m) in quad.nodes.iter().zip(&quad.weights_m) {
        let gv = g(v);
        acc[0] += m * gv[0];
        acc[1] += m * gv[1];
    }
    acc
}

/// Adaptive evaluation of ∫ g M dv, independent of any fixed node set.
///
/// The core is integrated in |v|, the tail in s = |v|^{-α}, for which
/// `γ |v|^{-1-α} d|v| = (γ/α) ds`. `radial_breaks` are radii (> 1) at which
/// the tail integrand changes scale; they become subinterval boundaries.
pub fn integrate_against_m<G: Fn(Vec2) -> f64>(
    spec: &EquilibriumSpec,
    g: G,
    radial_breaks: &[f64],
    tol: Tolerance,
) -> Result<f64> {
    let alpha = spec.alpha();
    let gamma = spec.gamma();
    let radial = |dir: Vec2| -> Result<f64> {
        let along = |r: f64| g([dir[0] * r, dir[1] * r]);
        let jac = |r: f64| if spec.dim() == 1 { 1.0 } else { r };
        let core =
            adaptive(|r| along(r) * jac(r) * spec.eval_radial(r), 0.0, 1.0, tol)?.value;
        let mut cuts: Vec<f64> = radial_breaks
            .iter()
            .filter(|&&r| r > 1.0 && r.is_finite())
            .map(|&r| r.powf(-alpha))
            .collect();
        cuts.push(0.0);
        cuts.push(1.0);
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup();
        let mut tail = 0.0;
        for w in cuts.windows(2) {
            tail += adaptive(
                |s: f64| if s > 0.0 { along(s.powf(-1.0 / alpha)) } else { 0.0 },
                w[0],
                w[1],
                tol,
            )?
            .value;
        }
        Ok(core + gamma / alpha * tail)
    };
    match spec.dim() {
        1 => Ok(radial([1.0, 0.0])? + radial([-1.0, 0.0])?),
        _ => {
            let inner_error = RefCell::new(None);
            let outer = adaptive(
                |theta: f64| {
                    let (s, c) = theta.sin_cos();
                    radial([c, s]).unwrap_or_else(|e| {
                        inner_error.borrow_mut().get_or_insert(e);
                        0.0
                    })
                },
                0.0,
                2.0 * PI,
                Tolerance { max_intervals: 400, ..tol },
            )?;
            match inner_error.into_inner() {
                Some(e) => Err(e),
                None => Ok(outer.value),
            }
        }
    }
}
