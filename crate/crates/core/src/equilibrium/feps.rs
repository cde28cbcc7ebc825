use serde::Serialize;

use super::{AssumptionClass, TurningKernel, VelocityQuadrature};
use crate::collision::CollisionOperator;
use crate::error::{Error, Result};
use crate::vector::Vec2;

pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

/// Equilibrium of Q_ε at a fixed field value c.
#[derive(Debug, Clone, Serialize)]
pub struct FepsSolution {
    /// F_ε at the quadrature nodes.
    pub values: Vec<f64>,
    /// G_ε = F_ε / M at the nodes.
    pub ratio: Vec<f64>,
    /// Attained (min, max) of F_ε / M.
    pub ratio_bounds: (f64, f64),
    /// (μ₁, μ₂, μ₃) = (min G, max G, max |G - 1| / ε^{α-1}).
    pub mu: [f64; 3],
    /// ‖Q_ε(F_ε)‖ in L¹(dv).
    pub residual: f64,
    pub iterations: usize,
    pub eps: f64,
    pub c: Vec2,
    pub phi_bound: f64,
    /// ε^{α-1}.
    pub eps_factor: f64,
    /// Finite-difference (time, space) derivative bounds, when computed.
    pub lambda_fd: Option<DerivativeBounds>,
}

impl FepsSolution {
    /// The a priori interval containing F_ε / M.
    pub fn certified_bounds(&self) -> (f64, f64) {
        let s = self.eps_factor * self.phi_bound;
        ((1.0 - s) / (1.0 + s), (1.0 + s) / (1.0 - s))
    }

    /// Whether every nodal ratio lies in [`certified_bounds`](Self::certified_bounds).
    pub fn within_bounds(&self) -> bool {
        let (lo, hi) = self.certified_bounds();
        let slack = 1e-13;
        self.ratio.iter().all(|&g| g >= lo - slack && g <= hi + slack)
    }

    /// Bound on max |G - 1| / ε^{α-1} implied by the ratio interval.
    pub fn certified_mu3(&self) -> f64 {
        2.0 * self.phi_bound / (1.0 - self.eps_factor * self.phi_bound)
    }
}

/// Solves `Q_ε(F) = 0`, `∫F dv = 1` by the fixed point
/// `G_i = (1 + s Σ_j m_j Φ_ij G_j) / (1 + s L_i)`, `s = ε^{α-1}`,
/// renormalizing the mass after every sweep.
pub fn solve_feps(
    quad: &VelocityQuadrature,
    kernel: &dyn TurningKernel,
    c: Vec2,
    eps: f64,
    tol: f64,
) -> Result<FepsSolution> {
    let op = CollisionOperator::new(quad, kernel, c, eps)?;
    solve_feps_with(&op, tol, DEFAULT_MAX_ITERATIONS)
}

/// [`solve_feps`] on a prebuilt operator.
pub fn solve_feps_with(
    op: &CollisionOperator<'_>,
    tol: f64,
    max_iterations: usize,
) -> Result<FepsSolution> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    let s = op.eps_factor();
    let contraction = s * op.phi_bound();
    if contraction >= 1.0 {
        return Err(Error::NonContraction(contraction));
    }
    let quad = op.quad();
    let n = op.len();
    let wm = quad.weights_m();
    let k = op.kernel_matrix();
    let denom: Vec<f64> = op.loss_moments().iter().map(|l| 1.0 + s * l).collect();

    let mut g = vec![1.0; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let wg: Vec<f64> = wm.iter().zip(&g).map(|(w, x)| w * x).collect();
        for i in 0..n {
            let gain: f64 = k[i * n..(i + 1) * n].iter().zip(&wg).map(|(a, b)| a * b).sum();
            next[i] = (1.0 + s * gain) / denom[i];
        }
        let mass: f64 = wm.iter().zip(&next).map(|(w, x)| w * x).sum();
        for x in next.iter_mut() {
            *x /= mass;
        }
        let change = g.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut g, &mut next);
        if change < tol {
            break;
        }
        if iterations >= max_iterations {
            return Err(Error::NoConvergence { iterations, last_change: change });
        }
    }

    let values: Vec<f64> = g.iter().zip(quad.m_values()).map(|(x, m)| x * m).collect();
    let q = op.apply_qeps_values(&values);
    let residual = quad.weights_plain().iter().zip(&q).map(|(w, x)| w * x.abs()).sum();
    let lo = g.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dev = g.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    let mu3 = if s > 0.0 { dev / s } else { 0.0 };
    Ok(FepsSolution {
        values,
        ratio: g,
        ratio_bounds: (lo, hi),
        mu: [lo, hi, mu3],
        residual,
        iterations,
        eps: op.eps(),
        c: op.c(),
        phi_bound: op.phi_bound(),
        eps_factor: s,
        lambda_fd: None,
    })
}

/// Empirical sup |∂_t F_ε / F_ε| and sup |v·∇_x F_ε / F_ε|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeBounds {
    pub time: f64,
    pub space: f64,
}

/// Central finite differences of F_ε along a field `c(x, t)`, maximized over
/// the given sample points and all velocity nodes.
pub fn feps_derivative_bounds<C>(
    quad: &VelocityQuadrature,
    kernel: &dyn TurningKernel,
    c_field: C,
    eps: f64,
    fd_step: f64,
    samples: &[(Vec2, f64)],
) -> Result<DerivativeBounds>
where
    C: Fn(Vec2, f64) -> Vec2,
{
    if kernel.assumption_class() != AssumptionClass::C {
        return Err(Error::param(
            "kernel",
            format!("derivative bounds need a class C kernel, `{}` is class {}", kernel.name(), kernel.assumption_class()),
        ));
    }
    if !(fd_step > 0.0) {
        return Err(Error::param("fd_step", "must be positive"));
    }
    if samples.is_empty() {
        return Err(Error::Insufficient("no sample points for derivative bounds".into()));
    }
    let tol = 1e-15;
    let solve = |x: Vec2, t: f64| solve_feps(quad, kernel, c_field(x, t), eps, tol);
    let dim = quad.spec().dim();
    let mut bounds = DerivativeBounds { time: 0.0, space: 0.0 };
    for &(x, t) in samples {
        let center = solve(x, t)?;
        let plus = solve(x, t + fd_step)?;
        let minus = solve(x, t - fd_step)?;
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(dim);
        for d in 0..dim {
            let mut xp = x;
            let mut xm = x;
            xp[d] += fd_step;
            xm[d] -= fd_step;
            let fp = solve(xp, t)?;
            let fm = solve(xm, t)?;
            grads.push(
                fp.values.iter().zip(&fm.values).map(|(a, b)| (a - b) / (2.0 * fd_step)).collect(),
            );
        }
        for (i, (&f, &v)) in center.values.iter().zip(quad.nodes()).enumerate() {
            let dt = (plus.values[i] - minus.values[i]) / (2.0 * fd_step);
            bounds.time = bounds.time.max((dt / f).abs());
            let dx: f64 = (0..dim).map(|d| v[d] * grads[d][i]).sum();
            bounds.space = bounds.space.max((dx / f).abs());
        }
    }
    Ok(bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{DecayKernel, EquilibriumSpec, SimpleKernel, ZeroKernel};
    use crate::vector::{dot, unit};

    fn quad(dim: usize) -> VelocityQuadrature {
        VelocityQuadrature::build(&EquilibriumSpec::flat(dim, 1.5).unwrap(), 24, 32).unwrap()
    }

    #[test]
    fn zero_kernel_gives_m_in_one_sweep() {
        let q = quad(1);
        let sol = solve_feps(&q, &ZeroKernel, [1.0, 0.0], 0.1, 1e-12).unwrap();
        assert_eq!(sol.iterations, 1);
        for (f, m) in sol.values.iter().zip(q.m_values()) {
            assert!((f - m).abs() <= 1e-15 * m);
        }
    }

    #[test]
    fn simple_kernel_closed_form() {
        for dim in [1, 2] {
            let q = quad(dim);
            let c = if dim == 1 { [1.0, 0.0] } else { [0.6, 0.8] };
            for &eps in &[0.2, 0.1, 0.05] {
                let sol = solve_feps(&q, &SimpleKernel, c, eps, 1e-14).unwrap();
                let s = eps.powf(0.5);
                for ((&f, &m), &v) in sol.values.iter().zip(q.m_values()).zip(q.nodes()) {
                    let exact = m * (1.0 + s * dot(c, unit(v)));
                    assert!((f - exact).abs() < 1e-10 * m, "dim {dim} eps {eps}");
                }
                assert!(sol.residual < 1e-12);
                assert!(sol.within_bounds());
            }
        }
    }

    #[test]
    fn decay_kernel_certified() {
        let q = quad(1);
        for &eps in &[0.2, 0.1, 0.05] {
            let sol = solve_feps(&q, &DecayKernel, [1.0, 0.0], eps, 1e-14).unwrap();
            assert!(sol.residual < 1e-10, "residual {}", sol.residual);
            assert!(sol.within_bounds());
            assert!((q.integrate_plain(&sol.values) - 1.0).abs() < 1e-10);
            assert!(sol.mu[2] <= sol.certified_mu3());
        }
    }

    #[test]
    fn non_contraction_rejected() {
        let q = quad(1);
        let err = solve_feps(&q, &SimpleKernel, [3.0, 0.0], 0.5, 1e-12).unwrap_err();
        assert!(matches!(err, Error::NonContraction(_)));
    }

    #[test]
    fn iteration_cap_reported() {
        let q = quad(1);
        let op = CollisionOperator::new(&q, &DecayKernel, [1.0, 0.0], 0.2).unwrap();
        let err = solve_feps_with(&op, 1e-15, 2).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 2, .. }));
    }

    #[test]
    fn derivative_bounds_constant_field() {
        let q = quad(1);
        let b = feps_derivative_bounds(&q, &DecayKernel, |_, _| [1.0, 0.0], 0.1, 1e-3, &[
            ([0.3, 0.0], 0.1),
            ([2.0, 0.0], 0.4),
        ])
        .unwrap();
        assert!(b.time <= 1e-8 && b.space <= 1e-8, "{b:?}");
    }

    fn varying(x: Vec2, t: f64) -> Vec2 {
        [(1.0 + 0.1 * x[0].sin()) * (1.0 + 0.2 * t), 0.0]
    }

    fn samples() -> Vec<(Vec2, f64)> {
        (0..8).map(|j| ([j as f64 * 0.785, 0.0], 0.25)).collect()
    }

    #[test]
    fn derivative_bounds_scale_like_eps_power() {
        let q = quad(1);
        let eps = [0.1, 0.05, 0.025];
        let bounds: Vec<DerivativeBounds> = eps
            .iter()
            .map(|&e| feps_derivative_bounds(&q, &DecayKernel, varying, e, 1e-3, &samples()).unwrap())
            .collect();
        let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
        for pick in [|b: &DerivativeBounds| b.time, |b: &DerivativeBounds| b.space] {
            let ys: Vec<f64> = bounds.iter().map(|b| pick(b).ln()).collect();
            let slope = (ys[2] - ys[0]) / (xs[2] - xs[0]);
            assert!((slope - 0.5).abs() < 0.1, "slope {slope}");
        }
    }

    #[test]
    fn derivative_bounds_fd_converged() {
        let q = quad(1);
        let a = feps_derivative_bounds(&q, &DecayKernel, varying, 0.05, 2e-3, &samples()).unwrap();
        let b = feps_derivative_bounds(&q, &DecayKernel, varying, 0.05, 1e-3, &samples()).unwrap();
        assert!((a.time - b.time).abs() < 0.01 * b.time);
        assert!((a.space - b.space).abs() < 0.01 * b.space);
    }

    #[test]
    fn derivative_bounds_need_class_c() {
        let q = quad(1);
        assert!(feps_derivative_bounds(&q, &SimpleKernel, varying, 0.1, 1e-3, &samples()).is_err());
    }
}
