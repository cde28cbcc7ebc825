//! The collision operator Q_ε = Q_0 + ε^{α-1} Q_1 on a discrete velocity set.
//!
//! Both integrals in Q_1 run over the same node set, so Q_1 is a dense
//! matrix applied to nodal values. The gain and loss sums are the two
//! orderings of one double sum, which keeps every operator mass-free to
//! round-off.

use rayon::prelude::*;

use crate::equilibrium::{FepsSolution, TurningKernel, VelocityQuadrature};
use crate::error::{Error, Result};
use crate::vector::{norm, Vec2};

/// Nodal values of a velocity distribution at one point in space and time.
#[derive(Debug, Clone)]
pub struct VelocityProfile<'q> {
    quad: &'q VelocityQuadrature,
    values: Vec<f64>,
}

impl<'q> VelocityProfile<'q> {
    pub fn new(quad: &'q VelocityQuadrature, values: Vec<f64>) -> Result<Self> {
        if values.len() != quad.len() {
            return Err(Error::param(
                "values",
                format!("expected {} nodal values, got {}", quad.len(), values.len()),
            ));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("values", "profile contains non-finite values"));
        }
        Ok(VelocityProfile { quad, values })
    }

    /// Profile with values `g(v_j, M(v_j))`.
    pub fn from_fn<G: FnMut(Vec2, f64) -> f64>(quad: &'q VelocityQuadrature, mut g: G) -> Self {
        let values = quad.nodes().iter().zip(quad.m_values()).map(|(&v, &m)| g(v, m)).collect();
        VelocityProfile { quad, values }
    }

    /// The equilibrium M itself.
    pub fn equilibrium(quad: &'q VelocityQuadrature) -> Self {
        VelocityProfile { quad, values: quad.m_values().to_vec() }
    }

    pub fn quad(&self) -> &'q VelocityQuadrature {
        self.quad
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// ρ_f = ∫ f dv.
    pub fn mass(&self) -> f64 {
        self.quad.integrate_plain(&self.values)
    }

    /// ∫ |f| dv.
    pub fn l1_norm(&self) -> f64 {
        self.quad.weights_plain().iter().zip(&self.values).map(|(w, f)| w * f.abs()).sum()
    }

    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        VelocityProfile { quad: self.quad, values }
    }
}

/// Q_0(f) = ρ_f M - f.
pub fn apply_q0<'q>(f: &VelocityProfile<'q>) -> VelocityProfile<'q> {
    let rho = f.mass();
    let values =
        f.quad.m_values().iter().zip(&f.values).map(|(&m, &fv)| rho * m - fv).collect();
    VelocityProfile { quad: f.quad, values }
}

/// Q_ε for a fixed kernel, field value and ε, with the kernel matrix
/// `K[i][j] = Φ(v_i, v_j, c)` cached.
#[derive(Clone)]
pub struct CollisionOperator<'q> {
    quad: &'q VelocityQuadrature,
    eps: f64,
    eps_factor: f64,
    c: Vec2,
    phi_bound: f64,
    kernel_matrix: Vec<f64>,
    loss: Vec<f64>,
    min_rate: f64,
}

impl<'q> CollisionOperator<'q> {
    pub fn new(
        quad: &'q VelocityQuadrature,
        kernel: &dyn TurningKernel,
        c: Vec2,
        eps: f64,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::param("eps", format!("must be positive, got {eps}")));
        }
        let n = quad.len();
        let nodes = quad.nodes();
        let kernel_matrix: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|idx| kernel.phi(nodes[idx / n], nodes[idx % n], c))
            .collect();
        let wm = quad.weights_m();
        let loss: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| wm[j] * kernel_matrix[j * n + i]).sum())
            .collect();
        let eps_factor = eps.powf(quad.spec().alpha() - 1.0);
        let min_phi = kernel_matrix.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
        Ok(CollisionOperator {
            quad,
            eps,
            eps_factor,
            c,
            phi_bound: kernel.phi_bound(c),
            kernel_matrix,
            loss,
            min_rate: 1.0 + eps_factor * min_phi,
        })
    }

    pub fn quad(&self) -> &'q VelocityQuadrature {
        self.quad
    }

    pub fn len(&self) -> usize {
        self.quad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quad.is_empty()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// ε^{α-1}.
    pub fn eps_factor(&self) -> f64 {
        self.eps_factor
    }

    pub fn c(&self) -> Vec2 {
        self.c
    }

    pub fn phi_bound(&self) -> f64 {
        self.phi_bound
    }

    /// Row-major `Φ(v_i, v_j, c)`.
    pub fn kernel_matrix(&self) -> &[f64] {
        &self.kernel_matrix
    }

    /// `∫ Φ(v', v_i, c) M' dv'` at every node.
    pub fn loss_moments(&self) -> &[f64] {
        &self.loss
    }

    /// min over node pairs of `1 + ε^{α-1} Φ`, never above 1.
    pub fn min_turning_rate(&self) -> f64 {
        self.min_rate
    }

    /// `Σ_j w_j Φ(v_i, v_j, c) f_j` for every i.
    pub fn gain_integrals(&self, f: &[f64]) -> Vec<f64> {
        let n = self.len();
        let wp = self.quad.weights_plain();
        let wf: Vec<f64> = wp.iter().zip(f).map(|(w, x)| w * x).collect();
        self.kernel_matrix
            .chunks_exact(n)
            .map(|row| row.iter().zip(&wf).map(|(k, x)| k * x).sum())
            .collect()
    }

    pub fn apply_q0_values(&self, f: &[f64]) -> Vec<f64> {
        let rho = self.quad.integrate_plain(f);
        self.quad.m_values().iter().zip(f).map(|(&m, &fv)| rho * m - fv).collect()
    }

    pub fn apply_q1_values(&self, f: &[f64]) -> Vec<f64> {
        let gain = self.gain_integrals(f);
        let m = self.quad.m_values();
        (0..self.len()).map(|i| m[i] * gain[i] - f[i] * self.loss[i]).collect()
    }

    pub fn apply_qeps_values(&self, f: &[f64]) -> Vec<f64> {
        let q0 = self.apply_q0_values(f);
        let q1 = self.apply_q1_values(f);
        q0.iter().zip(&q1).map(|(a, b)| a + self.eps_factor * b).collect()
    }

    pub fn apply_q0<'p>(&self, f: &VelocityProfile<'p>) -> VelocityProfile<'p> {
        apply_q0(f)
    }

    pub fn apply_q1<'p>(&self, f: &VelocityProfile<'p>) -> VelocityProfile<'p> {
        VelocityProfile { quad: f.quad, values: self.apply_q1_values(&f.values) }
    }

    pub fn apply_qeps<'p>(&self, f: &VelocityProfile<'p>) -> VelocityProfile<'p> {
        VelocityProfile { quad: f.quad, values: self.apply_qeps_values(&f.values) }
    }
}

/// Drift vector u(c) = ∫ v Q_1(M) dv with a tail-convergence estimate.
#[derive(Debug, Clone, Copy)]
pub struct DriftEstimate {
    pub u: Vec2,
    /// |u| change when the tail order is doubled.
    pub tail_change: f64,
}

fn drift_on(quad: &VelocityQuadrature, kernel: &dyn TurningKernel, c: Vec2) -> Result<Vec2> {
    // the ε factor is irrelevant for Q_1 alone
    let op = CollisionOperator::new(quad, kernel, c, 1.0)?;
    let q1m = op.apply_q1_values(quad.m_values());
    let mut u = [0.0; 2];
    for ((&v, &w), &q) in quad.nodes().iter().zip(quad.weights_plain()).zip(&q1m) {
        u[0] += w * v[0] * q;
        u[1] += w * v[1] * q;
    }
    Ok(u)
}

/// u(c) = ∫ v Q_1(M) dv by quadrature. Warns when doubling the tail order
/// moves the result by more than 1e-6.
pub fn drift_u(
    kernel: &dyn TurningKernel,
    c: Vec2,
    quad: &VelocityQuadrature,
) -> Result<DriftEstimate> {
    let u = drift_on(quad, kernel, c)?;
    let refined = drift_on(&quad.with_tail_order(2 * quad.tail_order())?, kernel, c)?;
    let tail_change = norm([refined[0] - u[0], refined[1] - u[1]]);
    if tail_change > 1e-6 {
        log::warn!(
            "drift for kernel `{}` not converged in the tail: change {tail_change:e} on doubling",
            kernel.name()
        );
    }
    Ok(DriftEstimate { u, tail_change })
}

/// Both sides of the coercivity inequality and the constant used.
#[derive(Debug, Clone, Copy)]
pub struct CoercivityCheck {
    /// -∫ Q_ε(f) f / F_ε dv
    pub lhs: f64,
    /// ν ‖f - ρ_f F_ε‖²_{L²(dv/F_ε)}
    pub rhs: f64,
    pub nu: f64,
}

impl CoercivityCheck {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs
    }
}

/// Evaluates the coercivity inequality for `f` with
/// `ν = min_{i,j}(1 + ε^{α-1} Φ_ij) / max_i (F_ε/M)_i`.
pub fn coercivity_gap(
    op: &CollisionOperator<'_>,
    f: &VelocityProfile<'_>,
    feps: &FepsSolution,
) -> Result<CoercivityCheck> {
    let min_rate = op.min_turning_rate();
    if min_rate <= 0.0 {
        return Err(Error::Coercivity(min_rate));
    }
    let mu2 = feps.mu[1];
    let nu = min_rate / mu2;
    let q = op.apply_qeps_values(f.values());
    let wp = op.quad().weights_plain();
    let rho = f.mass();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 0..op.len() {
        let fe = feps.values[i];
        let fv = f.values()[i];
        lhs -= wp[i] * q[i] * fv / fe;
        let d = fv - rho * fe;
        rhs += wp[i] * d * d / fe;
    }
    Ok(CoercivityCheck { lhs, rhs: nu * rhs, nu })
}
