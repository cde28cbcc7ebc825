use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::collision::CollisionOperator;

const RANK_CUTOFF: f64 = 1e-13;
const MAX_RANK: usize = 32;

/// Fully pivoted cross approximation `K ≈ Σ_l a_l b_lᵀ`, stopped once the
/// largest remaining entry is below `RANK_CUTOFF` times the largest entry.
/// Exact after r steps for a rank-r matrix. Returns the factors and the
/// largest remaining entry when [`MAX_RANK`] was hit first (zero otherwise).
fn cross_factors(k: &[f64], n: usize) -> (Vec<(Vec<f64>, Vec<f64>)>, f64) {
    let mut residual = k.to_vec();
    let top = residual.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut factors = Vec::new();
    if top == 0.0 {
        return (factors, 0.0);
    }
    loop {
        let (pivot, value) = residual
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (idx, x)| if x.abs() > best.1.abs() { (idx, *x) } else { best });
        if value.abs() <= RANK_CUTOFF * top {
            return (factors, 0.0);
        }
        if factors.len() == MAX_RANK {
            return (factors, value.abs());
        }
        let (pi, pj) = (pivot / n, pivot % n);
        let col: Vec<f64> = (0..n).map(|i| residual[i * n + pj] / value).collect();
        let row: Vec<f64> = residual[pi * n..(pi + 1) * n].to_vec();
        for i in 0..n {
            for j in 0..n {
                residual[i * n + j] -= col[i] * row[j];
            }
        }
        factors.push((col, row));
    }
}

/// The implicit collision step `diag(D) f - ε^{-α} M ρ_f - ε^{-1} M ∘ K̃ W f`
/// written as a diagonal minus a rank-(r+1) term, with K̃ a cross approximation
/// of the kernel matrix. The loss rates are recomputed from K̃ so that the
/// discrete operator stays exactly mass-free.
#[derive(Debug, Clone)]
pub(crate) struct LowRankCollision {
    n: usize,
    /// columns of the left factor, each of length n
    left: Vec<Vec<f64>>,
    /// rows of the right factor, each of length n
    right: Vec<Vec<f64>>,
    /// ε^{-α} + ε^{-1} L̃_i
    collision_diag: Vec<f64>,
}

impl LowRankCollision {
    pub(crate) fn new(op: &CollisionOperator<'_>) -> Self {
        let quad = op.quad();
        let n = op.len();
        let alpha = quad.spec().alpha();
        let eps = op.eps();
        let inv_ea = eps.powf(-alpha);
        let inv_e = 1.0 / eps;
        let m = quad.m_values();
        let w = quad.weights_plain();
        let wm = quad.weights_m();

        let mut left = vec![m.iter().map(|x| inv_ea * x).collect::<Vec<f64>>()];
        let mut right = vec![w.to_vec()];

        let (factors, remainder) = cross_factors(op.kernel_matrix(), n);
        if remainder > 0.0 {
            log::warn!("kernel truncated at rank {MAX_RANK}, remaining entry {remainder:e}");
        }
        let mut kernel = vec![0.0; n * n];
        for (col, row) in &factors {
            left.push((0..n).map(|i| inv_e * m[i] * col[i]).collect());
            right.push((0..n).map(|j| row[j] * w[j]).collect());
            for i in 0..n {
                for j in 0..n {
                    kernel[i * n + j] += col[i] * row[j];
                }
            }
        }
        let loss: Vec<f64> =
            (0..n).map(|j| (0..n).map(|i| wm[i] * kernel[i * n + j]).sum()).collect();
        let collision_diag = loss.iter().map(|l| inv_ea + inv_e * l).collect();
        LowRankCollision { n, left, right, collision_diag }
    }

    pub(crate) fn rank(&self) -> usize {
        self.left.len() - 1
    }

    pub(crate) fn collision_diag(&self) -> &[f64] {
        &self.collision_diag
    }

    /// Solves `(diag(d) - left · right) f = rhs` in place.
    pub(crate) fn solve(&self, d: &[Complex64], rhs: &mut [Complex64]) {
        let n = self.n;
        let r = self.left.len();
        for (x, di) in rhs.iter_mut().zip(d) {
            *x /= di;
        }
        let mut g = vec![Complex64::new(0.0, 0.0); n * r];
        for (c, col) in self.left.iter().enumerate() {
            for i in 0..n {
                g[c * n + i] = col[i] / d[i];
            }
        }
        let mut s = DMatrix::<Complex64>::identity(r, r);
        let mut z = DVector::<Complex64>::zeros(r);
        for (a, row) in self.right.iter().enumerate() {
            z[a] = row.iter().zip(rhs.iter()).map(|(q, y)| y * q).sum();
            for c in 0..r {
                let qg: Complex64 = row.iter().zip(&g[c * n..(c + 1) * n]).map(|(q, x)| x * q).sum();
                s[(a, c)] -= qg;
            }
        }
        let coeff = s.lu().solve(&z).expect("Woodbury capacitance matrix is regular");
        for c in 0..r {
            let sc = coeff[c];
            for i in 0..n {
                rhs[i] += g[c * n + i] * sc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{DecayKernel, EquilibriumSpec, SimpleKernel, TurningKernel, VelocityQuadrature};

    #[test]
    fn cross_factors_recover_low_rank_matrices() {
        let n = 7;
        let k: Vec<f64> = (0..n * n)
            .map(|idx| {
                let (i, j) = ((idx / n) as f64, (idx % n) as f64);
                (i + 1.0).sin() * j.cos() - 2.0 * i * (j * 0.3).exp()
            })
            .collect();
        let (factors, rest) = cross_factors(&k, n);
        assert_eq!(factors.len(), 2);
        assert_eq!(rest, 0.0);
        for idx in 0..n * n {
            let approx: f64 = factors.iter().map(|(a, b)| a[idx / n] * b[idx % n]).sum();
            assert!((approx - k[idx]).abs() < 1e-12);
        }
        assert!(cross_factors(&vec![0.0; 9], 3).0.is_empty());
    }

    #[test]
    fn solve_inverts_the_implicit_collision_step() {
        let spec = EquilibriumSpec::flat(1, 1.5).unwrap();
        let quad = VelocityQuadrature::build(&spec, 8, 16).unwrap();
        let kernels: [&dyn TurningKernel; 2] = [&SimpleKernel, &DecayKernel];
        for kernel in kernels {
            let eps = 0.2;
            let op = CollisionOperator::new(&quad, kernel, [0.8, 0.0], eps).unwrap();
            let lr = LowRankCollision::new(&op);
            let n = quad.len();
            let d: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(50.0 + lr.collision_diag()[i], 0.3 * quad.nodes()[i][0]))
                .collect();
            let rhs: Vec<Complex64> =
                (0..n).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
            let mut f = rhs.clone();
            lr.solve(&d, &mut f);
            let re: Vec<f64> = f.iter().map(|z| z.re).collect();
            let im: Vec<f64> = f.iter().map(|z| z.im).collect();
            let (q0r, q0i) = (op.apply_q0_values(&re), op.apply_q0_values(&im));
            let (q1r, q1i) = (op.apply_q1_values(&re), op.apply_q1_values(&im));
            let inv_ea = eps.powf(-1.5);
            for i in 0..n {
                // d_i f_i - ε^{-α} f_i - ε^{-1} L f_i - ε^{-α} Q0 - ε^{-1} Q1 = rhs
                let q = Complex64::new(q0r[i], q0i[i]) * inv_ea + Complex64::new(q1r[i], q1i[i]) / eps;
                let lhs = (d[i] - lr.collision_diag()[i]) * f[i] - q;
                assert!((lhs - rhs[i]).norm() < 1e-10, "{} node {i}: {lhs} vs {}", kernel.name(), rhs[i]);
            }
        }
    }
}
