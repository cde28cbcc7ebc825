//! Fat-tailed equilibrium, velocity quadrature, turning kernels and the
//! equilibrium of the full collision operator.

mod feps;
mod kernel;
mod quadrature;

pub use feps::{
    feps_derivative_bounds, solve_feps, solve_feps_with, DerivativeBounds, FepsSolution,
    DEFAULT_MAX_ITERATIONS,
};
pub use kernel::{
    kernel_by_name, AssumptionClass, DecayKernel, IncomingKernel, KernelCheck, SimpleKernel,
    TurningKernel, ZeroKernel,
};
pub use quadrature::{integrate_against_m, moment, moment_vec, VelocityQuadrature};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{unit_ball_volume, unit_sphere_area};
use crate::vector::{norm, Vec2};

/// Shape of the equilibrium inside the unit ball, where only positivity,
/// symmetry and normalization are prescribed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InnerProfile {
    /// M = γ on |v| < 1.
    Flat,
}

impl FromStr for InnerProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(InnerProfile::Flat),
            other => Err(Error::param("inner_profile", format!("unknown profile `{other}`"))),
        }
    }
}

impl fmt::Display for InnerProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InnerProfile::Flat => f.write_str("flat"),
        }
    }
}

fn check_dim_alpha(dim: usize, alpha: f64) -> Result<()> {
    if !(dim == 1 || dim == 2) {
        return Err(Error::param("dim", format!("must be 1 or 2, got {dim}")));
    }
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::param("alpha", format!("must lie in (1, 2), got {alpha}")));
    }
    Ok(())
}

/// Tail amplitude γ making the equilibrium a probability density.
///
/// For the flat profile this is `1 / (|B_1| + |S^{N-1}| / α)`, i.e.
/// `α / (2(α + 1))` in one dimension and `α / (π(α + 2))` in two.
pub fn normalization_gamma(dim: usize, alpha: f64, profile: InnerProfile) -> Result<f64> {
    check_dim_alpha(dim, alpha)?;
    match profile {
        InnerProfile::Flat => Ok(1.0 / (unit_ball_volume(dim) + unit_sphere_area(dim) / alpha)),
    }
}

/// The equilibrium M: rotationally symmetric, unit mass, and exactly
/// `γ |v|^{-N-α}` outside the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSpec {
    dim: usize,
    alpha: f64,
    gamma: f64,
    profile: InnerProfile,
}

impl EquilibriumSpec {
    pub fn new(dim: usize, alpha: f64, profile: InnerProfile) -> Result<Self> {
        let gamma = normalization_gamma(dim, alpha, profile)?;
        Ok(EquilibriumSpec { dim, alpha, gamma, profile })
    }

    pub fn flat(dim: usize, alpha: f64) -> Result<Self> {
        Self::new(dim, alpha, InnerProfile::Flat)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn profile(&self) -> InnerProfile {
        self.profile
    }

    /// Same spec with a different tail amplitude; the result is no longer
    /// normalized and exists for scaling checks.
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// M(v).
    pub fn eval(&self, v: Vec2) -> f64 {
        self.eval_radial(norm(v))
    }

    /// M as a function of |v|.
    pub fn eval_radial(&self, r: f64) -> f64 {
        if r < 1.0 {
            match self.profile {
                InnerProfile::Flat => self.gamma,
            }
        } else {
            self.gamma * r.powf(-(self.dim as f64) - self.alpha)
        }
    }

    /// Probability of |v| < 1.
    pub fn core_mass(&self) -> f64 {
        match self.profile {
            InnerProfile::Flat => self.gamma * unit_ball_volume(self.dim),
        }
    }

    /// ∫|v| M dv in closed form.
    pub fn first_moment(&self) -> f64 {
        let core = match self.profile {
            InnerProfile::Flat => {
                self.gamma * unit_sphere_area(self.dim) / (self.dim as f64 + 1.0)
            }
        };
        core + self.gamma * unit_sphere_area(self.dim) / (self.alpha - 1.0)
    }

    /// Drift susceptibility B = (1/N) ∫|v| M dv in closed form.
    pub fn drift_susceptibility(&self) -> f64 {
        self.first_moment() / self.dim as f64
    }

    /// P(|v| ≤ r) under M.
    pub fn radial_cdf(&self, r: f64) -> f64 {
        let area = unit_sphere_area(self.dim);
        let d = self.dim as f64;
        if r <= 0.0 {
            0.0
        } else if r < 1.0 {
            match self.profile {
                InnerProfile::Flat => self.gamma * area * r.powf(d) / d,
            }
        } else {
            1.0 - self.gamma * area * r.powf(-self.alpha) / self.alpha
        }
    }

    /// Inverse of [`radial_cdf`](Self::radial_cdf) for u in [0, 1).
    pub fn radial_quantile(&self, u: f64) -> f64 {
        let area = unit_sphere_area(self.dim);
        let d = self.dim as f64;
        let core = self.core_mass();
        if u < core {
            match self.profile {
                InnerProfile::Flat => (u * d / (self.gamma * area)).powf(1.0 / d),
            }
        } else {
            let tail = (1.0 - u).max(f64::MIN_POSITIVE);
            (self.gamma * area / (self.alpha * tail)).powf(1.0 / self.alpha)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{adaptive, Tolerance};
    use std::f64::consts::PI;

    #[test]
    fn gamma_closed_forms() {
        let g1 = normalization_gamma(1, 1.5, InnerProfile::Flat).unwrap();
        assert!((g1 - 0.3).abs() < 1e-15);
        let g2 = normalization_gamma(2, 1.5, InnerProfile::Flat).unwrap();
        assert!((g2 - 3.0 / (7.0 * PI)).abs() < 1e-15);
        assert!((g2 - 0.136_418_5).abs() < 1e-7);
    }

    #[test]
    fn gamma_confirmed_by_quadrature() {
        // 1-D: ∫ min(1, |v|^{-1-α}) dv
        let alpha = 1.5;
        let tail = adaptive(|t: f64| t.powf(alpha - 1.0), 0.0, 1.0, Tolerance::default()).unwrap();
        let mass = 2.0 * (1.0 + tail.value);
        assert!((1.0 / mass - 0.3).abs() < 1e-12);
        // 2-D, radially: 2π ∫ r min(1, r^{-2-α}) dr
        let tail2 = adaptive(|t: f64| t.powf(alpha - 1.0), 0.0, 1.0, Tolerance::default()).unwrap();
        let mass2 = 2.0 * PI * (0.5 + tail2.value);
        assert!((1.0 / mass2 - 3.0 / (7.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(normalization_gamma(1, 1.0, InnerProfile::Flat).is_err());
        assert!(normalization_gamma(1, 2.0, InnerProfile::Flat).is_err());
        assert!(normalization_gamma(3, 1.5, InnerProfile::Flat).is_err());
        assert!("gaussian".parse::<InnerProfile>().is_err());
        assert_eq!("flat".parse::<InnerProfile>().unwrap(), InnerProfile::Flat);
    }

    #[test]
    fn eval_values() {
        let spec = EquilibriumSpec::flat(1, 1.5).unwrap();
        assert!((spec.eval([0.0, 0.0]) - 0.3).abs() < 1e-15);
        assert!((spec.eval([2.0, 0.0]) - 0.053_033_0).abs() < 1e-7);
        assert!((spec.eval([2.0, 0.0]) - 0.3 * 2f64.powf(-2.5)).abs() < 1e-15);
        for &v in &[0.2, 0.99, 1.0, 3.7, 1e4] {
            assert_eq!(spec.eval([v, 0.0]), spec.eval([-v, 0.0]));
            assert!(spec.eval([v, 0.0]) > 0.0);
        }
    }

    #[test]
    fn first_moment_and_b() {
        let spec = EquilibriumSpec::flat(1, 1.5).unwrap();
        assert!((spec.first_moment() - 1.5).abs() < 1e-14);
        assert!((spec.drift_susceptibility() - 1.5).abs() < 1e-14);
        let spec = EquilibriumSpec::flat(1, 1.25).unwrap();
        assert!((spec.drift_susceptibility() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for dim in [1, 2] {
            let spec = EquilibriumSpec::flat(dim, 1.4).unwrap();
            for &u in &[0.0, 0.1, 0.5, 0.59, 0.8, 0.999] {
                let r = spec.radial_quantile(u);
                assert!((spec.radial_cdf(r) - u).abs() < 1e-12, "dim {dim} u {u}");
            }
        }
    }
}
