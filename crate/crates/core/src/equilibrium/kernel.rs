use std::fmt;

use super::VelocityQuadrature;
use crate::error::{Error, Result};
use crate::vector::{dot, norm, unit, Vec2};

/// Structural assumption a turning kernel satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionClass {
    /// Constant field, `(1 + |v| + |v'|) Φ` bounded.
    A,
    /// Constant field, Φ bounded and `∫ Φ(v', v, c) M' dv' = 0`.
    B,
    /// Moment-bounded and Lipschitz in c; admissible for variable fields.
    C,
    /// Bounded only.
    Bounded,
}

impl fmt::Display for AssumptionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AssumptionClass::A => "A",
            AssumptionClass::B => "B",
            AssumptionClass::C => "C",
            AssumptionClass::Bounded => "bounded",
        };
        f.write_str(s)
    }
}

/// The bias Φ(v, v', c) of the turning rate for a jump v' → v.
pub trait TurningKernel: Send + Sync {
    fn name(&self) -> &str;

    /// Φ(v, v', c) with `v` the post-jump and `v_prev` the pre-jump velocity.
    fn phi(&self, v: Vec2, v_prev: Vec2, c: Vec2) -> f64;

    /// Φ̄ = sup |Φ| over velocities, for the given field value.
    fn phi_bound(&self, c: Vec2) -> f64;

    /// Φ̄₁ = sup (1 + |v| + |v'|) |Φ|; infinite when unbounded.
    fn phi_moment_bound(&self, c: Vec2) -> f64;

    fn assumption_class(&self) -> AssumptionClass;

    /// Lipschitz constant of Φ in c, when the kernel is admissible for
    /// variable fields. This also bounds `(|v| + |v'|) |∇_c Φ|`.
    fn lipschitz_c(&self) -> Option<f64> {
        None
    }

    /// True when `∫ Φ(v', v, c) M' dv'` vanishes identically, so the loss
    /// rate is exactly 1.
    fn loss_moment_vanishes(&self) -> bool {
        self.assumption_class() == AssumptionClass::B
    }
}

/// Φ ≡ 0: unbiased relaxation.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroKernel;

impl TurningKernel for ZeroKernel {
    fn name(&self) -> &str {
        "zero"
    }

    fn phi(&self, _v: Vec2, _v_prev: Vec2, _c: Vec2) -> f64 {
        0.0
    }

    fn phi_bound(&self, _c: Vec2) -> f64 {
        0.0
    }

    fn phi_moment_bound(&self, _c: Vec2) -> f64 {
        0.0
    }

    fn assumption_class(&self) -> AssumptionClass {
        AssumptionClass::C
    }

    fn lipschitz_c(&self) -> Option<f64> {
        Some(0.0)
    }

    fn loss_moment_vanishes(&self) -> bool {
        true
    }
}

/// Φ = c · v/|v|: post-jump velocities are biased towards c, independently
/// of the incoming velocity.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimpleKernel;

impl TurningKernel for SimpleKernel {
    fn name(&self) -> &str {
        "simple"
    }

    fn phi(&self, v: Vec2, _v_prev: Vec2, c: Vec2) -> f64 {
        dot(c, unit(v))
    }

    fn phi_bound(&self, c: Vec2) -> f64 {
        norm(c)
    }

    fn phi_moment_bound(&self, c: Vec2) -> f64 {
        if norm(c) == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn assumption_class(&self) -> AssumptionClass {
        AssumptionClass::B
    }
}

/// Φ = c · v'/|v'|: the bias depends on the incoming velocity only.
#[derive(Debug, Clone, Copy, Default)]
pub struct IncomingKernel;

impl TurningKernel for IncomingKernel {
    fn name(&self) -> &str {
        "incoming"
    }

    fn phi(&self, _v: Vec2, v_prev: Vec2, c: Vec2) -> f64 {
        dot(c, unit(v_prev))
    }

    fn phi_bound(&self, c: Vec2) -> f64 {
        norm(c)
    }

    fn phi_moment_bound(&self, c: Vec2) -> f64 {
        if norm(c) == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn assumption_class(&self) -> AssumptionClass {
        AssumptionClass::Bounded
    }
}

/// Φ = c · (v/|v| + 3 v'/|v'|) / (4 (1 + |v|)(1 + |v'|)).
///
/// Bounded by |c| together with its first moment weight, Lipschitz in c with
/// constant 1, not symmetric in (v, v') and with a nonvanishing loss moment,
/// so its perturbed equilibrium is not available in closed form.
#[derive(Debug, Clone, Copy, Default)]
pub struct DecayKernel;

impl TurningKernel for DecayKernel {
    fn name(&self) -> &str {
        "decay"
    }

    fn phi(&self, v: Vec2, v_prev: Vec2, c: Vec2) -> f64 {
        let dir = dot(c, unit(v)) + 3.0 * dot(c, unit(v_prev));
        0.25 * dir / ((1.0 + norm(v)) * (1.0 + norm(v_prev)))
    }

    fn phi_bound(&self, c: Vec2) -> f64 {
        norm(c)
    }

    fn phi_moment_bound(&self, c: Vec2) -> f64 {
        norm(c)
    }

    fn assumption_class(&self) -> AssumptionClass {
        AssumptionClass::C
    }

    fn lipschitz_c(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Looks a kernel up by its configuration name.
pub fn kernel_by_name(name: &str) -> Result<Box<dyn TurningKernel>> {
    match name {
        "zero" => Ok(Box::new(ZeroKernel)),
        "simple" => Ok(Box::new(SimpleKernel)),
        "incoming" => Ok(Box::new(IncomingKernel)),
        "decay" => Ok(Box::new(DecayKernel)),
        other => Err(Error::param("kernel.name", format!("unknown kernel `{other}`"))),
    }
}

/// Result of checking a kernel's declared invariants on a node set.
#[derive(Debug, Clone, Copy)]
pub struct KernelCheck {
    pub phi_bound: f64,
    pub phi_moment_bound: f64,
    pub max_sampled: f64,
    /// max over nodes v of |∫ Φ(v', v, c) M' dv'|.
    pub max_loss_moment: f64,
}

impl KernelCheck {
    /// Samples Φ on all node pairs and verifies the class invariants.
    pub fn run(kernel: &dyn TurningKernel, quad: &VelocityQuadrature, c: Vec2) -> Result<Self> {
        let nodes = quad.nodes();
        let wm = quad.weights_m();
        let mut max_sampled: f64 = 0.0;
        let mut max_loss_moment: f64 = 0.0;
        for &v in nodes {
            let mut loss = 0.0;
            for (&vp, &m) in nodes.iter().zip(wm) {
                max_sampled = max_sampled.max(kernel.phi(v, vp, c).abs());
                loss += m * kernel.phi(vp, v, c);
            }
            max_loss_moment = max_loss_moment.max(loss.abs());
        }
        let check = KernelCheck {
            phi_bound: kernel.phi_bound(c),
            phi_moment_bound: kernel.phi_moment_bound(c),
            max_sampled,
            max_loss_moment,
        };
        if max_sampled > check.phi_bound * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::param(
                "kernel",
                format!("sampled |phi| = {max_sampled} exceeds declared bound {}", check.phi_bound),
            ));
        }
        match kernel.assumption_class() {
            AssumptionClass::B if max_loss_moment > 1e-12 * (1.0 + check.phi_bound) => {
                Err(Error::param(
                    "kernel",
                    format!("class B kernel has loss moment {max_loss_moment:e}"),
                ))
            }
            AssumptionClass::A | AssumptionClass::C if !check.phi_moment_bound.is_finite() => {
                Err(Error::param("kernel", "class A/C kernel needs a finite moment bound"))
            }
            _ => Ok(check),
        }
    }
}
