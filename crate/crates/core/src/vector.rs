//! Two-component vectors shared by the one- and two-dimensional code paths.
//!
//! In dimension one only the first component is used and the second stays 0,
//! so dot products and norms need no special casing.

pub type Vec2 = [f64; 2];

pub const ZERO: Vec2 = [0.0, 0.0];

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn scale(a: Vec2, s: f64) -> Vec2 {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

/// Unit vector in the direction of `a`; the zero vector maps to zero.
#[inline]
pub fn unit(a: Vec2) -> Vec2 {
    let r = norm(a);
    if r > 0.0 {
        scale(a, 1.0 / r)
    } else {
        ZERO
    }
}

/// Builds a vector from a slice of one or two components.
pub fn from_slice(xs: &[f64]) -> Vec2 {
    match xs {
        [] => ZERO,
        [a] => [*a, 0.0],
        [a, b, ..] => [*a, *b],
    }
}
