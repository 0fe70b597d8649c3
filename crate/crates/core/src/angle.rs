//! Small helpers for angles on the circle. All angles are radians.

use std::f64::consts::{PI, TAU};

/// Wraps an angle to `[-π, π)`.
#[inline]
pub fn wrap(angle: f64) -> f64 {
    let w = (angle + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Wraps an angle difference to `(-π, π]`.
#[inline]
pub fn wrap_diff(angle: f64) -> f64 {
    let w = wrap(angle);
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Absolute circular distance in `[0, π]`.
#[inline]
pub fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_diff(a - b).abs()
}

#[inline]
pub fn deg(rad: f64) -> f64 {
    rad.to_degrees()
}

#[inline]
pub fn rad(deg: f64) -> f64 {
    deg.to_radians()
}

/// Mean direction and mean resultant length of a set of weighted angles.
pub fn weighted_mean_direction(angles: &[f64], weights: &[f64]) -> (f64, f64) {
    let (mut s, mut c, mut w) = (0.0, 0.0, 0.0);
    for (&a, &g) in angles.iter().zip(weights) {
        s += g * a.sin();
        c += g * a.cos();
        w += g;
    }
    let r = if w > 0.0 { (s * s + c * c).sqrt() / w } else { 0.0 };
    (wrap(s.atan2(c)), r)
}
