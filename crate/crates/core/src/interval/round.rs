//! Directed rounding of the basic binary64 operations.
//!
//! Round-to-nearest results are corrected with error-free transformations
//! (two-sum, fused multiply-add residuals) so that no rounding-mode switch is
//! needed. Where the residual itself could underflow the result is widened by
//! one ulp unconditionally.

/// Below this magnitude fma residuals may be inexact.
const TINY: f64 = 1e-290;

#[inline]
fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

#[inline]
pub fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.is_infinite() {
        return if s > 0.0 && a.is_finite() && b.is_finite() { f64::MAX } else { s };
    }
    if two_sum_err(a, b, s) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.is_infinite() {
        return if s < 0.0 && a.is_finite() && b.is_finite() { f64::MIN } else { s };
    }
    if two_sum_err(a, b, s) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

#[inline]
pub fn sub_down(a: f64, b: f64) -> f64 {
    add_down(a, -b)
}

#[inline]
pub fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

#[inline]
pub fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if p.is_infinite() {
        return if p > 0.0 && a.is_finite() && b.is_finite() { f64::MAX } else { p };
    }
    if a == 0.0 || b == 0.0 {
        return p;
    }
    if p.abs() < TINY {
        return p.next_down();
    }
    if a.mul_add(b, -p) < 0.0 {
        p.next_down()
    } else {
        p
    }
}

#[inline]
pub fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if p.is_infinite() {
        return if p < 0.0 && a.is_finite() && b.is_finite() { f64::MIN } else { p };
    }
    if a == 0.0 || b == 0.0 {
        return p;
    }
    if p.abs() < TINY {
        return p.next_up();
    }
    if a.mul_add(b, -p) > 0.0 {
        p.next_up()
    } else {
        p
    }
}

/// Sign of (a/b - q) where q is the rounded quotient: -1, 0 or 1, or `None`
/// when the residual cannot be trusted.
#[inline]
fn div_residual_sign(a: f64, b: f64, q: f64) -> Option<i8> {
    if a == 0.0 {
        return Some(0);
    }
    if q.abs() < TINY || a.abs() < TINY || q.is_infinite() {
        return None;
    }
    let r = (-q).mul_add(b, a);
    if r == 0.0 {
        Some(0)
    } else if (r > 0.0) == (b > 0.0) {
        Some(1)
    } else {
        Some(-1)
    }
}

#[inline]
pub fn div_down(a: f64, b: f64) -> f64 {
    let q = a / b;
    if q.is_infinite() && q > 0.0 && a.is_finite() {
        return f64::MAX;
    }
    match div_residual_sign(a, b, q) {
        Some(0) | Some(1) => q,
        _ => q.next_down(),
    }
}

#[inline]
pub fn div_up(a: f64, b: f64) -> f64 {
    let q = a / b;
    if q.is_infinite() && q < 0.0 && a.is_finite() {
        return f64::MIN;
    }
    match div_residual_sign(a, b, q) {
        Some(0) | Some(-1) => q,
        _ => q.next_up(),
    }
}

#[inline]
pub fn sqrt_down(a: f64) -> f64 {
    let s = a.sqrt();
    if a == 0.0 || s.is_infinite() {
        return s;
    }
    if a < TINY {
        return s.next_down().max(0.0);
    }
    if (-s).mul_add(s, a) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub fn sqrt_up(a: f64) -> f64 {
    let s = a.sqrt();
    if a == 0.0 || s.is_infinite() {
        return s;
    }
    if a < TINY {
        return s.next_up();
    }
    if (-s).mul_add(s, a) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

/// Widen by `n` ulps downward; used around libm results.
#[inline]
pub fn ulps_down(x: f64, n: u32) -> f64 {
    (0..n).fold(x, |v, _| v.next_down())
}

#[inline]
pub fn ulps_up(x: f64, n: u32) -> f64 {
    (0..n).fold(x, |v, _| v.next_up())
}
