//! Rigorous bounds for the Newton-Kantorovich type existence test.
//!
//! With `A ≈ DG(x̄)⁻¹`, if
//!   ‖A G(x̄)‖ ≤ Y,  ‖I − A DG(x̄)‖ ≤ Z0,  sup_{x ∈ B(x̄, r*)} ‖A (DG(x) − DG(x̄))‖ ≤ Z2,
//! Z0 + Z2 < 1 and Y / (1 − Z0 − Z2) ≤ r*, then G has a unique zero in the
//! ball of radius r around x̄. `A` is an ordinary float inverse; all the
//! rigor is in the interval bounds.

use serde::{Deserialize, Serialize};

use super::newton::to_dmatrix;
use super::ZeroProblem;
use crate::error::{Error, Result};
use crate::interval::round::{add_up, div_up, mul_up, sub_down, sub_up};
use crate::interval::{Interval, IntervalMatrix, IntervalVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionBounds {
    pub y: f64,
    pub z0: f64,
    pub z2: f64,
    pub r_star: f64,
    /// Proven radius; only meaningful when `ok`.
    pub r: f64,
    pub ok: bool,
}

/// Check the contraction conditions for given bounds with directed rounding.
pub fn contraction_holds(y: f64, z0: f64, z2: f64, r_star: f64, r: f64) -> bool {
    let z = add_up(z0, z2);
    if !(z < 1.0) || !(r > 0.0) || !(r <= r_star) {
        return false;
    }
    // Y / (1 − Z) ≤ r, via Y + r(Z − 1) < 0 rounded up.
    add_up(y, mul_up(r, sub_up(z, 1.0))) < 0.0
}

/// Smallest float radius passing [`contraction_holds`], starting from the
/// next float above Y / (1 − Z0 − Z2).
fn proven_radius(y: f64, z0: f64, z2: f64, r_star: f64) -> Option<f64> {
    let z = add_up(z0, z2);
    if !(z < 1.0) {
        return None;
    }
    let mut r = div_up(y, sub_down(1.0, z)).next_up().max(f64::MIN_POSITIVE);
    for _ in 0..16 {
        if r > r_star {
            return None;
        }
        if contraction_holds(y, z0, z2, r_star, r) {
            return Some(r);
        }
        r = (r * (1.0 + 1e-12)).next_up();
    }
    None
}

fn thin_matrix(m: &nalgebra::DMatrix<f64>) -> IntervalMatrix {
    IntervalMatrix::from_fn(m.nrows(), m.ncols(), |i, j| Interval::point(m[(i, j)]))
}

/// Float approximate inverse of DG(x̄).
pub(crate) fn approximate_inverse<F: ZeroProblem + ?Sized>(g: &F, x_bar: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
    let (_, jac) = g.value_jacobian_f64(x_bar).map_err(Error::SmoothnessUnverifiable)?;
    let a = to_dmatrix(&jac).lu().try_inverse().ok_or(Error::SingularJacobian)?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularJacobian);
    }
    Ok(a)
}

/// Y, Z0, Z2 for one `r_star`; `ok` tells whether they prove a zero.
pub fn contraction_bounds<F: ZeroProblem + ?Sized>(g: &F, x_bar: &[f64], r_star: f64) -> Result<ContractionBounds> {
    if !(r_star > 0.0 && r_star.is_finite()) {
        return Err(Error::InvalidConfig("r_star must be positive".into()));
    }
    let a = thin_matrix(&approximate_inverse(g, x_bar)?);
    let n = x_bar.len();
    let thin: Vec<Interval> = x_bar.iter().copied().map(Interval::point).collect();
    let (gx, dgx) = g.value_jacobian_box(&thin).map_err(Error::SmoothnessUnverifiable)?;
    let y = a.mul_vec(&IntervalVector(gx)).norm_inf();
    let z0 = IntervalMatrix::identity(n).sub(&a.matmul(&dgx)).norm_inf();

    let ball = IntervalVector::ball(x_bar, r_star);
    let (_, dg_ball) = g.value_jacobian_box(&ball.0).map_err(Error::SmoothnessUnverifiable)?;
    let z2 = a.matmul(&dg_ball.sub(&dgx)).norm_inf();

    let finite = y.is_finite() && z0.is_finite() && z2.is_finite();
    let r = if finite { proven_radius(y, z0, z2, r_star) } else { None };
    Ok(ContractionBounds { y, z0, z2, r_star, r: r.unwrap_or(f64::INFINITY), ok: r.is_some() })
}

/// Like [`contraction_bounds`], but a failed test is an error.
pub fn verify_contraction<F: ZeroProblem + ?Sized>(g: &F, x_bar: &[f64], r_star: f64) -> Result<ContractionBounds> {
    let b = contraction_bounds(g, x_bar, r_star)?;
    if b.ok {
        Ok(b)
    } else {
        Err(Error::ContractionFailed { y: b.y, z0: b.z0, z2: b.z2, r_star })
    }
}

/// Try each `r_star` in turn (largest first); returns the first success or
/// the last failure.
pub fn verify_with_ladder<F: ZeroProblem + ?Sized>(g: &F, x_bar: &[f64], ladder: &[f64]) -> Result<ContractionBounds> {
    let mut last = Error::InvalidConfig("empty r_star ladder".into());
    for &r_star in ladder {
        match verify_contraction(g, x_bar, r_star) {
            Ok(b) => return Ok(b),
            // A smaller ball may avoid a breakpoint, so guard failures retry too.
            Err(e @ (Error::ContractionFailed { .. } | Error::SmoothnessUnverifiable(_))) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}
