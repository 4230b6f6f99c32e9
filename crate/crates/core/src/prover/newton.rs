use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ZeroProblem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Stop once ‖G(X)‖∞ is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest final residual still returned as a success.
    pub accept: f64,
    /// Step halvings tried before giving up on a direction.
    pub max_halvings: u32,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 50, accept: 1e-9, max_halvings: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonResult {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| if x.is_nan() { f64::INFINITY } else { acc.max(x.abs()) })
}

pub(crate) fn to_dmatrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, c, |i, j| rows[i][j])
}

/// One Newton direction `J⁻¹ G` at `x`.
fn direction<F: ZeroProblem + ?Sized>(g: &F, x: &[f64]) -> Result<(Vec<f64>, DVector<f64>)> {
    let (val, jac) = g.value_jacobian_f64(x).map_err(Error::SmoothnessUnverifiable)?;
    let j = to_dmatrix(&jac);
    if j.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularJacobian);
    }
    let dx = j.lu().solve(&DVector::from_column_slice(&val)).ok_or(Error::SingularJacobian)?;
    if dx.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularJacobian);
    }
    Ok((val, dx))
}

fn residual<F: ZeroProblem + ?Sized>(g: &F, x: &[f64]) -> f64 {
    g.eval::<f64>(x).map_or(f64::INFINITY, |v| sup_norm(&v))
}

/// Damped Newton iteration: full steps, halved until the residual drops.
///
/// Returns the best iterate seen. Fails with `SingularJacobian` when a
/// direction cannot be computed at the start point, and `NoConvergence`
/// when the best residual stays above `cfg.accept`.
pub fn newton_refine<F: ZeroProblem + ?Sized>(g: &F, x0: &[f64], cfg: &NewtonConfig) -> Result<NewtonResult> {
    let mut x = x0.to_vec();
    let mut res = residual(g, &x);
    let mut iterations = 0;
    while res > cfg.tol && iterations < cfg.max_iter {
        let dx = match direction(g, &x) {
            Ok((_, dx)) => dx,
            Err(e) if iterations == 0 => return Err(e),
            Err(_) => break,
        };
        iterations += 1;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a - lambda * d).collect();
            let r = residual(g, &trial);
            if r < res {
                x = trial;
                res = r;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res <= cfg.accept {
        Ok(NewtonResult { x, residual: res, iterations })
    } else {
        Err(Error::NoConvergence { residual: res })
    }
}
