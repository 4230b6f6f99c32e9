//! The maps whose zeros are periodic orbits.
//!
//! Unknowns are the `m` orbit points stacked, `X = (x_0, …, x_{m−1})`, with the
//! step size prepended when it is free. Rows:
//!
//! - closure: `x_0 − g(x_{m−1}) + 2πj·e_θ`
//! - chain:   `x_i − g(x_{i−1})` for `i = 1..m`
//! - phase (free h only, first row): `θ_0 − anchor`

use crate::autodiff::{Jet, VectorFn};
use crate::controllers::ControllerSpec;
use crate::dynamics::{step_with_h, MdpConfig};
use crate::error::GuardError;
use crate::interval::{Interval, IntervalMatrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct PeriodicMap<'a> {
    pub cfg: &'a MdpConfig,
    pub ctrl: &'a ControllerSpec,
    pub m: usize,
    pub j: i32,
    /// `Some(anchor)` frees the step size and pins θ_0 to `anchor`.
    pub anchor: Option<f64>,
}

/// Fixed step size map.
pub fn build_g1<'a>(cfg: &'a MdpConfig, ctrl: &'a ControllerSpec, m: usize, j: i32) -> PeriodicMap<'a> {
    PeriodicMap { cfg, ctrl, m, j, anchor: None }
}

/// Free step size map with the phase condition θ_0 = `anchor`.
pub fn build_g2<'a>(cfg: &'a MdpConfig, ctrl: &'a ControllerSpec, m: usize, j: i32, anchor: f64) -> PeriodicMap<'a> {
    PeriodicMap { cfg, ctrl, m, j, anchor: Some(anchor) }
}

impl PeriodicMap<'_> {
    pub fn p(&self) -> usize {
        self.cfg.system.dim()
    }

    pub fn variable_h(&self) -> bool {
        self.anchor.is_some()
    }

    /// Offset of `x_0` in the unknown vector.
    fn off(&self) -> usize {
        usize::from(self.variable_h())
    }

    pub fn dim(&self) -> usize {
        self.p() * self.m + self.off()
    }

    /// Stack orbit points (and `h` when free) into an unknown vector.
    pub fn pack(&self, h: f64, states: &[Vec<f64>]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        if self.variable_h() {
            x.push(h);
        }
        for s in states.iter().take(self.m) {
            x.extend_from_slice(s);
        }
        x
    }

    /// Step size and orbit points of an unknown vector.
    pub fn unpack<S: Clone>(&self, x: &[S]) -> (Option<S>, Vec<Vec<S>>) {
        let off = self.off();
        let h = self.variable_h().then(|| x[0].clone());
        (h, x[off..].chunks(self.p()).map(<[S]>::to_vec).collect())
    }

    fn residuals<S: Scalar>(&self, x: &[S], next: &[Vec<S>]) -> Vec<S> {
        let (p, off, m) = (self.p(), self.off(), self.m);
        let ai = self.cfg.system.angle_index();
        let mut out = Vec::with_capacity(self.dim());
        if let Some(anchor) = self.anchor {
            out.push(x[off + ai].clone() - S::from_f64(anchor));
        }
        for i in 0..m {
            let prev = if i == 0 { m - 1 } else { i - 1 };
            for k in 0..p {
                let mut r = x[off + i * p + k].clone() - next[prev][k].clone();
                if i == 0 && k == ai && self.j != 0 {
                    r = r + S::two_pi() * S::from_f64(self.j as f64);
                }
                out.push(r);
            }
        }
        out
    }

    /// Value and dense Jacobian, assembled from the per-step Jacobians of `g`.
    ///
    /// Each step is differentiated with a small jet (`p` or `p + 1`
    /// variables), which keeps long orbits cheap.
    pub fn value_and_jacobian<S: Scalar>(&self, x: &[S]) -> Result<(Vec<S>, Vec<Vec<S>>), GuardError> {
        let (p, off, m, n) = (self.p(), self.off(), self.m, self.dim());
        let nv = p + off;
        let h_jet =
            if self.variable_h() { Jet::variable(x[0].clone(), p, nv) } else { Jet::constant(S::from_f64(self.cfg.h)) };
        let mut next_vals = Vec::with_capacity(m);
        let mut step_jac = Vec::with_capacity(m);
        for i in 0..m {
            let s: Vec<Jet<S>> = (0..p).map(|k| Jet::variable(x[off + i * p + k].clone(), k, nv)).collect();
            let tr = step_with_h(self.cfg, self.ctrl, &s, &h_jet)?;
            let rows: Vec<Vec<S>> = tr.next.iter().map(|jt| (0..nv).map(|v| jt.partial(v)).collect()).collect();
            next_vals.push(tr.next.into_iter().map(|jt| jt.value).collect::<Vec<S>>());
            step_jac.push(rows);
        }
        let values = self.residuals(x, &next_vals);

        let zero = S::from_f64(0.0);
        let mut jac = vec![vec![zero; n]; n];
        if self.variable_h() {
            jac[0][off + self.cfg.system.angle_index()] = S::from_f64(1.0);
        }
        for i in 0..m {
            let prev = if i == 0 { m - 1 } else { i - 1 };
            for k in 0..p {
                let row = &mut jac[off + i * p + k];
                row[off + i * p + k] = row[off + i * p + k].clone() + S::from_f64(1.0);
                for (c, d) in step_jac[prev][k][..p].iter().enumerate() {
                    let col = off + prev * p + c;
                    row[col] = row[col].clone() - d.clone();
                }
                if self.variable_h() {
                    row[0] = row[0].clone() - step_jac[prev][k][p].clone();
                }
            }
        }
        Ok((values, jac))
    }

    /// Enclosure of the Jacobian over the box `x`.
    pub fn jacobian_box(&self, x: &[Interval]) -> Result<IntervalMatrix, GuardError> {
        self.value_and_jacobian(x).map(|(_, j)| IntervalMatrix::from_rows(j))
    }
}

impl VectorFn for PeriodicMap<'_> {
    fn input_dim(&self) -> usize {
        self.dim()
    }

    fn output_dim(&self) -> usize {
        self.dim()
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, GuardError> {
        let (h, states) = self.unpack(x);
        let h = h.unwrap_or_else(|| S::from_f64(self.cfg.h));
        let next = states
            .iter()
            .map(|s| step_with_h(self.cfg, self.ctrl, s, &h).map(|t| t.next))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.residuals(x, &next))
    }
}
