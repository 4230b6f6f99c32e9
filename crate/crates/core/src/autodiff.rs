//! Forward-mode automatic differentiation over any [`Scalar`] kind.
//!
//! A [`Jet`] carries a value and its partial derivatives with respect to the
//! independent variables. Running a generic function on jets built over
//! intervals gives a rigorous enclosure of the Jacobian over a whole box.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::GuardError;
use crate::interval::{ClipBranch, Interval, IntervalMatrix};
use crate::scalar::Scalar;

/// Value plus gradient. An empty `partials` vector stands for a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet<S> {
    pub value: S,
    pub partials: Vec<S>,
}

impl<S: Scalar> Jet<S> {
    pub fn constant(value: S) -> Self {
        Self { value, partials: Vec::new() }
    }

    /// The `index`-th of `n` independent variables.
    pub fn variable(value: S, index: usize, n: usize) -> Self {
        let partials = (0..n).map(|k| S::from_f64(if k == index { 1.0 } else { 0.0 })).collect();
        Self { value, partials }
    }

    pub fn partial(&self, k: usize) -> S {
        self.partials.get(k).cloned().unwrap_or_else(|| S::from_f64(0.0))
    }

    fn map_partials(self, f: impl Fn(S) -> S) -> Vec<S> {
        self.partials.into_iter().map(f).collect()
    }

    fn scale(self, factor: S) -> Vec<S> {
        self.map_partials(|d| d * factor.clone())
    }
}

fn zip_partials<S: Scalar>(a: Vec<S>, b: Vec<S>, f: impl Fn(S, S) -> S) -> Vec<S> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Vec::new(),
        (false, true) => a.into_iter().map(|x| f(x, S::from_f64(0.0))).collect(),
        (true, false) => b.into_iter().map(|y| f(S::from_f64(0.0), y)).collect(),
        (false, false) => {
            debug_assert_eq!(a.len(), b.len());
            a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect()
        }
    }
}

impl<S: Scalar> Add for Jet<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Jet { value: self.value + rhs.value, partials: zip_partials(self.partials, rhs.partials, |a, b| a + b) }
    }
}

impl<S: Scalar> Sub for Jet<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Jet { value: self.value - rhs.value, partials: zip_partials(self.partials, rhs.partials, |a, b| a - b) }
    }
}

// The product rule adds inside `mul`.
#[allow(clippy::suspicious_arithmetic_impl)]
impl<S: Scalar> Mul for Jet<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let value = self.value.clone() * rhs.value.clone();
        let (u, v) = (self.value, rhs.value);
        let partials = match (self.partials.is_empty(), rhs.partials.is_empty()) {
            (true, true) => Vec::new(),
            (false, true) => self.partials.into_iter().map(|d| d * v.clone()).collect(),
            (true, false) => rhs.partials.into_iter().map(|d| u.clone() * d).collect(),
            (false, false) => {
                self.partials.into_iter().zip(rhs.partials).map(|(da, db)| da * v.clone() + u.clone() * db).collect()
            }
        };
        Jet { value, partials }
    }
}

impl<S: Scalar> Neg for Jet<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Jet { value: -self.value, partials: self.partials.into_iter().map(|d| -d).collect() }
    }
}

impl<S: Scalar> Scalar for Jet<S> {
    fn from_f64(x: f64) -> Self {
        Jet::constant(S::from_f64(x))
    }

    fn two_pi() -> Self {
        Jet::constant(S::two_pi())
    }

    fn approx(&self) -> f64 {
        self.value.approx()
    }

    fn try_div(self, rhs: Self) -> Result<Self, GuardError> {
        let q = self.value.clone().try_div(rhs.value.clone())?;
        // (a/b)' = (a' - q b') / b
        let partials = if rhs.partials.is_empty() {
            let b = rhs.value;
            self.partials.into_iter().map(|d| d.try_div(b.clone())).collect::<Result<_, _>>()?
        } else {
            let qq = q.clone();
            let numer = zip_partials(self.partials, rhs.partials, move |da, db| da - qq.clone() * db);
            numer.into_iter().map(|d| d.try_div(rhs.value.clone())).collect::<Result<_, _>>()?
        };
        Ok(Jet { value: q, partials })
    }

    fn sin(self) -> Self {
        let d = self.value.clone().cos();
        Jet { value: self.value.clone().sin(), partials: self.scale(d) }
    }

    fn cos(self) -> Self {
        let d = -self.value.clone().sin();
        Jet { value: self.value.clone().cos(), partials: self.scale(d) }
    }

    fn tanh(self) -> Self {
        let t = self.value.clone().tanh();
        let d = S::from_f64(1.0) - t.clone().sqr();
        Jet { value: t, partials: self.scale(d) }
    }

    fn sqr(self) -> Self {
        let d = S::from_f64(2.0) * self.value.clone();
        Jet { value: self.value.clone().sqr(), partials: self.scale(d) }
    }

    fn try_sqrt(self) -> Result<Self, GuardError> {
        let s = self.value.clone().try_sqrt()?;
        let two_s = S::from_f64(2.0) * s.clone();
        let partials = self.partials.into_iter().map(|d| d.try_div(two_s.clone())).collect::<Result<_, _>>()?;
        Ok(Jet { value: s, partials })
    }

    fn try_acos(self) -> Result<Self, GuardError> {
        let value = self.value.clone().try_acos()?;
        if self.partials.is_empty() {
            return Ok(Jet::constant(value));
        }
        // d/dx acos x = -1 / sqrt(1 - x^2); undefined at ±1.
        let root = (S::from_f64(1.0) - self.value.clone().sqr()).try_sqrt()?;
        let partials = self.partials.into_iter().map(|d| (-d).try_div(root.clone())).collect::<Result<_, _>>()?;
        Ok(Jet { value, partials })
    }

    fn clip_branch(&self, lo: f64, hi: f64) -> Result<ClipBranch, GuardError> {
        self.value.clip_branch(lo, hi)
    }

    fn clip(self, lo: f64, hi: f64) -> Result<Self, GuardError> {
        // Saturated pieces are constant, so their derivative vanishes.
        Ok(match self.clip_branch(lo, hi)? {
            ClipBranch::Lower => Jet::constant(S::from_f64(lo)),
            ClipBranch::Upper => Jet::constant(S::from_f64(hi)),
            ClipBranch::Inside => self,
        })
    }
}

/// A vector-valued function that can be evaluated over any scalar kind.
pub trait VectorFn: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, GuardError>;
}

/// Value and Jacobian rows of `f` at `x`.
pub fn jacobian<F: VectorFn + ?Sized, S: Scalar>(f: &F, x: &[S]) -> Result<(Vec<S>, Vec<Vec<S>>), GuardError> {
    let n = x.len();
    let seeds: Vec<Jet<S>> = x.iter().enumerate().map(|(i, xi)| Jet::variable(xi.clone(), i, n)).collect();
    let out = f.eval(&seeds)?;
    let mut values = Vec::with_capacity(out.len());
    let mut rows = Vec::with_capacity(out.len());
    for jet in out {
        rows.push((0..n).map(|k| jet.partial(k)).collect());
        values.push(jet.value);
    }
    Ok((values, rows))
}

/// Jacobian of `f` at a float point.
pub fn jacobian_at<F: VectorFn + ?Sized>(f: &F, x: &[f64]) -> Result<Vec<Vec<f64>>, GuardError> {
    jacobian(f, x).map(|(_, j)| j)
}

/// Enclosure of the Jacobian of `f` over the box `x`.
pub fn jacobian_enclosure<F: VectorFn + ?Sized>(f: &F, x: &[Interval]) -> Result<IntervalMatrix, GuardError> {
    jacobian(f, x).map(|(_, j)| IntervalMatrix::from_rows(j))
}

/// Central finite-difference Jacobian; a test oracle independent of [`Jet`].
pub fn finite_difference_jacobian<F: VectorFn + ?Sized>(
    f: &F,
    x: &[f64],
    step: f64,
) -> Result<Vec<Vec<f64>>, GuardError> {
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += step;
        xm[j] -= step;
        let fp = f.eval(&xp)?;
        let fm = f.eval(&xm)?;
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * step)).collect::<Vec<f64>>());
    }
    let m = cols.first().map_or(0, Vec::len);
    Ok((0..m).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect())
}
