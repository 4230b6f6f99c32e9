//! The scalar kinds the dynamics and controllers are generic over.
//!
//! Plain `f64` is used for simulation and search, [`Interval`] for rigorous
//! enclosures, and [`Jet`](crate::autodiff::Jet) over either for derivatives.
//! Operations that can be undefined or non-smooth return a [`GuardError`];
//! over intervals this is how a box is certified smooth: evaluation succeeds
//! only if no breakpoint or pole lies in it.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::GuardError;
use crate::interval::{ClipBranch, Interval};

pub trait Scalar:
    Clone + Debug + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;

    /// 2π; an enclosure for interval kinds.
    fn two_pi() -> Self {
        Self::from_f64(std::f64::consts::TAU)
    }

    /// Representative float value (the value itself, or an interval midpoint).
    fn approx(&self) -> f64;

    fn try_div(self, rhs: Self) -> Result<Self, GuardError>;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn sqr(self) -> Self;
    fn try_sqrt(self) -> Result<Self, GuardError>;
    fn try_acos(self) -> Result<Self, GuardError>;

    /// Which piece of `clip(·, lo, hi)` the value lies on.
    fn clip_branch(&self, lo: f64, hi: f64) -> Result<ClipBranch, GuardError>;

    fn clip(self, lo: f64, hi: f64) -> Result<Self, GuardError> {
        Ok(match self.clip_branch(lo, hi)? {
            ClipBranch::Lower => Self::from_f64(lo),
            ClipBranch::Upper => Self::from_f64(hi),
            ClipBranch::Inside => self,
        })
    }

    fn relu(self) -> Result<Self, GuardError> {
        Ok(match self.clip_branch(0.0, f64::MAX)? {
            ClipBranch::Lower => Self::from_f64(0.0),
            _ => self,
        })
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn approx(&self) -> f64 {
        *self
    }
    #[inline]
    fn try_div(self, rhs: Self) -> Result<Self, GuardError> {
        if rhs == 0.0 {
            Err(GuardError::DivisionByZeroInterval)
        } else {
            Ok(self / rhs)
        }
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn sqr(self) -> Self {
        self * self
    }
    fn try_sqrt(self) -> Result<Self, GuardError> {
        if self < 0.0 {
            Err(GuardError::DomainError { function: "sqrt" })
        } else {
            Ok(self.sqrt())
        }
    }
    fn try_acos(self) -> Result<Self, GuardError> {
        if (-1.0..=1.0).contains(&self) {
            Ok(self.acos())
        } else {
            Err(GuardError::DomainError { function: "arccos" })
        }
    }
    #[inline]
    fn clip_branch(&self, lo: f64, hi: f64) -> Result<ClipBranch, GuardError> {
        // At a float the branch is always decidable; ties go to saturation.
        Ok(if *self >= hi {
            ClipBranch::Upper
        } else if *self <= lo {
            ClipBranch::Lower
        } else {
            ClipBranch::Inside
        })
    }
    #[inline]
    fn clip(self, lo: f64, hi: f64) -> Result<Self, GuardError> {
        Ok(self.clamp(lo, hi))
    }
}

impl Scalar for Interval {
    fn from_f64(x: f64) -> Self {
        Interval::point(x)
    }
    fn two_pi() -> Self {
        Interval::two_pi()
    }
    fn approx(&self) -> f64 {
        self.midpoint()
    }
    fn try_div(self, rhs: Self) -> Result<Self, GuardError> {
        Interval::try_div(self, rhs)
    }
    fn sin(self) -> Self {
        Interval::sin(self)
    }
    fn cos(self) -> Self {
        Interval::cos(self)
    }
    fn tanh(self) -> Self {
        Interval::tanh(self)
    }
    fn sqr(self) -> Self {
        Interval::sqr(self)
    }
    fn try_sqrt(self) -> Result<Self, GuardError> {
        Interval::try_sqrt(self)
    }
    fn try_acos(self) -> Result<Self, GuardError> {
        Interval::try_acos(self)
    }
    fn clip_branch(&self, lo: f64, hi: f64) -> Result<ClipBranch, GuardError> {
        Interval::clip_branch(*self, lo, hi)
    }
}
