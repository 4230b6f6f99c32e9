//! Outward-rounded interval arithmetic over binary64.
//!
//! Every operation returns an enclosure of the exact real result over all
//! points of its arguments. Arithmetic is rounded with error-free
//! transformations (see [`round`]); the elementary functions evaluate libm on
//! monotone pieces and widen by a couple of ulps.
//!
//! Endpoints may become infinite after an overflow inside an operation. Such
//! intervals still enclose the true result; callers that care (the rigorous
//! rollout) check [`Interval::is_finite`] and stop.

mod linalg;
pub mod round;

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use linalg::{IntervalMatrix, IntervalVector};

use crate::error::{Error, GuardError};
use round::*;

#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    /// Checked constructor: endpoints finite and ordered.
    pub fn new(lo: f64, hi: f64) -> Result<Self, Error> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(Self { lo, hi })
        } else {
            Err(Error::InvalidInterval { lo, hi })
        }
    }

    /// Thin interval `[x, x]`.
    ///
    /// # Panics
    /// If `x` is not finite.
    pub fn point(x: f64) -> Self {
        assert!(x.is_finite(), "thin interval from non-finite value {x}");
        Self { lo: x, hi: x }
    }

    #[inline]
    pub(crate) const fn raw(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// Closed ball `[x - r, x + r]` rounded outward.
    pub fn ball(x: f64, r: f64) -> Self {
        Self::raw(sub_down(x, r), add_up(x, r))
    }

    /// Enclosure of the real number 2π.
    pub fn two_pi() -> Self {
        // TAU is the nearest double to 2π and lies below it.
        Self::raw(TAU, TAU.next_up())
    }

    /// Enclosure of π.
    pub fn pi() -> Self {
        Self::raw(PI, PI.next_up())
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn is_thin(&self) -> bool {
        self.lo == self.hi
    }

    pub fn midpoint(&self) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        let m = 0.5 * self.lo + 0.5 * self.hi;
        m.clamp(self.lo, self.hi)
    }

    /// Upper bound on the half-width measured from [`Interval::midpoint`].
    pub fn radius(&self) -> f64 {
        let m = self.midpoint();
        sub_up(m, self.lo).max(sub_up(self.hi, m))
    }

    pub fn width(&self) -> f64 {
        sub_up(self.hi, self.lo)
    }

    /// Largest absolute value over the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value over the interval.
    pub fn mig(&self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    /// `self ⊆ other`
    pub fn subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Self::raw(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    /// `None` when the intervals are disjoint.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Self::raw(lo, hi))
    }

    /// Enlarge each endpoint by `r` (outward rounded).
    pub fn inflate(&self, r: f64) -> Interval {
        Self::raw(sub_down(self.lo, r), add_up(self.hi, r))
    }

    pub fn try_div(self, rhs: Interval) -> Result<Interval, GuardError> {
        if rhs.contains_zero() {
            return Err(GuardError::DivisionByZeroInterval);
        }
        let (a, b) = (self, rhs);
        let lo = div_down(a.lo, b.lo).min(div_down(a.lo, b.hi)).min(div_down(a.hi, b.lo)).min(div_down(a.hi, b.hi));
        let hi = div_up(a.lo, b.lo).max(div_up(a.lo, b.hi)).max(div_up(a.hi, b.lo)).max(div_up(a.hi, b.hi));
        Ok(Self::raw(lo, hi))
    }

    pub fn sqr(self) -> Interval {
        if self.lo >= 0.0 {
            Self::raw(mul_down(self.lo, self.lo), mul_up(self.hi, self.hi))
        } else if self.hi <= 0.0 {
            Self::raw(mul_down(self.hi, self.hi), mul_up(self.lo, self.lo))
        } else {
            let m = self.mag();
            Self::raw(0.0, mul_up(m, m))
        }
    }

    pub fn abs(self) -> Interval {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            -self
        } else {
            Self::raw(0.0, self.mag())
        }
    }

    pub fn try_sqrt(self) -> Result<Interval, GuardError> {
        if self.lo < 0.0 {
            return Err(GuardError::DomainError { function: "sqrt" });
        }
        Ok(Self::raw(sqrt_down(self.lo), sqrt_up(self.hi)))
    }

    pub fn sin(self) -> Interval {
        periodic_range(self, f64::sin, FRAC_PI_2, -FRAC_PI_2)
    }

    pub fn cos(self) -> Interval {
        periodic_range(self, f64::cos, 0.0, PI)
    }

    pub fn try_acos(self) -> Result<Interval, GuardError> {
        if self.lo < -1.0 || self.hi > 1.0 {
            return Err(GuardError::DomainError { function: "arccos" });
        }
        let lo = ulps_down(self.hi.acos(), 2).max(0.0);
        let hi = ulps_up(self.lo.acos(), 2).min(PI.next_up());
        Ok(Self::raw(lo, hi))
    }

    pub fn tanh(self) -> Interval {
        let lo = ulps_down(self.lo.tanh(), 2).max(-1.0);
        let hi = ulps_up(self.hi.tanh(), 2).min(1.0);
        Self::raw(lo, hi)
    }

    /// Clip to `[lo, hi]`, refusing arguments that straddle a breakpoint.
    ///
    /// Returns the saturated thin value when the argument lies entirely on
    /// one side, the argument itself when it lies inside the range.
    pub fn clip_guarded(self, lo: f64, hi: f64) -> Result<Interval, GuardError> {
        match self.clip_branch(lo, hi)? {
            ClipBranch::Upper => Ok(Self::point(hi)),
            ClipBranch::Lower => Ok(Self::point(lo)),
            ClipBranch::Inside => Ok(self),
        }
    }

    pub fn clip_branch(self, lo: f64, hi: f64) -> Result<ClipBranch, GuardError> {
        debug_assert!(lo < hi);
        if self.lo >= hi {
            Ok(ClipBranch::Upper)
        } else if self.hi <= lo {
            Ok(ClipBranch::Lower)
        } else if self.lo >= lo && self.hi <= hi {
            Ok(ClipBranch::Inside)
        } else {
            let breakpoint = if self.contains(hi) { hi } else { lo };
            Err(GuardError::NonSmoothCrossing { breakpoint })
        }
    }

    /// Rectifier; the kink at zero is guarded like a clip breakpoint.
    pub fn try_relu(self) -> Result<Interval, GuardError> {
        if self.lo >= 0.0 {
            Ok(self)
        } else if self.hi <= 0.0 {
            Ok(Self::point(0.0))
        } else {
            Err(GuardError::NonSmoothCrossing { breakpoint: 0.0 })
        }
    }
}

/// Which smooth piece of a clip function an argument falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipBranch {
    Lower,
    Inside,
    Upper,
}

/// Range of a 2π-periodic function with maxima at `max_at + 2kπ` and minima
/// at `min_at + 2kπ`, monotone in between.
fn periodic_range(x: Interval, f: fn(f64) -> f64, max_at: f64, min_at: f64) -> Interval {
    if !x.is_finite() || x.hi - x.lo >= 6.2 {
        return Interval::raw(-1.0, 1.0);
    }
    let hits = |at: f64| {
        // Liberal test: a spurious hit only widens the result.
        let slack = 1e-9;
        let t_lo = (x.lo - at) / TAU - slack;
        let t_hi = (x.hi - at) / TAU + slack;
        t_lo.ceil() <= t_hi.floor()
    };
    let (a, b) = (f(x.lo), f(x.hi));
    let lo = if hits(min_at) { -1.0 } else { ulps_down(a.min(b), 2).max(-1.0) };
    let hi = if hits(max_at) { 1.0 } else { ulps_up(a.max(b), 2).min(1.0) };
    Interval::raw(lo, hi)
}

impl Add for Interval {
    type Output = Interval;
    #[inline]
    fn add(self, rhs: Interval) -> Interval {
        Interval::raw(add_down(self.lo, rhs.lo), add_up(self.hi, rhs.hi))
    }
}

impl Sub for Interval {
    type Output = Interval;
    #[inline]
    fn sub(self, rhs: Interval) -> Interval {
        Interval::raw(sub_down(self.lo, rhs.hi), sub_up(self.hi, rhs.lo))
    }
}

impl Mul for Interval {
    type Output = Interval;
    #[inline]
    fn mul(self, rhs: Interval) -> Interval {
        let (a, b) = (self, rhs);
        if a.is_thin() && b.is_thin() {
            return Interval::raw(mul_down(a.lo, b.lo), mul_up(a.lo, b.lo));
        }
        let lo = mul_down(a.lo, b.lo).min(mul_down(a.lo, b.hi)).min(mul_down(a.hi, b.lo)).min(mul_down(a.hi, b.hi));
        let hi = mul_up(a.lo, b.lo).max(mul_up(a.lo, b.hi)).max(mul_up(a.hi, b.lo)).max(mul_up(a.hi, b.hi));
        Interval::raw(lo, hi)
    }
}

impl Neg for Interval {
    type Output = Interval;
    #[inline]
    fn neg(self) -> Interval {
        Interval::raw(-self.hi, -self.lo)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    lo: String,
    hi: String,
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        IntervalRepr { lo: crate::decimal::format(self.lo), hi: crate::decimal::format(self.hi) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = IntervalRepr::deserialize(d)?;
        let lo = crate::decimal::parse(&repr.lo).map_err(D::Error::custom)?;
        let hi = crate::decimal::parse(&repr.hi).map_err(D::Error::custom)?;
        Interval::new(lo, hi).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn endpoint_arithmetic() {
        assert_eq!(iv(1.0, 2.0) + iv(3.0, 4.0), iv(4.0, 6.0));
        assert_eq!(iv(-1.0, 1.0) * iv(-1.0, 1.0), iv(-1.0, 1.0));
        assert_eq!(iv(1.0, 2.0).try_div(iv(-1.0, 1.0)), Err(GuardError::DivisionByZeroInterval));
        assert_eq!(-iv(1.0, 2.0), iv(-2.0, -1.0));
        assert_eq!(iv(1.0, 2.0) - iv(3.0, 4.0), iv(-3.0, -1.0));
    }

    #[test]
    fn rejects_bad_endpoints() {
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
        assert!(Interval::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn elementary_examples() {
        let s = iv(0.0, FRAC_PI_2.next_up()).sin();
        assert!(s.lo() <= 0.0 && s.hi() >= 1.0);
        assert!(s.hi() <= 1.0f64.next_up());
        let c = Interval::point(0.0).cos();
        assert!(c.contains(1.0));
        assert!(c.radius() < 1e-15);
        assert!(iv(-1.5, 0.0).try_acos().is_err());
        let a = iv(-1.0, 1.0).try_acos().unwrap();
        assert!(a.contains(0.0) && a.contains(PI));
    }

    #[test]
    fn clip_branches() {
        assert_eq!(iv(8.0, 8.3).clip_guarded(-8.0, 8.0), Ok(iv(8.0, 8.0)));
        assert_eq!(iv(-1.0, 1.0).clip_guarded(-2.0, 2.0), Ok(iv(-1.0, 1.0)));
        assert_eq!(iv(7.9, 8.1).clip_guarded(-8.0, 8.0), Err(GuardError::NonSmoothCrossing { breakpoint: 8.0 }));
        assert_eq!(iv(-9.0, -8.5).clip_guarded(-8.0, 8.0), Ok(iv(-8.0, -8.0)));
    }

    #[test]
    fn plumbing() {
        assert_eq!(iv(1.0, 3.0).midpoint(), 2.0);
        assert_eq!(iv(1.0, 3.0).radius(), 1.0);
        assert_eq!(iv(0.0, 1.0).hull(&iv(2.0, 3.0)), iv(0.0, 3.0));
        assert_eq!(iv(0.0, 1.0).intersect(&iv(2.0, 3.0)), None);
        assert_eq!(iv(0.0, 2.0).intersect(&iv(1.0, 3.0)), Some(iv(1.0, 2.0)));
        assert!(iv(1.0, 2.0).subset_of(&iv(0.0, 2.0)));
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn two_pi_encloses() {
        let tp = Interval::two_pi();
        assert!(tp.lo() < tp.hi());
        // 2π = 6.28318530717958647692...
        assert!(tp.lo() <= 6.283185307179586 && tp.hi() >= 6.283185307179587);
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let x = iv(0.1, 1.0 / 3.0);
        let text = serde_json::to_string(&x).unwrap();
        assert!(text.contains("\"lo\":\"0.1\""));
        let back: Interval = serde_json::from_str(&text).unwrap();
        assert_eq!(back.lo().to_bits(), x.lo().to_bits());
        assert_eq!(back.hi().to_bits(), x.hi().to_bits());
        assert!(serde_json::from_str::<Interval>(r#"{"lo":"2","hi":"1"}"#).is_err());
    }

    fn ulp(x: f64) -> f64 {
        let a = x.abs();
        a.next_up() - a
    }

    fn interval_strategy() -> impl Strategy<Value = (f64, f64)> {
        (-50.0f64..50.0, 0.0f64..5.0).prop_map(|(c, w)| (c - w / 2.0, c + w / 2.0))
    }

    proptest! {
        #[test]
        fn arithmetic_contains_samples(
            (alo, ahi) in interval_strategy(),
            (blo, bhi) in interval_strategy(),
            s in 0.0f64..=1.0,
            t in 0.0f64..=1.0,
        ) {
            let (a, b) = (iv(alo, ahi), iv(blo, bhi));
            let x = (alo + s * (ahi - alo)).clamp(alo, ahi);
            let y = (blo + t * (bhi - blo)).clamp(blo, bhi);
            prop_assert!((a + b).contains(x + y));
            prop_assert!((a - b).contains(x - y));
            prop_assert!((a * b).contains(x * y));
            prop_assert!((-a).contains(-x));
            prop_assert!(a.sqr().contains(x * x));
            if let Ok(q) = a.try_div(b) {
                prop_assert!(q.contains(x / y));
            }
            prop_assert!(a.sin().contains(x.sin()));
            prop_assert!(a.cos().contains(x.cos()));
            prop_assert!(a.tanh().contains(x.tanh()));
        }

        #[test]
        fn unary_ops_are_inclusion_monotone(
            (lo, hi) in interval_strategy(),
            shrink_lo in 0.0f64..=1.0,
            shrink_hi in 0.0f64..=1.0,
        ) {
            let outer = iv(lo, hi);
            let a = lo + shrink_lo * (hi - lo) / 2.0;
            let b = hi - shrink_hi * (hi - lo) / 2.0;
            let inner = iv(a.min(b), a.max(b));
            prop_assert!(inner.sin().subset_of(&outer.sin()));
            prop_assert!(inner.cos().subset_of(&outer.cos()));
            prop_assert!(inner.sqr().subset_of(&outer.sqr()));
            prop_assert!(inner.abs().subset_of(&outer.abs()));
            prop_assert!(inner.tanh().subset_of(&outer.tanh()));
        }

        #[test]
        fn thin_arithmetic_is_tight(x in -1e6f64..1e6, y in 1e-3f64..1e6) {
            let (a, b) = (Interval::point(x), Interval::point(y));
            for (r, exact) in [
                (a + b, x + y),
                (a - b, x - y),
                (a * b, x * y),
                (a.try_div(b).unwrap(), x / y),
            ] {
                prop_assert!(r.contains(exact));
                prop_assert!(r.width() <= 4.0 * ulp(exact).max(f64::MIN_POSITIVE));
            }
        }

        #[test]
        fn clip_never_straddles(lo in -10.0f64..10.0, w in 0.0f64..3.0) {
            let x = iv(lo, lo + w);
            if let Ok(c) = x.clip_guarded(-2.0, 2.0) {
                prop_assert!(!(c.lo() < 2.0 && c.hi() > 2.0));
                prop_assert!(!(c.lo() < -2.0 && c.hi() > -2.0));
            }
        }
    }
}
