//! Helpers for the exact rational constant arithmetic.
//!
//! Estimated constants start life as metric values (floats). Before they
//! enter the derived-constant formulas they are rounded *up* onto a dyadic
//! grid: rounding up keeps every axiom and visibility bound valid, and a
//! power-of-two denominator converts back to `f64` without rounding error.

use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::Real;

/// Grid denominator for estimated constants.
pub const GRID: i64 = 64;

/// Smallest rational on the `1/GRID` grid that is `>= x`.
pub fn grid_ceil(x: f64) -> Rational64 {
    assert!(x.is_finite(), "constant estimate must be finite");
    let scaled = (x * GRID as f64).ceil() as i64;
    Rational64::new(scaled, GRID)
}

/// Exact conversion to the metric scalar; exact for dyadic denominators.
pub fn to_real<R: Real>(q: Rational64) -> R {
    let n = R::from_i64(*q.numer()).expect("numerator fits the scalar");
    let d = R::from_i64(*q.denom()).expect("denominator fits the scalar");
    n / d
}

pub fn to_f64(q: Rational64) -> f64 {
    q.to_f64().expect("rational fits f64")
}

/// Parse decimal or `p/q` notation into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational64> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().ok()?;
        let q: i64 = q.trim().parse().ok()?;
        if q == 0 {
            return None;
        }
        return Some(Rational64::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let sign = if int.trim_start().starts_with('-') { -1 } else { 1 };
        let int: i64 = int.parse().ok()?;
        if frac.is_empty() {
            return Some(Rational64::from_integer(int));
        }
        let digits = frac.len() as u32;
        if digits > 12 {
            return None;
        }
        let frac_val: i64 = frac.parse().ok()?;
        let denom = 10i64.pow(digits);
        return Some(Rational64::from_integer(int) + Rational64::new(sign * frac_val, denom));
    }
    let int: i64 = s.parse().ok()?;
    Some(Rational64::from_integer(int))
}

/// Render without losing exactness (`p/q`, or the integer when q = 1).
pub fn format_rational(q: Rational64) -> String {
    if q.denom() == &1 {
        format!("{}", q.numer())
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn is_nonnegative(q: Rational64) -> bool {
    !q.is_negative() || q.is_zero()
}
