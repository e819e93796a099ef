//! Scalar abstraction shared by every evaluation routine.
//!
//! All probabilities, utilities and values flow through [`Scalar`]. The
//! exact instance ([`BigRational`]) is what scenarios, reports and the
//! acceptance checks use; `f64`/`f32` exist for quick exploratory runs.

use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{Num, One, Signed, ToPrimitive, Zero};

/// Numeric carrier for probabilities and utilities.
pub trait Scalar: Num + Clone + PartialOrd + fmt::Debug + Send + Sync + 'static {
    /// True when arithmetic is exact (no rounding).
    const EXACT: bool;

    fn from_big_ratio(value: &BigRational) -> Self;

    fn to_f64(&self) -> f64;

    /// Exact rendering for rationals (`p/q` or `p`), shortest round-trip
    /// decimal for floats.
    fn render(&self) -> String;

    /// Equality used by invariant checks: exact for rationals, a small
    /// relative tolerance for floats.
    fn same(&self, other: &Self) -> bool;

    fn from_i64(value: i64) -> Self {
        Self::from_big_ratio(&BigRational::from_integer(BigInt::from(value)))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_big_ratio(&BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    fn from_u64(value: u64) -> Self {
        Self::from_big_ratio(&BigRational::from_integer(BigInt::from(value)))
    }

    /// `2^-k`, exactly when the scalar is exact.
    fn half_pow(k: usize) -> Self {
        let den = BigInt::one() << k;
        Self::from_big_ratio(&BigRational::new(BigInt::one(), den))
    }

    fn is_negative_value(&self) -> bool {
        *self < Self::zero()
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_big_ratio(value: &BigRational) -> Self {
        value.clone()
    }

    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }

    fn render(&self) -> String {
        if self.is_integer() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }

    fn same(&self, other: &Self) -> bool {
        self == other
    }

    fn half_pow(k: usize) -> Self {
        BigRational::new(BigInt::one(), BigInt::one() << k)
    }
}

macro_rules! float_scalar {
    ($t:ty, $tol:expr) => {
        impl Scalar for $t {
            const EXACT: bool = false;

            fn from_big_ratio(value: &BigRational) -> Self {
                ratio_to_f64(value) as $t
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn render(&self) -> String {
                format!("{}", self)
            }

            fn same(&self, other: &Self) -> bool {
                let scale = self.abs().max(other.abs()).max(1.0);
                (self - other).abs() <= $tol * scale
            }

            fn half_pow(k: usize) -> Self {
                (2.0 as $t).powi(-(k as i32))
            }
        }
    };
}

float_scalar!(f64, 1e-9);
float_scalar!(f32, 1e-4);

/// Converts a big rational to the nearest-ish `f64`, keeping precision
/// when numerator and denominator individually overflow.
pub fn ratio_to_f64(value: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (value.numer().to_f64(), value.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // Scale both sides down so the quotient fits.
    let nbits = value.numer().bits() as i64;
    let dbits = value.denom().bits() as i64;
    let shift = (nbits.max(dbits) - 900).max(0) as usize;
    let n = (value.numer() >> shift).to_f64().unwrap_or(0.0);
    let d = (value.denom() >> shift).to_f64().unwrap_or(f64::INFINITY);
    if d == 0.0 {
        let sign = if value.is_negative() { -1.0 } else { 1.0 };
        return sign * f64::INFINITY;
    }
    n / d
}

/// Parses an exact literal: an integer (`-3`) or a fraction (`2/3`).
/// Decimal and exponent notation are rejected so inputs stay exact.
pub fn parse_fraction(text: &str) -> Result<BigRational, String> {
    let s = text.trim();
    if s.is_empty() {
        return Err("empty numeric literal".into());
    }
    if s.contains(['.', 'e', 'E']) {
        return Err(format!(
            "decimal literal `{s}` is not allowed; write it as a fraction p/q"
        ));
    }
    let parse_int = |part: &str| -> Result<BigInt, String> {
        BigInt::parse_bytes(part.trim().as_bytes(), 10)
            .ok_or_else(|| format!("malformed numeric literal `{s}`"))
    };
    match s.split_once('/') {
        None => Ok(BigRational::from_integer(parse_int(s)?)),
        Some((n, d)) => {
            let n = parse_int(n)?;
            let d = parse_int(d)?;
            if d.is_zero() {
                return Err(format!("zero denominator in `{s}`"));
            }
            Ok(BigRational::new(n, d))
        }
    }
}

/// Decimal rendering to `digits` significant digits, computed exactly by
/// long division so reports never depend on float formatting quirks.
pub fn decimal_sig(value: &BigRational, digits: usize) -> String {
    if value.is_zero() {
        return "0".into();
    }
    let negative = value.is_negative();
    let abs = value.abs();
    let ten = BigInt::from(10);
    // Find exponent e with 10^e <= abs < 10^(e+1).
    let mut exp: i64 = (ratio_to_f64(&abs).log10().floor()) as i64;
    let pow10 = |e: i64| -> BigRational {
        if e >= 0 {
            BigRational::from_integer(num::pow(ten.clone(), e as usize))
        } else {
            BigRational::new(BigInt::one(), num::pow(ten.clone(), (-e) as usize))
        }
    };
    while pow10(exp) > abs {
        exp -= 1;
    }
    while pow10(exp + 1) <= abs {
        exp += 1;
    }
    // Scale so that the integer part carries `digits` digits, then round half up.
    let scale = digits as i64 - 1 - exp;
    let scaled = &abs * pow10(scale);
    let mut int = scaled.floor().to_integer();
    let frac = scaled - BigRational::from_integer(int.clone());
    if frac * BigInt::from(2) >= BigRational::one() {
        int += 1;
    }
    let mut repr = int.to_string();
    let mut scale = scale;
    // Rounding may carry into a new digit.
    if repr.len() > digits {
        repr.pop();
        scale -= 1;
    }
    let body = if scale <= 0 {
        let mut s = repr;
        s.extend(std::iter::repeat_n('0', (-scale) as usize));
        s
    } else {
        let scale = scale as usize;
        if repr.len() <= scale {
            let mut s = String::from("0.");
            s.extend(std::iter::repeat_n('0', scale - repr.len()));
            s.push_str(&repr);
            trim_fraction(s)
        } else {
            let (int_part, frac_part) = repr.split_at(repr.len() - scale);
            trim_fraction(format!("{int_part}.{frac_part}"))
        }
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

fn trim_fraction(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let trimmed = s.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

/// Convenience constructor for exact literals in code and tests.
pub fn frac(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_integers_and_fractions() {
        assert_eq!(parse_fraction("2/3").unwrap(), frac(2, 3));
        assert_eq!(parse_fraction(" -4 ").unwrap(), frac(-4, 1));
        assert_eq!(parse_fraction("6/4").unwrap(), frac(3, 2));
    }

    #[test]
    fn rejects_decimals() {
        let err = parse_fraction("0.5").unwrap_err();
        assert!(err.contains("decimal"), "{err}");
        assert!(parse_fraction("1e3").is_err());
        assert!(parse_fraction("1/0").is_err());
        assert!(parse_fraction("abc").is_err());
    }

    #[test]
    fn renders_exact_values() {
        assert_eq!(frac(4, 3).render(), "4/3");
        assert_eq!(frac(99, 1).render(), "99");
        assert_eq!(frac(-2, 4).render(), "-1/2");
    }

    #[test]
    fn decimal_rendering_is_rounded_to_significant_digits() {
        assert_eq!(decimal_sig(&frac(4, 3), 12), "1.33333333333");
        assert_eq!(decimal_sig(&frac(2, 3), 12), "0.666666666667");
        assert_eq!(decimal_sig(&frac(99, 1), 12), "99");
        assert_eq!(decimal_sig(&frac(-1, 8), 12), "-0.125");
        assert_eq!(decimal_sig(&frac(125, 128), 12), "0.9765625");
        assert_eq!(decimal_sig(&frac(1, 3000), 3), "0.000333");
        assert_eq!(decimal_sig(&frac(999_999, 1), 3), "1000000");
        assert_eq!(decimal_sig(&frac(0, 1), 12), "0");
    }

    #[test]
    fn float_scalars_share_the_interface() {
        let x = <f64 as Scalar>::from_ratio(1, 4);
        assert_eq!(x, 0.25);
        assert!(<f64 as Scalar>::half_pow(3).same(&0.125));
        const { assert!(!<f64 as Scalar>::EXACT) };
        const { assert!(<BigRational as Scalar>::EXACT) };
        assert_eq!(<BigRational as Scalar>::half_pow(10), frac(1, 1024));
    }

    #[test]
    fn huge_ratios_convert_to_float() {
        let big = BigRational::new(BigInt::one() << 2000, (BigInt::one() << 2000) * 3);
        assert!((ratio_to_f64(&big) - 1.0 / 3.0).abs() < 1e-12);
    }
}
