//! Field scalars used by every linear-algebra routine in the crate.
//!
//! Two backends are provided: [`C64`] (complex double precision, covers real
//! and unitary systems) and [`Q`] (exact rationals, real systems only).

use std::fmt::{self, Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type C64 = Complex64;
pub type Q = BigRational;

/// A field element as seen by the elimination and torsion code.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// `true` when arithmetic is exact and zero tests need no tolerance.
    const EXACT: bool;
    /// Short backend tag used in reports.
    const BACKEND: &'static str;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    /// Magnitude used for pivoting and for every exported (modulus) value.
    fn modulus(&self) -> f64;
    fn to_c64(&self) -> C64;
    /// Inverse of [`Scalar::to_c64`]; fails for exact backends on non-real or
    /// non-finite input.
    fn from_c64(z: C64) -> Option<Self>;
    /// Parses a decimal string, `"p/q"`, or (for complex backends) `"re,im"`.
    fn parse_entry(s: &str) -> Option<Self>;
    /// Builds a value from separate real and imaginary parts.
    fn from_parts(re: &str, im: &str) -> Option<Self>;
    /// Renders a value for reports: exact `"p/q"` or 15 significant digits.
    fn render(&self) -> String;

    fn is_zero_exact(&self) -> bool {
        *self == Self::zero()
    }

    fn recip(&self) -> Self {
        Self::one() / self.clone()
    }

    fn powi(&self, e: i32) -> Self {
        let base = if e < 0 { self.recip() } else { self.clone() };
        let mut acc = Self::one();
        for _ in 0..e.unsigned_abs() {
            acc = acc * base.clone();
        }
        acc
    }
}

impl Scalar for C64 {
    const EXACT: bool = false;
    const BACKEND: &'static str = "f64";

    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn one() -> Self {
        C64::new(1.0, 0.0)
    }
    fn from_i64(v: i64) -> Self {
        C64::new(v as f64, 0.0)
    }
    fn modulus(&self) -> f64 {
        self.norm()
    }
    fn to_c64(&self) -> C64 {
        *self
    }
    fn from_c64(z: C64) -> Option<Self> {
        Some(z)
    }
    fn parse_entry(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((re, im)) = s.split_once(',') {
            return Self::from_parts(re, im);
        }
        parse_real(s).map(|re| C64::new(re, 0.0))
    }
    fn from_parts(re: &str, im: &str) -> Option<Self> {
        Some(C64::new(parse_real(re.trim())?, parse_real(im.trim())?))
    }
    fn render(&self) -> String {
        if self.im == 0.0 {
            format_sig(self.re)
        } else {
            format!("{},{}", format_sig(self.re), format_sig(self.im))
        }
    }
}

impl Scalar for Q {
    const EXACT: bool = true;
    const BACKEND: &'static str = "exact";

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn modulus(&self) -> f64 {
        self.abs().to_f64().unwrap_or(f64::NAN)
    }
    fn to_c64(&self) -> C64 {
        C64::new(self.to_f64().unwrap_or(f64::NAN), 0.0)
    }
    fn from_c64(z: C64) -> Option<Self> {
        if z.im != 0.0 {
            return None;
        }
        BigRational::from_float(z.re)
    }
    fn parse_entry(s: &str) -> Option<Self> {
        parse_rational(s.trim())
    }
    fn from_parts(re: &str, im: &str) -> Option<Self> {
        let im = parse_rational(im.trim())?;
        if !im.is_zero() {
            return None;
        }
        parse_rational(re.trim())
    }
    fn render(&self) -> String {
        if self.denom().is_one() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
    fn is_zero_exact(&self) -> bool {
        self.is_zero()
    }
}

fn parse_real(s: &str) -> Option<f64> {
    if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p.trim().parse().ok()?;
        let q: f64 = q.trim().parse().ok()?;
        return Some(p / q);
    }
    f64::from_str(s).ok()
}

/// Exact parse of `"p/q"`, integers and finite decimal notation
/// (`"-1.25"`, `"3e-2"`).
pub fn parse_rational(s: &str) -> Option<Q> {
    if let Some((p, q)) = s.split_once('/') {
        let p = parse_rational(p.trim())?;
        let q = parse_rational(q.trim())?;
        if q.is_zero() {
            return None;
        }
        return Some(p / q);
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all = format!("{int_part}{frac_part}");
    let numer: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().ok()? };
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = BigRational::from_integer(numer);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -value } else { value })
}

/// Formats a float with 15 significant digits, positional when reasonable.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // exponent after rounding to 15 significant digits, so 0.99999999999999999 counts as 1
    let sci = format!("{x:.14e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

/// Compares two values modulo sign: `a ≈ ±b` within relative tolerance.
pub fn approx_eq_mod_sign<S: Scalar>(a: &S, b: &S, rel_tol: f64) -> bool {
    if S::EXACT {
        return *a == *b || *a == -b.clone();
    }
    let (za, zb) = (a.to_c64(), b.to_c64());
    let scale = za.norm().max(zb.norm()).max(f64::MIN_POSITIVE);
    (za - zb).norm().min((za + zb).norm()) <= rel_tol * scale
}

/// Relative closeness of two positive reals.
pub fn rel_close(a: f64, b: f64, rel_tol: f64) -> bool {
    let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    (a - b).abs() <= rel_tol * scale
}

/// Wrapper that prints a scalar with [`Scalar::render`].
pub struct Rendered<'a, S: Scalar>(pub &'a S);

impl<S: Scalar> Display for Rendered<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("0.25"), Some(Q::new(1.into(), 4.into())));
        assert_eq!(parse_rational("-3/6"), Some(Q::new((-1).into(), 2.into())));
        assert_eq!(parse_rational("1.5e2"), Some(Q::from_i64(150)));
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational("1/0"), None);
    }

    #[test]
    fn renders() {
        assert_eq!(Q::from_i64(2).render(), "2");
        assert_eq!((Q::from_i64(2) / Q::from_i64(3)).render(), "2/3");
        assert_eq!(format_sig(1.0), "1.00000000000000");
        assert_eq!(format_sig(2.0f64.sqrt()), "1.41421356237310");
        assert_eq!(format_sig(1.0 - 2e-16), "1.00000000000000");
        assert_eq!(format_sig(-2.5e-7), "-2.50000000000000e-7");
    }

    #[test]
    fn complex_entry_forms() {
        assert_eq!(C64::parse_entry("0.5,-1"), Some(C64::new(0.5, -1.0)));
        assert_eq!(C64::parse_entry("1/4"), Some(C64::new(0.25, 0.0)));
        assert_eq!(Q::from_parts("1", "1"), None);
    }

    #[test]
    fn sign_quotient() {
        assert!(approx_eq_mod_sign(&C64::new(1.0, 2.0), &C64::new(-1.0, -2.0), 1e-12));
        assert!(!approx_eq_mod_sign(&C64::new(1.0, 2.0), &C64::new(1.0, -2.0), 1e-12));
        assert!(approx_eq_mod_sign(&Q::from_i64(3), &Q::from_i64(-3), 0.0));
    }
}
