//! Arithmetic modes.
//!
//! Every table, decomposition and inference routine is generic over
//! [`Scalar`], which is implemented for `f64` (measured data) and for
//! [`Rational`] (exact reproduction of hand-worked tables).

use std::fmt::{self, Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::bigint::Sign;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde_json::{Number, Value};

use crate::matrix::{self, Matrix};

/// Arbitrary-precision rational number.
pub type Rational = BigRational;

/// Which arithmetic a table or decomposition was computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueMode {
    Exact,
    Float,
}

impl ValueMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueMode::Exact => "exact",
            ValueMode::Float => "float",
        }
    }
}

impl Display for ValueMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ValueMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" | "rational" => Ok(ValueMode::Exact),
            "float" | "floating" => Ok(ValueMode::Float),
            other => Err(format!("unknown value mode `{other}` (expected exact|float)")),
        }
    }
}

/// How pivots are chosen during row reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotStrategy {
    /// Scan columns, then rows, in index order; take the first nonzero entry.
    FirstNonzero,
    /// Largest remaining magnitude; ties go to the lowest (row, column).
    Complete,
}

/// A field element usable as a table entry.
pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    const MODE: ValueMode;
    const PIVOTING: PivotStrategy;

    fn from_ratio(numer: i64, denom: i64) -> Self;

    fn from_u64(n: u64) -> Self;

    /// Lossless for floats, exact binary expansion for rationals.
    fn from_f64(x: f64) -> Option<Self>;

    fn to_f64(&self) -> f64;

    fn magnitude(&self) -> f64 {
        self.to_f64().abs()
    }

    /// Zero test. Exact values ignore `tol`.
    fn is_negligible(&self, tol: f64) -> bool;

    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self.clone() - other.clone()).is_negligible(tol)
    }

    fn powu(&self, exp: u64) -> Self;

    /// Rank of a matrix. Floats use `tol` as the singular-value cutoff, or
    /// the default `max(rows, cols) * sigma_max * eps` when `None`.
    fn matrix_rank(m: &Matrix<Self>, tol: Option<f64>) -> usize;

    /// Parses `"n/d"`, integers and decimal literals (with optional exponent).
    fn parse_str(s: &str) -> Option<Self>;

    fn to_json(&self) -> Value;

    fn from_json(v: &Value) -> Option<Self> {
        match v {
            Value::Number(n) => Self::parse_str(&n.to_string()),
            Value::String(s) => Self::parse_str(s.trim()),
            _ => None,
        }
    }
}

impl Scalar for f64 {
    const MODE: ValueMode = ValueMode::Float;
    const PIVOTING: PivotStrategy = PivotStrategy::Complete;

    fn from_ratio(numer: i64, denom: i64) -> Self {
        numer as f64 / denom as f64
    }

    fn from_u64(n: u64) -> Self {
        n as f64
    }

    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_negligible(&self, tol: f64) -> bool {
        self.abs() <= tol
    }

    fn powu(&self, exp: u64) -> Self {
        match i32::try_from(exp) {
            Ok(e) => self.powi(e),
            Err(_) => self.powf(exp as f64),
        }
    }

    fn matrix_rank(m: &Matrix<Self>, tol: Option<f64>) -> usize {
        matrix::svd_rank(m, tol)
    }

    fn parse_str(s: &str) -> Option<Self> {
        if let Some(q) = parse_fraction(s) {
            return Some(Scalar::to_f64(&q)).filter(|x| x.is_finite());
        }
        // Rust accepts "inf" and "NaN"; tables must not.
        if !s.bytes().all(|b| b.is_ascii_digit() || b"+-.eE".contains(&b)) {
            return None;
        }
        s.parse::<f64>().ok().filter(|x| x.is_finite())
    }

    fn to_json(&self) -> Value {
        float_json(*self)
    }
}

impl Scalar for Rational {
    const MODE: ValueMode = ValueMode::Exact;
    const PIVOTING: PivotStrategy = PivotStrategy::FirstNonzero;

    fn from_ratio(numer: i64, denom: i64) -> Self {
        Rational::new(numer.into(), denom.into())
    }

    fn from_u64(n: u64) -> Self {
        Rational::from_integer(n.into())
    }

    fn from_f64(x: f64) -> Option<Self> {
        Rational::from_float(x)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_negligible(&self, _tol: f64) -> bool {
        self.is_zero()
    }

    fn powu(&self, exp: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Rational::one();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc *= &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    fn matrix_rank(m: &Matrix<Self>, _tol: Option<f64>) -> usize {
        matrix::bareiss_rank(m)
    }

    fn parse_str(s: &str) -> Option<Self> {
        parse_fraction(s).or_else(|| parse_decimal(s))
    }

    fn to_json(&self) -> Value {
        Value::String(self.to_string())
    }
}

/// `"n/d"` or a bare integer.
fn parse_fraction(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rational::new(n, d))
        }
        None => s.parse::<BigInt>().ok().map(Rational::from_integer),
    }
}

const MAX_DECIMAL_EXPONENT: u32 = 4096;

/// Exact value of a decimal literal such as `-0.125` or `2.5e-3`.
pub fn parse_decimal(s: &str) -> Option<Rational> {
    let s = s.trim();
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("0{int_part}{frac_part}").parse().ok()?;
    if exponent.unsigned_abs() > MAX_DECIMAL_EXPONENT {
        return None;
    }
    let scale = exponent - i32::try_from(frac_part.len()).ok()?;
    let ten = BigInt::from(10u8);
    let value = if scale >= 0 {
        Rational::from_integer(digits * num::pow(ten, scale as usize))
    } else {
        Rational::new(digits, num::pow(ten, scale.unsigned_abs() as usize))
    };
    Some(if negative { -value } else { value })
}

/// JSON number with 17 significant digits, `null` for non-finite values.
pub fn float_json(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let text = format!("{x:.16e}");
    match text.parse::<Number>() {
        Ok(n) => Value::Number(n),
        Err(_) => Value::Null,
    }
}

/// Natural logarithm of a positive rational without overflowing `f64`.
pub fn ln_rational(q: &Rational) -> f64 {
    if !q.is_positive() {
        return f64::NEG_INFINITY;
    }
    ln_bigint(q.numer()) - ln_bigint(q.denom())
}

fn ln_bigint(n: &BigInt) -> f64 {
    debug_assert_eq!(n.sign(), Sign::Plus);
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().map_or(f64::NAN, f64::ln);
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().unwrap_or(f64::NAN);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}
