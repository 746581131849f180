//! Exact rational numbers with an allocation-free fast path.
//!
//! Values whose numerator and denominator fit in an `i64` are stored inline and
//! combined with `i128` intermediates; anything larger spills into a
//! [`BigRational`]. The representation is canonical (reduced, positive
//! denominator, inline whenever it fits), so structural equality is value
//! equality.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Clone)]
pub struct Rational(Repr);

#[derive(Clone)]
enum Repr {
    Small { num: i64, den: i64 },
    Big(Box<BigRational>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    if a == 0 {
        return b;
    }
    if b == 0 {
        return a;
    }
    let shift = (a | b).trailing_zeros();
    a >>= a.trailing_zeros();
    loop {
        b >>= b.trailing_zeros();
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        b -= a;
        if b == 0 {
            return a << shift;
        }
    }
}

fn fits(v: i128) -> bool {
    v > i64::MIN as i128 && v <= i64::MAX as i128
}

impl Rational {
    pub fn zero() -> Self {
        Rational(Repr::Small { num: 0, den: 1 })
    }

    pub fn one() -> Self {
        Rational(Repr::Small { num: 1, den: 1 })
    }

    pub fn from_int(v: i64) -> Self {
        if v == i64::MIN {
            return Self::from_big(BigRational::from_integer(BigInt::from(v)));
        }
        Rational(Repr::Small { num: v, den: 1 })
    }

    /// `num / den`; panics when `den == 0`.
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Self::from_i128(num as i128, den as i128)
    }

    fn from_i128(num: i128, den: i128) -> Self {
        debug_assert!(den != 0);
        let (mut n, mut d) = if den < 0 { (-num, -den) } else { (num, den) };
        if n == 0 {
            return Self::zero();
        }
        let g = gcd_u128(n.unsigned_abs(), d as u128) as i128;
        if g > 1 {
            n /= g;
            d /= g;
        }
        if fits(n) && fits(d) {
            Rational(Repr::Small { num: n as i64, den: d as i64 })
        } else {
            Rational(Repr::Big(Box::new(BigRational::new_raw(BigInt::from(n), BigInt::from(d)))))
        }
    }

    /// Canonicalises an arbitrary big rational (demotes to the inline form when possible).
    pub fn from_big(v: BigRational) -> Self {
        let v = v.reduced();
        match (v.numer().to_i64(), v.denom().to_i64()) {
            (Some(n), Some(d)) if n != i64::MIN => Rational(Repr::Small { num: n, den: d }),
            _ => Rational(Repr::Big(Box::new(v))),
        }
    }

    pub fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small { num, den } => BigRational::new_raw(BigInt::from(*num), BigInt::from(*den)),
            Repr::Big(b) => (**b).clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small { num: 0, .. })
    }

    pub fn is_positive(&self) -> bool {
        match &self.0 {
            Repr::Small { num, .. } => *num > 0,
            Repr::Big(b) => b.is_positive(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small { num, .. } => *num < 0,
            Repr::Big(b) => b.is_negative(),
        }
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small { den, .. } => *den == 1,
            Repr::Big(b) => b.is_integer(),
        }
    }

    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    pub fn recip(&self) -> Self {
        Self::one() / self
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn numer_string(&self) -> String {
        match &self.0 {
            Repr::Small { num, .. } => num.to_string(),
            Repr::Big(b) => b.numer().to_string(),
        }
    }

    pub fn denom_string(&self) -> String {
        match &self.0 {
            Repr::Small { den, .. } => den.to_string(),
            Repr::Big(b) => b.denom().to_string(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small { num, den } => *num as f64 / *den as f64,
            Repr::Big(b) => b.to_f64().unwrap_or(f64::NAN),
        }
    }

    /// Integer value if this is an integer that fits in `i64`.
    pub fn to_i64(&self) -> Option<i64> {
        match &self.0 {
            Repr::Small { num, den: 1 } => Some(*num),
            _ => None,
        }
    }

    /// Decimal rendering for human consumption; never used in comparisons.
    pub fn to_decimal_string(&self, digits: usize) -> String {
        format!("{:.*}", digits, self.to_f64())
    }
}

impl Default for Rational {
    fn default() -> Self {
        Self::zero()
    }
}

impl From<i64> for Rational {
    fn from(v: i64) -> Self {
        Self::from_int(v)
    }
}

impl From<i32> for Rational {
    fn from(v: i32) -> Self {
        Self::from_int(v as i64)
    }
}

impl From<u32> for Rational {
    fn from(v: u32) -> Self {
        Self::from_int(v as i64)
    }
}

impl From<u64> for Rational {
    fn from(v: u64) -> Self {
        Self::from_i128(v as i128, 1)
    }
}

impl From<usize> for Rational {
    fn from(v: usize) -> Self {
        Self::from_i128(v as i128, 1)
    }
}

impl From<BigRational> for Rational {
    fn from(v: BigRational) -> Self {
        Self::from_big(v)
    }
}

impl PartialEq for Rational {
    fn eq(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Repr::Small { num: a, den: b }, Repr::Small { num: c, den: d }) => a == c && b == d,
            (Repr::Big(a), Repr::Big(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Rational {}

impl Hash for Rational {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match &self.0 {
            Repr::Small { num, den } => {
                0u8.hash(state);
                num.hash(state);
                den.hash(state);
            }
            Repr::Big(b) => {
                1u8.hash(state);
                b.hash(state);
            }
        }
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small { num: a, den: b }, Repr::Small { num: c, den: d }) => {
                if b == d {
                    a.cmp(c)
                } else {
                    (*a as i128 * *d as i128).cmp(&(*c as i128 * *b as i128))
                }
            }
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn add_ref(x: &Rational, y: &Rational) -> Rational {
    match (&x.0, &y.0) {
        (Repr::Small { num: 0, .. }, _) => y.clone(),
        (_, Repr::Small { num: 0, .. }) => x.clone(),
        (Repr::Small { num: a, den: b }, Repr::Small { num: c, den: d }) => {
            if b == d {
                Rational::from_i128(*a as i128 + *c as i128, *b as i128)
            } else {
                Rational::from_i128(*a as i128 * *d as i128 + *c as i128 * *b as i128, *b as i128 * *d as i128)
            }
        }
        _ => Rational::from_big(x.to_big() + y.to_big()),
    }
}

fn mul_ref(x: &Rational, y: &Rational) -> Rational {
    match (&x.0, &y.0) {
        (Repr::Small { num: 0, .. }, _) | (_, Repr::Small { num: 0, .. }) => Rational::zero(),
        (Repr::Small { num: a, den: b }, Repr::Small { num: c, den: d }) => {
            Rational::from_i128(*a as i128 * *c as i128, *b as i128 * *d as i128)
        }
        _ => Rational::from_big(x.to_big() * y.to_big()),
    }
}

fn div_ref(x: &Rational, y: &Rational) -> Rational {
    assert!(!y.is_zero(), "division by zero rational");
    match (&x.0, &y.0) {
        (Repr::Small { num: 0, .. }, _) => Rational::zero(),
        (Repr::Small { num: a, den: b }, Repr::Small { num: c, den: d }) => {
            Rational::from_i128(*a as i128 * *d as i128, *b as i128 * *c as i128)
        }
        _ => Rational::from_big(x.to_big() / y.to_big()),
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        match &self.0 {
            Repr::Small { num, den } => Rational(Repr::Small { num: -num, den: *den }),
            Repr::Big(b) => Rational::from_big(-(**b).clone()),
        }
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        -&self
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $f:expr) => {
        impl $tr<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                $f(self, rhs)
            }
        }
        impl $tr<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                $f(&self, &rhs)
            }
        }
        impl $tr<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                $f(&self, rhs)
            }
        }
        impl $tr<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                $f(self, &rhs)
            }
        }
    };
}

binop!(Add, add, add_ref);
binop!(Sub, sub, |a: &Rational, b: &Rational| add_ref(a, &-b));
binop!(Mul, mul, mul_ref);
binop!(Div, div, div_ref);

macro_rules! assignop {
    ($tr:ident, $method:ident, $f:expr) => {
        impl $tr<&Rational> for Rational {
            fn $method(&mut self, rhs: &Rational) {
                *self = $f(&*self, rhs);
            }
        }
        impl $tr<Rational> for Rational {
            fn $method(&mut self, rhs: Rational) {
                *self = $f(&*self, &rhs);
            }
        }
    };
}

assignop!(AddAssign, add_assign, add_ref);
assignop!(SubAssign, sub_assign, |a: &Rational, b: &Rational| add_ref(a, &-b));
assignop!(MulAssign, mul_assign, mul_ref);
assignop!(DivAssign, div_assign, div_ref);

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, v| acc + v)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, v| acc + v)
    }
}

impl Zero for Rational {
    fn zero() -> Self {
        Rational::zero()
    }
    fn is_zero(&self) -> bool {
        Rational::is_zero(self)
    }
}

impl One for Rational {
    fn one() -> Self {
        Rational::one()
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small { num, den: 1 } => write!(f, "{num}"),
            Repr::Small { num, den } => write!(f, "{num}/{den}"),
            Repr::Big(b) if b.is_integer() => write!(f, "{}", b.numer()),
            Repr::Big(b) => write!(f, "{}/{}", b.numer(), b.denom()),
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_bigint(s: &str, whole: &str) -> Result<BigInt, ParseRationalError> {
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseRationalError::Invalid(whole.to_string()));
    }
    s.parse::<BigInt>().map_err(|_| ParseRationalError::Invalid(whole.to_string()))
}

/// Accepts `p`, `p/q` and finite decimals such as `-0.125` (parsed exactly).
impl FromStr for Rational {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.is_empty() {
            return Err(ParseRationalError::Empty);
        }
        if let Some((n, d)) = t.split_once('/') {
            let n = parse_bigint(n.trim(), t)?;
            let d = parse_bigint(d.trim(), t)?;
            if d.is_zero() {
                return Err(ParseRationalError::ZeroDenominator(t.to_string()));
            }
            return Ok(Rational::from_big(BigRational::new(n, d)));
        }
        if let Some((int, frac)) = t.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(ParseRationalError::Invalid(t.to_string()));
            }
            let negative = int.starts_with('-');
            let int_part =
                if int.is_empty() || int == "-" || int == "+" { BigInt::zero() } else { parse_bigint(int, t)? };
            let scale = BigInt::from(10u32).pow(frac.len() as u32);
            let frac_part: BigInt = frac.parse().map_err(|_| ParseRationalError::Invalid(t.to_string()))?;
            let magnitude = int_part.abs() * &scale + frac_part;
            let numer = if negative { -magnitude } else { magnitude };
            return Ok(Rational::from_big(BigRational::new(numer, scale)));
        }
        Ok(Rational::from_big(BigRational::from_integer(parse_bigint(t, t)?)))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

struct RationalVisitor;

impl<'de> Visitor<'de> for RationalVisitor {
    type Value = Rational;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an integer or a rational string such as \"3/4\"")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
        Ok(Rational::from_int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
        Ok(Rational::from(v))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
        v.parse().map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(RationalVisitor)
    }
}

/// Shorthand used throughout the crate and its tests.
pub fn q(num: i64, den: i64) -> Rational {
    Rational::new(num, den)
}
