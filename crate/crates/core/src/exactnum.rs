//! Exact numbers for angular momentum work.
//!
//! Spins and magnetic quantum numbers are stored as [`HalfInt`] (twice the
//! value), and every Clebsch-Gordan or Racah coefficient lives in
//! [`SqrtRational`], a signed square root of a rational number.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Div, Mul, Neg};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExactError {
    #[error("cannot parse {0:?} as a half-integer")]
    ParseHalfInt(String),
    #[error("cannot parse {0:?} as a signed square root of a rational")]
    ParseSqrt(String),
    #[error("radicands are incompatible; approximate sum is {approx}")]
    IncompatibleRadicands { approx: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite value {0}")]
    NonFinite(f64),
}

/// A half-integer stored as twice its value, so spin 3/2 has `twice == 3`.
///
/// The same type carries spins (nonnegative) and magnetic quantum numbers
/// (any sign).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt {
    twice: i32,
}

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt { twice: 0 };
    pub const HALF: HalfInt = HalfInt { twice: 1 };
    pub const ONE: HalfInt = HalfInt { twice: 2 };

    #[inline]
    pub const fn from_twice(twice: i32) -> Self {
        HalfInt { twice }
    }

    #[inline]
    pub const fn from_int(n: i32) -> Self {
        HalfInt { twice: 2 * n }
    }

    /// Twice the value; also the Dynkin label of a spin.
    #[inline]
    pub const fn twice(self) -> i32 {
        self.twice
    }

    /// Dimension `2j + 1` of the spin-`j` irrep.
    #[inline]
    pub const fn dim(self) -> i32 {
        self.twice + 1
    }

    #[inline]
    pub const fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.twice) / 2.0
    }

    /// The rational value `twice / 2`.
    pub fn to_rational(self) -> BigRational {
        BigRational::new(BigInt::from(self.twice), BigInt::from(2))
    }

    /// Magnetic labels `j, j-1, ..., -j` (the ladder order used everywhere).
    pub fn magnetic_range(self) -> impl Iterator<Item = HalfInt> + Clone {
        let t = self.twice;
        (0..=t).map(move |k| HalfInt::from_twice(t - 2 * k))
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, o: HalfInt) -> HalfInt {
        HalfInt::from_twice(self.twice + o.twice)
    }
}

impl std::ops::Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, o: HalfInt) -> HalfInt {
        HalfInt::from_twice(self.twice - o.twice)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt::from_twice(-self.twice)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl FromStr for HalfInt {
    type Err = ExactError;

    /// Accepts `"3"`, `"3/2"`, `"1.5"`, `"2.0"` and a leading minus sign.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = || ExactError::ParseHalfInt(text.to_string());
        let s = text.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        if body.is_empty() {
            return Err(err());
        }
        let twice: i32 = if let Some((num, den)) = body.split_once('/') {
            if den.trim() != "2" {
                return Err(err());
            }
            parse_digits(num.trim()).ok_or_else(err)?
        } else if let Some((int, frac)) = body.split_once('.') {
            let whole = if int.is_empty() {
                0
            } else {
                parse_digits(int).ok_or_else(err)?
            };
            let frac = frac.trim_end_matches('0');
            let half = match frac {
                "" => 0,
                "5" => 1,
                _ => return Err(err()),
            };
            whole
                .checked_mul(2)
                .and_then(|w| w.checked_add(half))
                .ok_or_else(err)?
        } else {
            parse_digits(body)
                .ok_or_else(err)?
                .checked_mul(2)
                .ok_or_else(err)?
        };
        Ok(HalfInt::from_twice(if neg { -twice } else { twice }))
    }
}

fn parse_digits(s: &str) -> Option<i32> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Parse a spin or magnetic label from text.
pub fn halfint_parse(text: &str) -> Result<HalfInt, ExactError> {
    text.parse()
}

impl Serialize for HalfInt {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Int(i64),
            Float(f64),
        }
        match Repr::deserialize(d)? {
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
            Repr::Int(n) => i32::try_from(n)
                .ok()
                .and_then(|n| n.checked_mul(2))
                .map(HalfInt::from_twice)
                .ok_or_else(|| serde::de::Error::custom("spin out of range")),
            Repr::Float(x) => format!("{x}").parse().map_err(serde::de::Error::custom),
        }
    }
}

/// `sign * sqrt(p / q)` with `p / q` a nonnegative rational.
///
/// Stored as the signed square `sign * p / q`, which keeps products and
/// quotients exact and makes equality a plain rational comparison.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SqrtRational(BigRational);

impl SqrtRational {
    pub fn zero() -> Self {
        SqrtRational(BigRational::zero())
    }

    pub fn one() -> Self {
        SqrtRational(BigRational::one())
    }

    /// Build `sign * sqrt(num / den)`. A zero sign or numerator gives zero.
    pub fn new(sign: i32, num: impl Into<BigInt>, den: impl Into<BigInt>) -> Self {
        let num = num.into();
        let den = den.into();
        assert!(!den.is_zero(), "zero denominator");
        let r = BigRational::new(num.abs(), den.abs());
        match sign.cmp(&0) {
            Ordering::Greater => SqrtRational(r),
            Ordering::Less => SqrtRational(-r),
            Ordering::Equal => SqrtRational::zero(),
        }
    }

    /// The exact value of a rational number `q`.
    pub fn from_rational(q: &BigRational) -> Self {
        let sq = q * q;
        if q.is_negative() {
            SqrtRational(-sq)
        } else {
            SqrtRational(sq)
        }
    }

    pub fn from_integer(n: i64) -> Self {
        Self::from_rational(&BigRational::from_integer(BigInt::from(n)))
    }

    /// `+sqrt(q)` for a nonnegative rational `q`.
    pub fn sqrt_of(q: BigRational) -> Self {
        assert!(!q.is_negative(), "sqrt of a negative rational");
        SqrtRational(q)
    }

    /// Reconstruct from the signed square `sign * value^2`.
    pub fn from_signed_square(sq: BigRational) -> Self {
        SqrtRational(sq)
    }

    pub fn signed_square(&self) -> &BigRational {
        &self.0
    }

    /// `value^2`, always nonnegative.
    pub fn square(&self) -> BigRational {
        self.0.abs()
    }

    /// The radicand `p / q`; equal to [`square`](Self::square).
    pub fn radicand(&self) -> BigRational {
        self.square()
    }

    pub fn sign(&self) -> i32 {
        match self.0.numer().sign() {
            Sign::Plus => 1,
            Sign::Minus => -1,
            Sign::NoSign => 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn abs(&self) -> Self {
        SqrtRational(self.0.abs())
    }

    /// The value as a rational, when the radicand is a perfect square.
    pub fn to_rational(&self) -> Option<BigRational> {
        let r = self.square();
        let n = exact_sqrt(r.numer().magnitude())?;
        let d = exact_sqrt(r.denom().magnitude())?;
        let v = BigRational::new(BigInt::from(n), BigInt::from(d));
        Some(if self.sign() < 0 { -v } else { v })
    }

    pub fn checked_div(&self, other: &SqrtRational) -> Result<SqrtRational, ExactError> {
        if other.is_zero() {
            return Err(ExactError::DivisionByZero);
        }
        Ok(SqrtRational(&self.0 / &other.0))
    }

    /// Exact sum when the radicands agree up to a rational square factor.
    pub fn checked_add(&self, other: &SqrtRational) -> Result<SqrtRational, ExactError> {
        let mut acc = SqrtSum::new();
        acc.push(self);
        acc.push(other);
        acc.to_sqrt_rational()
    }

    /// Nearest double; accurate to within a couple of ulps.
    pub fn to_f64(&self) -> f64 {
        let mag = rational_to_f64(&self.square()).sqrt();
        f64::from(self.sign()) * mag
    }

    pub fn to_approx(&self) -> ApproxReal {
        ApproxReal(self.to_f64())
    }

    /// Split as `c * sqrt(r)` with `r` free of small square factors, for display.
    pub fn surd_form(&self) -> (BigRational, BigUint) {
        if self.is_zero() {
            return (BigRational::zero(), BigUint::one());
        }
        let sq = self.square();
        // sqrt(p/q) = sqrt(p*q)/q
        let pq = sq.numer().magnitude() * sq.denom().magnitude();
        let (outside, inside) = extract_square(&pq);
        let c = BigRational::new(BigInt::from(outside), sq.denom().clone());
        let c = if self.sign() < 0 { -c } else { c };
        (c, inside)
    }

    /// Human-friendly rendering such as `-sqrt(5)/4` or `1/6`.
    pub fn pretty(&self) -> String {
        let (c, r) = self.surd_form();
        if c.is_zero() {
            return "0".into();
        }
        if r.is_one() {
            return c.to_string();
        }
        let sign = if c.is_negative() { "-" } else { "" };
        let c = c.abs();
        let num = c.numer();
        let den = c.denom();
        let mut s = String::from(sign);
        if !num.is_one() {
            s.push_str(&format!("{num}*"));
        }
        s.push_str(&format!("sqrt({r})"));
        if !den.is_one() {
            s.push_str(&format!("/{den}"));
        }
        s
    }
}

fn exact_sqrt(n: &BigUint) -> Option<BigUint> {
    let r = n.sqrt();
    (&r * &r == *n).then_some(r)
}

fn extract_square(n: &BigUint) -> (BigUint, BigUint) {
    let mut outside = BigUint::one();
    let mut inside = n.clone();
    let mut p = 2u32;
    while p < 2000 {
        let pp = BigUint::from(p * p);
        if pp > inside {
            break;
        }
        while (&inside % &pp).is_zero() {
            inside /= &pp;
            outside *= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if let Some(r) = exact_sqrt(&inside) {
        outside *= r;
        inside = BigUint::one();
    }
    (outside, inside)
}

pub(crate) fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // to_f64 only fails on overflow; fall back to scaled division.
        let n = q.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = q.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

impl Mul for SqrtRational {
    type Output = SqrtRational;
    fn mul(self, o: SqrtRational) -> SqrtRational {
        SqrtRational(self.0 * o.0)
    }
}

impl Mul<&SqrtRational> for &SqrtRational {
    type Output = SqrtRational;
    fn mul(self, o: &SqrtRational) -> SqrtRational {
        SqrtRational(&self.0 * &o.0)
    }
}

impl Div for SqrtRational {
    type Output = SqrtRational;
    fn div(self, o: SqrtRational) -> SqrtRational {
        self.checked_div(&o).expect("division by zero SqrtRational")
    }
}

impl Neg for SqrtRational {
    type Output = SqrtRational;
    fn neg(self) -> SqrtRational {
        SqrtRational(-self.0)
    }
}

impl PartialOrd for SqrtRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SqrtRational {
    // sign(x) x^2 is monotone in x
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl From<i64> for SqrtRational {
    fn from(n: i64) -> Self {
        SqrtRational::from_integer(n)
    }
}

/// Canonical text form: `0`, `sqrt(p/q)` or `-sqrt(p/q)`.
impl fmt::Display for SqrtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let sq = self.square();
        let sign = if self.sign() < 0 { "-" } else { "" };
        write!(f, "{sign}sqrt({}/{})", sq.numer(), sq.denom())
    }
}

impl FromStr for SqrtRational {
    type Err = ExactError;

    /// Accepts the display form and the `s*sqrt(p/q)` form with `s` in {-1, 0, 1}.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = || ExactError::ParseSqrt(text.to_string());
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if s == "0" {
            return Ok(SqrtRational::zero());
        }
        let (sign, rest) = if let Some((pre, post)) = s.split_once('*') {
            let sign: i32 = pre.parse().map_err(|_| err())?;
            if !(-1..=1).contains(&sign) {
                return Err(err());
            }
            (sign, post.to_string())
        } else if let Some(post) = s.strip_prefix('-') {
            (-1, post.to_string())
        } else {
            (1, s.clone())
        };
        let inner = rest
            .strip_prefix("sqrt(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(err)?;
        let (p, q) = match inner.split_once('/') {
            Some((p, q)) => (p, q),
            None => (inner, "1"),
        };
        let p: BigInt = p.parse().map_err(|_| err())?;
        let q: BigInt = q.parse().map_err(|_| err())?;
        if p.is_negative() || q.is_zero() || q.is_negative() {
            return Err(err());
        }
        Ok(SqrtRational::new(sign, p, q))
    }
}

#[derive(Serialize, Deserialize)]
struct SqrtRationalJson {
    sign: i32,
    num: serde_json::Value,
    den: serde_json::Value,
}

fn bigint_to_json(n: &BigInt) -> serde_json::Value {
    match n.to_u64() {
        Some(v) => serde_json::Value::from(v),
        None => serde_json::Value::String(n.to_string()),
    }
}

fn bigint_from_json(v: &serde_json::Value) -> Option<BigInt> {
    match v {
        serde_json::Value::Number(n) => n.as_u64().map(BigInt::from),
        serde_json::Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

/// JSON form `{"sign": s, "num": p, "den": q}`.
impl Serialize for SqrtRational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let sq = self.square();
        SqrtRationalJson {
            sign: self.sign(),
            num: bigint_to_json(sq.numer()),
            den: bigint_to_json(sq.denom()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SqrtRational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = SqrtRationalJson::deserialize(d)?;
        let num = bigint_from_json(&j.num).ok_or_else(|| serde::de::Error::custom("bad num"))?;
        let den = bigint_from_json(&j.den).ok_or_else(|| serde::de::Error::custom("bad den"))?;
        if den.is_zero() || !(-1..=1).contains(&j.sign) {
            return Err(serde::de::Error::custom("invalid SqrtRational"));
        }
        Ok(SqrtRational::new(j.sign, num, den))
    }
}

/// Exact accumulator for sums of [`SqrtRational`] terms.
///
/// Terms are grouped by radicand class (radicands whose ratio is a rational
/// square); the total is a single `SqrtRational` only when one class
/// survives.
#[derive(Clone, Debug, Default)]
pub struct SqrtSum {
    // (representative radicand, rational coefficient of its square root)
    groups: Vec<(BigRational, BigRational)>,
}

impl SqrtSum {
    pub fn new() -> Self {
        SqrtSum::default()
    }

    pub fn push(&mut self, term: &SqrtRational) {
        if term.is_zero() {
            return;
        }
        let rad = term.square();
        let sign = BigRational::from_integer(BigInt::from(term.sign()));
        for (r, c) in self.groups.iter_mut() {
            let ratio = &rad / &*r;
            if let (Some(n), Some(d)) = (
                exact_sqrt(ratio.numer().magnitude()),
                exact_sqrt(ratio.denom().magnitude()),
            ) {
                *c += sign * BigRational::new(BigInt::from(n), BigInt::from(d));
                return;
            }
        }
        self.groups.push((rad, sign));
    }

    pub fn add_product(&mut self, a: &SqrtRational, b: &SqrtRational) {
        self.push(&(a * b));
    }

    pub fn to_f64(&self) -> f64 {
        self.groups
            .iter()
            .map(|(r, c)| rational_to_f64(c) * rational_to_f64(r).sqrt())
            .sum()
    }

    /// The exact total, or the approximate value when radicand classes differ.
    pub fn to_sqrt_rational(&self) -> Result<SqrtRational, ExactError> {
        let live: Vec<_> = self.groups.iter().filter(|(_, c)| !c.is_zero()).collect();
        match live.as_slice() {
            [] => Ok(SqrtRational::zero()),
            [(r, c)] => Ok(SqrtRational::from_rational(c) * SqrtRational::sqrt_of(r.clone())),
            _ => Err(ExactError::IncompatibleRadicands {
                approx: self.to_f64(),
            }),
        }
    }
}

/// A finite binary64 value, the escape hatch out of exact arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub struct ApproxReal(f64);

impl ApproxReal {
    pub fn new(value: f64) -> Result<Self, ExactError> {
        if value.is_finite() {
            Ok(ApproxReal(value))
        } else {
            Err(ExactError::NonFinite(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Exact product of two signed square roots.
pub fn sqrtrational_mul(a: &SqrtRational, b: &SqrtRational) -> SqrtRational {
    a * b
}

pub fn sqrtrational_to_approx(a: &SqrtRational) -> ApproxReal {
    a.to_approx()
}

/// Small helper for building rationals in tests and tables.
pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Integer `n!` as a big integer, cached.
pub(crate) fn factorial(n: u32) -> BigInt {
    use parking_lot::RwLock;
    use std::sync::OnceLock;
    static TABLE: OnceLock<RwLock<Vec<BigInt>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| RwLock::new(vec![BigInt::one()]));
    let n = n as usize;
    if let Some(v) = table.read().get(n) {
        return v.clone();
    }
    let mut t = table.write();
    while t.len() <= n {
        let k = t.len();
        let next = &t[k - 1] * BigInt::from(k);
        t.push(next);
    }
    t[n].clone()
}
