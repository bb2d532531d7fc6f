//! Numeric back ends shared by the exact and series modules.
//!
//! Every table-building routine is generic over [`Scalar`], which is
//! implemented for arbitrary-precision rationals (oracle mode) and for `f64`
//! (large tables). Float sums go through a Neumaier accumulator.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
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
    type Acc: Accumulator<Self>;

    const EXACT: bool;

    fn from_i64(v: i64) -> Self;
    fn from_ratio(r: &Rational) -> Self;
    fn to_f64(&self) -> f64;
    fn mul_ref(&self, other: &Self) -> Self;
    fn add_ref(&self, other: &Self) -> Self;
    fn sub_ref(&self, other: &Self) -> Self;
    fn div_ref(&self, other: &Self) -> Self;
    fn is_negative(&self) -> bool;

    fn from_u64(v: u64) -> Self {
        Self::from_i64(i64::try_from(v).expect("integer fits in i64"))
    }

    fn acc() -> Self::Acc {
        Self::Acc::default()
    }

    fn pow_u32(&self, e: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..e {
            out = out.mul_ref(self);
        }
        out
    }
}

/// Summation helper; compensated for floats, plain for exact values.
pub trait Accumulator<T>: Default {
    fn add(&mut self, v: &T);
    fn add_product(&mut self, a: &T, b: &T);
    fn value(&self) -> T;
}

/// Exact sum kept over a running common denominator, normalized once at the end.
#[derive(Clone, Debug)]
pub struct ExactAcc {
    num: BigInt,
    den: BigInt,
}

impl Default for ExactAcc {
    fn default() -> Self {
        ExactAcc {
            num: BigInt::zero(),
            den: BigInt::one(),
        }
    }
}

impl ExactAcc {
    fn push_parts(&mut self, n: BigInt, d: BigInt) {
        if n.is_zero() {
            return;
        }
        if d == self.den {
            self.num += n;
        } else if (&self.den % &d).is_zero() {
            self.num += n * (&self.den / &d);
        } else if (&d % &self.den).is_zero() {
            self.num = &self.num * (&d / &self.den) + n;
            self.den = d;
        } else {
            let g = self.den.gcd(&d);
            let a = &d / &g;
            self.num = &self.num * &a + n * (&self.den / &g);
            self.den *= a;
        }
    }
}

impl Accumulator<Rational> for ExactAcc {
    fn add(&mut self, v: &Rational) {
        if !v.is_zero() {
            self.push_parts(v.numer().clone(), v.denom().clone());
        }
    }
    fn add_product(&mut self, a: &Rational, b: &Rational) {
        if !a.is_zero() && !b.is_zero() {
            self.push_parts(a.numer() * b.numer(), a.denom() * b.denom());
        }
    }
    fn value(&self) -> Rational {
        Rational::new(self.num.clone(), self.den.clone())
    }
}

/// Neumaier's variant of Kahan summation.
#[derive(Default, Clone, Copy, Debug)]
pub struct NeumaierAcc {
    sum: f64,
    comp: f64,
}

impl NeumaierAcc {
    #[inline]
    pub fn push(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Accumulator<f64> for NeumaierAcc {
    #[inline]
    fn add(&mut self, v: &f64) {
        self.push(*v);
    }
    #[inline]
    fn add_product(&mut self, a: &f64, b: &f64) {
        self.push(a * b);
    }
    #[inline]
    fn value(&self) -> f64 {
        self.total()
    }
}

impl Scalar for Rational {
    type Acc = ExactAcc;
    const EXACT: bool = true;

    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }
    fn from_ratio(r: &Rational) -> Self {
        r.clone()
    }
    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn div_ref(&self, other: &Self) -> Self {
        self / other
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
}

impl Scalar for f64 {
    type Acc = NeumaierAcc;
    const EXACT: bool = false;

    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_ratio(r: &Rational) -> Self {
        ratio_to_f64(r)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn div_ref(&self, other: &Self) -> Self {
        self / other
    }
    fn is_negative(&self) -> bool {
        *self < 0.0
    }
}

/// Converts a rational to the nearest-ish double, robust to huge numerators
/// and denominators.
pub fn ratio_to_f64(r: &Rational) -> f64 {
    if let Some(v) = ToPrimitive::to_f64(r) {
        if v.is_finite() && (v != 0.0 || r.is_zero()) {
            return v;
        }
    }
    // Scale both sides down to a common bit length before dividing.
    let num = r.numer();
    let den = r.denom();
    let nb = num.bits() as i64;
    let db = den.bits() as i64;
    let shift_n = (nb - 60).max(0) as usize;
    let shift_d = (db - 60).max(0) as usize;
    let n = (num >> shift_n).to_f64().unwrap_or(0.0);
    let d = (den >> shift_d).to_f64().unwrap_or(1.0);
    (n / d) * 2f64.powi((shift_n as i64 - shift_d as i64) as i32)
}

pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Formats a rational as `p/q` (or `p` when integral).
pub fn format_ratio(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p/q` or an integer.
pub fn parse_ratio(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                None
            } else {
                Some(Rational::new(p, q))
            }
        }
        None => s.parse::<BigInt>().ok().map(Rational::from_integer),
    }
}

/// Serde adapter writing rationals as `"p/q"` strings.
pub mod ratio_string {
    use super::{format_ratio, parse_ratio, Rational};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_ratio(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_ratio(&s).ok_or_else(|| D::Error::custom(format!("invalid rational `{s}`")))
    }
}
