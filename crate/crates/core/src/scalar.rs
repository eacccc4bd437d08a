//! Scalar abstraction shared by the f64, multiprecision and exact-rational paths.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use dashu_base::{Abs, BitTest, SquareRoot, UnsignedAbs};
use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_ratio::RBig;

/// Ordered field with an evaluation context (precision for multiprecision types).
pub trait Field:
    Clone
    + fmt::Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    type Ctx: Copy + fmt::Debug + Send + Sync + 'static;

    /// Exact conversion of a double (rounded to the context precision where applicable).
    fn from_f64(x: f64, ctx: Self::Ctx) -> Self;
    fn to_f64(&self) -> f64;
    fn ctx(&self) -> Self::Ctx;
    /// Context used when no operand supplies one.
    fn default_ctx() -> Self::Ctx;
    fn is_zero(&self) -> bool;

    fn zero(ctx: Self::Ctx) -> Self {
        Self::from_f64(0.0, ctx)
    }
    fn one(ctx: Self::Ctx) -> Self {
        Self::from_f64(1.0, ctx)
    }
    /// Constant in the same context as `self`.
    fn lit(&self, x: f64) -> Self {
        Self::from_f64(x, self.ctx())
    }
    fn is_negative(&self) -> bool {
        *self < self.lit(0.0)
    }
    fn is_positive(&self) -> bool {
        *self > self.lit(0.0)
    }
    fn abs(&self) -> Self {
        if self.is_negative() {
            -self.clone()
        } else {
            self.clone()
        }
    }
    fn recip(&self) -> Self {
        self.lit(1.0) / self.clone()
    }
    /// `log2 |x|` without overflow; `-inf` for zero.
    fn log2_abs(&self) -> f64 {
        self.to_f64().abs().log2()
    }
    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

/// Field with square roots and a notion of unit roundoff.
pub trait Real: Field {
    fn sqrt(&self) -> Self;
    /// Unit roundoff of the context (0 for exact arithmetic).
    fn unit_roundoff(ctx: Self::Ctx) -> f64;
}

impl Field for f64 {
    type Ctx = ();
    fn from_f64(x: f64, _: ()) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn ctx(&self) {}
    fn default_ctx() {}
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
}

impl Real for f64 {
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn unit_roundoff(_: ()) -> f64 {
        f64::EPSILON / 2.0
    }
}

type Fb = FBig<HalfEven, 2>;

/// Binary multiprecision float with a fixed number of mantissa bits.
#[derive(Clone, PartialEq)]
pub struct Mpf(Fb);

/// Working precision used unless overridden.
pub const DEFAULT_BITS: usize = 256;

/// Mantissa precision in bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits(pub usize);

impl Mpf {
    pub fn new(x: f64, bits: usize) -> Self {
        Self::from_f64(x, Bits(bits))
    }
    pub fn inner(&self) -> &FBig<HalfEven, 2> {
        &self.0
    }
    pub fn precision(&self) -> usize {
        self.0.precision()
    }
    /// Re-round to another precision.
    pub fn with_bits(&self, bits: usize) -> Self {
        Mpf(self.0.clone().with_precision(bits).value())
    }
    /// Parse a decimal or `p/q` string at the given precision.
    pub fn parse(s: &str, bits: usize) -> Option<Self> {
        let r = parse_rational(s)?;
        Some(Exact(r).to_mpf(bits))
    }
    /// The exact rational value.
    pub fn to_exact(&self) -> Exact {
        let repr = self.0.repr();
        let sig = RBig::from(repr.significand().clone());
        let e = repr.exponent();
        let pow = RBig::from(dashu_int::UBig::ONE << e.unsigned_abs());
        Exact(if e >= 0 { sig * pow } else { sig / pow })
    }
    /// Decimal representation with enough digits to recover the value.
    pub fn to_decimal_string(&self) -> String {
        let digits = (self.precision() as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2;
        let d = self.0.clone().with_base::<10>().value();
        let d = d.with_precision(digits).value();
        d.to_string()
    }
}

impl fmt::Debug for Mpf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal_string())
    }
}

impl fmt::Display for Mpf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal_string())
    }
}

impl PartialOrd for Mpf {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

fn widest(a: &Mpf, b: &Mpf) -> usize {
    a.precision().max(b.precision())
}

macro_rules! mpf_binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for Mpf {
            type Output = Mpf;
            fn $m(self, rhs: Mpf) -> Mpf {
                let p = widest(&self, &rhs);
                let r = self.0.with_precision(p).value() $op rhs.0.with_precision(p).value();
                Mpf(r)
            }
        }
    };
}
mpf_binop!(Add, add, +);
mpf_binop!(Sub, sub, -);
mpf_binop!(Mul, mul, *);
mpf_binop!(Div, div, /);

impl Neg for Mpf {
    type Output = Mpf;
    fn neg(self) -> Mpf {
        Mpf(-self.0)
    }
}

impl Field for Mpf {
    type Ctx = Bits;
    fn from_f64(x: f64, ctx: Bits) -> Self {
        let v = Fb::try_from(x).expect("finite double");
        Mpf(v.with_precision(ctx.0).value())
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }
    fn ctx(&self) -> Bits {
        Bits(self.precision())
    }
    fn default_ctx() -> Bits {
        Bits(DEFAULT_BITS)
    }
    fn is_zero(&self) -> bool {
        self.0.repr().is_zero()
    }
    fn abs(&self) -> Self {
        Mpf(self.0.clone().abs())
    }
    fn log2_abs(&self) -> f64 {
        let repr = self.0.repr();
        if repr.is_zero() {
            return f64::NEG_INFINITY;
        }
        let mag = repr.significand().clone().unsigned_abs();
        let shift = mag.bit_len().saturating_sub(60);
        let top: f64 = (mag >> shift).to_f64().value();
        top.log2() + shift as f64 + repr.exponent() as f64
    }
}

impl Real for Mpf {
    fn sqrt(&self) -> Self {
        Mpf(self.0.sqrt())
    }
    fn unit_roundoff(ctx: Bits) -> f64 {
        2f64.powi(-(ctx.0.min(1000) as i32))
    }
}

/// Exact rational number.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(pub RBig);

impl Exact {
    pub fn from_ratio(p: i64, q: i64) -> Self {
        Exact(RBig::from(p) / RBig::from(q))
    }
    pub fn parse(s: &str) -> Option<Self> {
        parse_rational(s).map(Exact)
    }
    pub fn to_mpf(&self, bits: usize) -> Mpf {
        let num = Fb::from(self.0.numerator().clone()).with_precision(bits).value();
        let den = Fb::from(self.0.denominator().clone()).with_precision(bits).value();
        Mpf(num / den)
    }
    /// `p/q` text form (or a plain integer).
    pub fn to_ratio_string(&self) -> String {
        self.0.to_string()
    }
}

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

macro_rules! exact_binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for Exact {
            type Output = Exact;
            fn $m(self, rhs: Exact) -> Exact {
                Exact(self.0 $op rhs.0)
            }
        }
    };
}
exact_binop!(Add, add, +);
exact_binop!(Sub, sub, -);
exact_binop!(Mul, mul, *);
exact_binop!(Div, div, /);

impl Neg for Exact {
    type Output = Exact;
    fn neg(self) -> Exact {
        Exact(-self.0)
    }
}

impl Field for Exact {
    type Ctx = ();
    fn from_f64(x: f64, _: ()) -> Self {
        Exact(RBig::try_from(x).expect("finite double"))
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }
    fn ctx(&self) {}
    fn default_ctx() {}
    fn log2_abs(&self) -> f64 {
        if self.0.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.to_mpf(64).log2_abs()
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

/// Parse `"p/q"`, an integer, or a decimal (optionally with exponent) exactly.
pub fn parse_rational(s: &str) -> Option<RBig> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = dashu_int::IBig::from_str(p.trim()).ok()?;
        let q = dashu_int::IBig::from_str(q.trim()).ok()?;
        if q == dashu_int::IBig::ZERO {
            return None;
        }
        return Some(RBig::from(p) / RBig::from(q));
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let n = dashu_int::IBig::from_str(if digits.is_empty() { "0" } else { &digits }).ok()?;
    let e = exp - frac_part.len() as i64;
    if e.unsigned_abs() > 100_000 {
        return None;
    }
    let ten = dashu_int::IBig::from(10u8);
    let scale = ten.pow(e.unsigned_abs() as usize);
    let mut r = if e >= 0 {
        RBig::from(n * scale)
    } else {
        RBig::from(n) / RBig::from(scale)
    };
    if neg {
        r = -r;
    }
    Some(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mpf_arithmetic_keeps_precision() {
        let a = Mpf::new(1.0, 256);
        let three = Mpf::new(3.0, 256);
        let third = a / three.clone();
        assert_eq!(third.precision(), 256);
        let back = third * three;
        assert!((back.to_f64() - 1.0).abs() < 1e-300);
    }

    #[test]
    fn mpf_sqrt_and_order() {
        let two = Mpf::new(2.0, 200);
        let r = two.sqrt();
        assert!((r.to_f64() - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(r < two);
        assert!((-r.clone()).is_negative());
        assert!(Field::abs(&(-r.clone())) == r);
    }

    #[test]
    fn exact_parse_forms() {
        assert_eq!(Exact::parse("9/2").unwrap(), Exact::from_ratio(9, 2));
        assert_eq!(Exact::parse("-0.25").unwrap(), Exact::from_ratio(-1, 4));
        assert_eq!(Exact::parse("1.5e2").unwrap(), Exact::from_ratio(150, 1));
        assert_eq!(Exact::parse("3").unwrap().to_f64(), 3.0);
        assert!(Exact::parse("1/0").is_none());
        assert!(Exact::parse("abc").is_none());
    }

    #[test]
    fn exact_roundtrips_doubles() {
        for x in [0.1, 1e-300, 12345.678, -7.5] {
            assert_eq!(Exact::from_f64(x, ()).to_f64(), x);
        }
    }

    #[test]
    fn mpf_parse_and_print() {
        let x = Mpf::parse("1/3", 128).unwrap();
        let s = x.to_decimal_string();
        assert!(s.starts_with("0.3333333333"), "{s}");
        let y = Mpf::parse(&s, 128).unwrap();
        assert!(((x - y).to_f64()).abs() < 1e-37);
    }
}
