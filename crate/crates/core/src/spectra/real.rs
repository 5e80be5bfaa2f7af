//! Scalars for rate arithmetic: exact quadratic surds c + s√m over ℚ, or
//! binary64 values compared with a fixed tolerance.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Float-mode equality tolerance, relative to max(1, |a|, |b|).
pub const FLOAT_TOL: f64 = 1e-9;

/// c + s√m with m ≥ 2 not a perfect square, or s = 0 and m = 0.
#[derive(Debug, Clone)]
pub struct Surd {
    c: BigRational,
    s: BigRational,
    m: BigInt,
}

fn sign_of(q: &BigRational) -> i32 {
    match q.numer().sign() {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}

/// sign of x + p√m.
fn sign2(x: &BigRational, p: &BigRational, m: &BigInt) -> i32 {
    let sx = sign_of(x);
    let t = if m.is_zero() { 0 } else { sign_of(p) };
    if t == 0 {
        return sx;
    }
    if sx == 0 || sx == t {
        return t;
    }
    let lhs = x * x;
    let rhs = p * p * BigRational::from_integer(m.clone());
    match lhs.cmp(&rhs) {
        Ordering::Greater => sx,
        Ordering::Less => t,
        Ordering::Equal => 0,
    }
}

/// sign of x + p√m₁ + q√m₂.
fn sign3(x: &BigRational, p: &BigRational, m1: &BigInt, q: &BigRational, m2: &BigInt) -> i32 {
    let sa = sign2(x, p, m1);
    let sb = if m2.is_zero() { 0 } else { sign_of(q) };
    if sb == 0 {
        return sa;
    }
    if sa == 0 || sa == sb {
        return sb;
    }
    // |A| against |B| through A² − B² = (x² + p²m₁ − q²m₂) + 2xp√m₁
    let m1q = BigRational::from_integer(m1.clone());
    let m2q = BigRational::from_integer(m2.clone());
    let rest = x * x + p * p * m1q - q * q * m2q;
    let cross = BigRational::from_integer(2.into()) * x * p;
    match sign2(&rest, &cross, m1) {
        1 => sa,
        -1 => sb,
        _ => 0,
    }
}

impl Surd {
    pub fn rational(c: BigRational) -> Self {
        Surd { c, s: BigRational::zero(), m: BigInt::zero() }
    }

    pub fn integer(n: i64) -> Self {
        Surd::rational(BigRational::from_integer(n.into()))
    }

    /// √q for q ≥ 0.
    pub fn sqrt(q: &BigRational) -> Option<Self> {
        if q.is_negative() {
            return None;
        }
        // √(a/b) = √(ab)/b
        let ab = q.numer() * q.denom();
        let root = ab.sqrt();
        let inv_b = BigRational::new(BigInt::one(), q.denom().clone());
        if &root * &root == ab {
            return Some(Surd::rational(BigRational::from_integer(root) * inv_b));
        }
        Some(Surd { c: BigRational::zero(), s: inv_b, m: ab })
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        if self.s.is_zero() {
            Some(&self.c)
        } else {
            None
        }
    }

    pub fn add_rational(&self, q: &BigRational) -> Self {
        Surd { c: &self.c + q, s: self.s.clone(), m: self.m.clone() }
    }

    pub fn neg(&self) -> Self {
        Surd { c: -&self.c, s: -&self.s, m: self.m.clone() }
    }

    pub fn square(&self) -> Self {
        let m = BigRational::from_integer(self.m.clone());
        let two = BigRational::from_integer(2.into());
        let c = &self.c * &self.c + &self.s * &self.s * m;
        let s = two * &self.c * &self.s;
        if s.is_zero() {
            Surd::rational(c)
        } else {
            Surd { c, s, m: self.m.clone() }
        }
    }

    pub fn signum(&self) -> i32 {
        sign2(&self.c, &self.s, &self.m)
    }

    pub fn to_f64(&self) -> f64 {
        let c = self.c.to_f64().unwrap_or(f64::NAN);
        if self.s.is_zero() {
            return c;
        }
        c + self.s.to_f64().unwrap_or(f64::NAN) * self.m.to_f64().unwrap_or(f64::NAN).sqrt()
    }
}

impl Ord for Surd {
    fn cmp(&self, other: &Self) -> Ordering {
        let x = &self.c - &other.c;
        let q = -&other.s;
        match sign3(&x, &self.s, &self.m, &q, &other.m) {
            1 => Ordering::Greater,
            -1 => Ordering::Less,
            _ => Ordering::Equal,
        }
    }
}

impl PartialEq for Surd {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Surd {}

impl PartialOrd for Surd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn fmt_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.s.is_zero() {
            return write!(f, "{}", fmt_rational(&self.c));
        }
        let coef = if self.s == BigRational::one() {
            String::new()
        } else if self.s == -BigRational::one() {
            "-".to_string()
        } else {
            format!("{}*", fmt_rational(&self.s))
        };
        if self.c.is_zero() {
            write!(f, "{coef}sqrt({})", self.m)
        } else if self.s.is_negative() && coef.starts_with('-') {
            write!(f, "{}{coef}sqrt({})", fmt_rational(&self.c), self.m)
        } else {
            write!(f, "{}+{coef}sqrt({})", fmt_rational(&self.c), self.m)
        }
    }
}

/// A rate-arithmetic scalar.
#[derive(Debug, Clone)]
pub enum Real {
    Exact(Surd),
    Float(f64),
}

impl Real {
    pub fn int(n: i64) -> Self {
        Real::Exact(Surd::integer(n))
    }

    pub fn rational(q: BigRational) -> Self {
        Real::Exact(Surd::rational(q))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Real::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Exact(s) => s.to_f64(),
            Real::Float(x) => *x,
        }
    }

    /// Tolerant comparison: exact when both sides are exact.
    pub fn cmp_tol(&self, other: &Real) -> Ordering {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => a.cmp(b),
            _ => {
                let (a, b) = (self.to_f64(), other.to_f64());
                if (a - b).abs() <= FLOAT_TOL * 1f64.max(a.abs()).max(b.abs()) {
                    Ordering::Equal
                } else {
                    a.total_cmp(&b)
                }
            }
        }
    }

    pub fn eq_tol(&self, other: &Real) -> bool {
        self.cmp_tol(other) == Ordering::Equal
    }

    pub fn is_zero_tol(&self) -> bool {
        self.eq_tol(&Real::int(0))
    }

    pub fn add_int(&self, k: i64) -> Real {
        match self {
            Real::Exact(s) => Real::Exact(s.add_rational(&BigRational::from_integer(k.into()))),
            Real::Float(x) => Real::Float(x + k as f64),
        }
    }

    pub fn neg(&self) -> Real {
        match self {
            Real::Exact(s) => Real::Exact(s.neg()),
            Real::Float(x) => Real::Float(-x),
        }
    }

    pub fn abs(&self) -> Real {
        match self {
            Real::Exact(s) if s.signum() < 0 => Real::Exact(s.neg()),
            Real::Float(x) => Real::Float(x.abs()),
            _ => self.clone(),
        }
    }

    /// Square root of a non-negative rational or float; surd arguments are
    /// not closed under √ and give None.
    pub fn sqrt(&self) -> Option<Real> {
        match self {
            Real::Exact(s) => s.as_rational().and_then(Surd::sqrt).map(Real::Exact),
            Real::Float(x) => {
                if *x >= 0.0 {
                    Some(Real::Float(x.sqrt()))
                } else if *x >= -FLOAT_TOL {
                    Some(Real::Float(0.0))
                } else {
                    None
                }
            }
        }
    }

    pub fn square(&self) -> Real {
        match self {
            Real::Exact(s) => Real::Exact(s.square()),
            Real::Float(x) => Real::Float(x * x),
        }
    }

    /// Exact rational value, if this is one.
    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Real::Exact(s) => s.as_rational(),
            Real::Float(_) => None,
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact(s) => write!(f, "{s}"),
            Real::Float(x) => write!(f, "{x}"),
        }
    }
}

/// Parses "p", "p/q" or a finite decimal "a.b" into an exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let t = text.trim();
    if let Some((a, b)) = t.split_once('/') {
        let n = BigInt::from_str(a.trim()).ok()?;
        let d = BigInt::from_str(b.trim()).ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let n = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).ok()?;
    let d = num_traits::pow(BigInt::from(10), frac.len());
    let q = BigRational::new(n, d);
    Some(if neg { -q } else { q })
}

impl FromStr for Real {
    type Err = String;

    /// Exact when the text is a rational literal; "f:x" forces float mode.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(rest) = s.trim().strip_prefix("f:") {
            return rest.trim().parse::<f64>().map(Real::Float).map_err(|e| e.to_string());
        }
        parse_rational(s).map(Real::rational).ok_or_else(|| format!("not a rational literal: {s:?}"))
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Real::Float(x) => s.serialize_f64(*x),
            Real::Exact(v) => s.serialize_str(&v.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    /// JSON numbers are float mode; strings are exact rationals.
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Real;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a rational string such as \"29/4\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Real, E> {
                Ok(Real::Float(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Real, E> {
                Ok(Real::Float(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Real, E> {
                Ok(Real::Float(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Real, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn perfect_squares_fold_to_rationals() {
        assert_eq!(Surd::sqrt(&q(16, 1)).unwrap(), Surd::integer(4));
        assert_eq!(Surd::sqrt(&q(9, 4)).unwrap(), Surd::rational(q(3, 2)));
        assert!(Surd::sqrt(&q(2, 1)).unwrap().as_rational().is_none());
    }

    #[test]
    fn exact_ordering_of_nearby_surds() {
        // 1 + √3 (2.7321) against √7.5 (2.7386)
        let a = Surd::sqrt(&q(3, 1)).unwrap().add_rational(&q(1, 1));
        let b = Surd::sqrt(&q(15, 2)).unwrap();
        assert_eq!(a.cmp(&b), Ordering::Less);
        assert_eq!(b.neg().cmp(&a.neg()), Ordering::Less);
        let s10 = Surd::sqrt(&q(10, 1)).unwrap();
        let three = Surd::integer(3);
        assert_eq!(s10.cmp(&three), Ordering::Greater);
        assert_eq!(s10.add_rational(&q(-3, 1)).signum(), 1);
        // 2√2 = √8
        let s8 = Surd::sqrt(&q(8, 1)).unwrap();
        let two_s2 = Surd { c: BigRational::zero(), s: q(2, 1), m: 2.into() };
        assert_eq!(s8.cmp(&two_s2), Ordering::Equal);
    }

    #[test]
    fn decimal_and_fraction_literals() {
        assert_eq!(parse_rational("7.25").unwrap(), q(29, 4));
        assert_eq!(parse_rational("-3").unwrap(), q(-3, 1));
        assert_eq!(parse_rational("12/8").unwrap(), q(3, 2));
        assert!(parse_rational("1e3").is_none());
        assert!(parse_rational("1/0").is_none());
    }
}
