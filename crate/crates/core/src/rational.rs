//! Exact rational scalars and their extension with the two infinities.
//!
//! Every numeric quantity in the solve path (clock valuations, delays, the
//! perturbation bound, prices once they enter arithmetic, costs) is a [`Q`].
//! No floating point is used anywhere downstream.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

/// Exact rational number in canonical form (reduced, positive denominator).
///
/// `BigRational` keeps the canonical form on every operation, so equality and
/// ordering are structural.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Q(BigRational);

impl Q {
    pub fn new(num: i64, den: i64) -> Q {
        assert!(den != 0, "zero denominator");
        Q(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn int(n: i64) -> Q {
        Q(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn zero() -> Q {
        Q(BigRational::zero())
    }

    pub fn one() -> Q {
        Q(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Q {
        Q(self.0.abs())
    }

    pub fn min(self, other: Q) -> Q {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Q) -> Q {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Largest integer ≤ self.
    pub fn floor(&self) -> Q {
        Q(self.0.floor())
    }

    pub fn floor_i64(&self) -> i64 {
        self.0.floor().to_integer().to_i64().expect("floor out of i64 range")
    }

    /// Fractional part, `self - floor(self)`; always in [0, 1).
    pub fn fract(&self) -> Q {
        Q(&self.0 - self.0.floor())
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Midpoint of two rationals; handy for sampling segment interiors.
    pub fn midpoint(a: &Q, b: &Q) -> Q {
        Q((&a.0 + &b.0) / BigRational::from_integer(BigInt::from(2)))
    }
}

impl fmt::Display for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("not a rational literal: {0:?} (expected integer or \"p/q\")")]
pub struct ParseRationalError(pub String);

impl FromStr for Q {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Q, ParseRationalError> {
        let s = s.trim();
        let mk_err = || ParseRationalError(s.to_string());
        match s.split_once('/') {
            Some((p, q)) => {
                let p: BigInt = p.trim().parse().map_err(|_| mk_err())?;
                let q: BigInt = q.trim().parse().map_err(|_| mk_err())?;
                if q.is_zero() {
                    return Err(mk_err());
                }
                Ok(Q(BigRational::new(p, q)))
            }
            None => {
                let p: BigInt = s.parse().map_err(|_| mk_err())?;
                Ok(Q(BigRational::from_integer(p)))
            }
        }
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Q {
            type Output = Q;
            fn $method(self, rhs: Q) -> Q {
                Q((self.0).$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Q> for Q {
            type Output = Q;
            fn $method(self, rhs: &'a Q) -> Q {
                Q((self.0).$method(&rhs.0))
            }
        }
        impl<'a> $trait<Q> for &'a Q {
            type Output = Q;
            fn $method(self, rhs: Q) -> Q {
                Q((&self.0).$method(rhs.0))
            }
        }
        impl<'a, 'b> $trait<&'b Q> for &'a Q {
            type Output = Q;
            fn $method(self, rhs: &'b Q) -> Q {
                Q((&self.0).$method(&rhs.0))
            }
        }
    };
}

impl_binop!(Add, add);
impl_binop!(Sub, sub);
impl_binop!(Mul, mul);

impl Div for Q {
    type Output = Q;
    fn div(self, rhs: Q) -> Q {
        assert!(!rhs.is_zero(), "division by zero");
        Q(self.0 / rhs.0)
    }
}

impl<'a> Div<&'a Q> for &Q {
    type Output = Q;
    fn div(self, rhs: &'a Q) -> Q {
        assert!(!rhs.is_zero(), "division by zero");
        Q(&self.0 / &rhs.0)
    }
}

impl Neg for Q {
    type Output = Q;
    fn neg(self) -> Q {
        Q(-self.0)
    }
}

impl Neg for &Q {
    type Output = Q;
    fn neg(self) -> Q {
        Q(-&self.0)
    }
}

impl AddAssign for Q {
    fn add_assign(&mut self, rhs: Q) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Q {
    fn sub_assign(&mut self, rhs: Q) {
        self.0 -= rhs.0;
    }
}

impl From<i64> for Q {
    fn from(n: i64) -> Q {
        Q::int(n)
    }
}

impl Serialize for Q {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            if let Some(n) = self.0.to_integer().to_i64() {
                return s.serialize_i64(n);
            }
        }
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
            Other(serde_json::Value),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Q::int(n)),
            Raw::Str(s) => s.parse().map_err(DeError::custom),
            Raw::Other(v) => Err(DeError::custom(format!(
                "rationals must be integers or \"p/q\" strings, got {v}"
            ))),
        }
    }
}

/// Rational extended with the two infinities; the codomain of cost functions.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Ext {
    MinusInf,
    Fin(Q),
    PlusInf,
}

impl Ext {
    pub fn fin(q: impl Into<Q>) -> Ext {
        Ext::Fin(q.into())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Ext::Fin(_))
    }

    pub fn as_fin(&self) -> Option<&Q> {
        match self {
            Ext::Fin(q) => Some(q),
            _ => None,
        }
    }

    pub fn min(self, other: Ext) -> Ext {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Ext) -> Ext {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Adds a finite rational; infinities absorb.
    pub fn add_q(&self, q: &Q) -> Ext {
        match self {
            Ext::Fin(v) => Ext::Fin(v + q),
            inf => inf.clone(),
        }
    }

    /// |a - b| as an extended value; two equal infinities give 0.
    pub fn abs_diff(&self, other: &Ext) -> Ext {
        match (self, other) {
            (Ext::Fin(a), Ext::Fin(b)) => Ext::Fin((a - b).abs()),
            (a, b) if a == b => Ext::Fin(Q::zero()),
            _ => Ext::PlusInf,
        }
    }
}

impl PartialOrd for Ext {
    fn partial_cmp(&self, other: &Ext) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ext {
    fn cmp(&self, other: &Ext) -> Ordering {
        use Ext::*;
        match (self, other) {
            (MinusInf, MinusInf) | (PlusInf, PlusInf) => Ordering::Equal,
            (MinusInf, _) | (_, PlusInf) => Ordering::Less,
            (_, MinusInf) | (PlusInf, _) => Ordering::Greater,
            (Fin(a), Fin(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ext::MinusInf => write!(f, "-inf"),
            Ext::Fin(q) => write!(f, "{q}"),
            Ext::PlusInf => write!(f, "inf"),
        }
    }
}

impl fmt::Debug for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl Serialize for Ext {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Ext::Fin(q) => q.serialize(s),
            Ext::PlusInf => s.serialize_str("inf"),
            Ext::MinusInf => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Ext {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Ext, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Ext::Fin(Q::int(n))),
            Raw::Str(s) => match s.trim() {
                "inf" | "+inf" => Ok(Ext::PlusInf),
                "-inf" => Ok(Ext::MinusInf),
                other => other.parse().map(Ext::Fin).map_err(DeError::custom),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form() {
        assert_eq!(Q::new(2, 4), Q::new(1, 2));
        assert_eq!(Q::new(1, -2), Q::new(-1, 2));
        assert_eq!(Q::new(-3, -6), Q::new(1, 2));
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["0", "7", "-3", "1/2", "-5/8", "23/8"] {
            let q: Q = s.parse().unwrap();
            assert_eq!(q.to_string(), s);
        }
        assert_eq!("2/4".parse::<Q>().unwrap().to_string(), "1/2");
        assert!("1/0".parse::<Q>().is_err());
        assert!("0.5".parse::<Q>().is_err());
    }

    #[test]
    fn floor_and_fract() {
        let q = Q::new(13, 10);
        assert_eq!(q.floor(), Q::int(1));
        assert_eq!(q.fract(), Q::new(3, 10));
        let neg = Q::new(-1, 2);
        assert_eq!(neg.floor(), Q::int(-1));
        assert_eq!(neg.fract(), Q::new(1, 2));
    }

    #[test]
    fn ext_ordering_and_absorption() {
        assert!(Ext::MinusInf < Ext::fin(Q::int(-100)));
        assert!(Ext::fin(Q::int(100)) < Ext::PlusInf);
        assert_eq!(Ext::PlusInf.add_q(&Q::int(5)), Ext::PlusInf);
        assert_eq!(
            Ext::fin(Q::new(1, 2)).add_q(&Q::new(1, 3)),
            Ext::fin(Q::new(5, 6))
        );
    }

    #[test]
    fn serde_rationals() {
        let q: Q = serde_json::from_str("\"3/4\"").unwrap();
        assert_eq!(q, Q::new(3, 4));
        let q: Q = serde_json::from_str("-2").unwrap();
        assert_eq!(q, Q::int(-2));
        assert!(serde_json::from_str::<Q>("0.25").is_err());
        let e: Ext = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(e, Ext::PlusInf);
        assert_eq!(serde_json::to_string(&Q::new(1, 8)).unwrap(), "\"1/8\"");
        assert_eq!(serde_json::to_string(&Q::int(3)).unwrap(), "3");
    }
}
