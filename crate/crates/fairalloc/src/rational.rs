//! Exact fraction arithmetic.
//!
//! Every share quantity in this crate is a `Rational`; nothing rounds
//! implicitly. Values are kept in lowest terms with a positive denominator.
//! The numerators and denominators are arbitrary precision: column sums over
//! many users produce common denominators far beyond any fixed-width type.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid integer part {0:?}")]
    Integer(String),
    #[error("denominator is zero")]
    ZeroDenominator,
}

impl Rational {
    /// Builds `num/den` reduced to lowest terms.
    ///
    /// Panics if `den` is zero; fallible construction goes through `FromStr`.
    pub fn new<N, D>(num: N, den: D) -> Self
    where
        BigInt: From<N> + From<D>,
    {
        let den = BigInt::from(den);
        assert!(!den.is_zero(), "denominator must be nonzero");
        Rational(BigRational::new(BigInt::from(num), den))
    }

    pub fn from_integer<N>(n: N) -> Self
    where
        BigInt: From<N>,
    {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// Largest integer not above the value.
    pub fn floor(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    pub fn floor_u64(&self) -> Option<u64> {
        self.floor().to_u64()
    }

    /// Fractional part, `self - floor(self)`; always in `[0, 1)`.
    pub fn fract(&self) -> Rational {
        Rational(&self.0 - self.0.floor())
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn recip(&self) -> Rational {
        assert!(!self.is_zero(), "cannot invert zero");
        Rational(self.0.recip())
    }

    /// Nearest `f64`; only for reporting and float-mode comparisons.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    /// Accepts `"n"` or `"n/d"` with optional signs, e.g. `"7"`, `"-2/3"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseRationalError::Empty);
        }
        let parse_int = |part: &str| {
            BigInt::from_str(part.trim())
                .map_err(|_| ParseRationalError::Integer(part.trim().to_string()))
        };
        match s.split_once('/') {
            None => Ok(Rational(BigRational::from_integer(parse_int(s)?))),
            Some((num, den)) => {
                let num = parse_int(num)?;
                let den = parse_int(den)?;
                if den.is_zero() {
                    return Err(ParseRationalError::ZeroDenominator);
                }
                Ok(Rational(BigRational::new(num, den)))
            }
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

impl From<u64> for Rational {
    fn from(n: u64) -> Self {
        Rational::from_integer(n)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((self.0).$method(rhs.0))
            }
        }

        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((self.0).$method(&rhs.0))
            }
        }

        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }

        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        self.0 -= &rhs.0;
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}
