//! Exact exponents with a bounded denominator.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on exponent denominators.
pub const DEFAULT_MAX_DEN: i64 = 64;

/// Reduced fraction `num/den` with `den > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rational(Ratio<i64>);

impl Rational {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidExponents("zero denominator".into()));
        }
        Ok(Self(Ratio::new(num, den)))
    }

    pub fn integer(n: i64) -> Self {
        Self(Ratio::from_integer(n))
    }

    pub fn half() -> Self {
        Self(Ratio::new(1, 2))
    }

    pub fn num(&self) -> i64 {
        *self.0.numer()
    }

    pub fn den(&self) -> i64 {
        *self.0.denom()
    }

    pub fn to_f64(self) -> f64 {
        self.num() as f64 / self.den() as f64
    }

    pub fn is_zero(&self) -> bool {
        self.num() == 0
    }
}

impl Add for Rational {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Sub for Rational {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Neg for Rational {
    type Output = Self;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den() == 1 {
            write!(f, "{}", self.num())
        } else {
            write!(f, "{}/{}", self.num(), self.den())
        }
    }
}

impl FromStr for Rational {
    type Err = Error;

    /// Parses `"p/q"` or an integer `"p"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidExponents(format!("cannot parse exponent {s:?}"));
        let s = s.trim();
        match s.split_once('/') {
            Some((p, q)) => {
                let p = p.trim().parse::<i64>().map_err(|_| bad())?;
                let q = q.trim().parse::<i64>().map_err(|_| bad())?;
                Self::new(p, q)
            }
            None => s.parse::<i64>().map(Self::integer).map_err(|_| bad()),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Repr {
    num: i64,
    den: i64,
}

impl Serialize for Rational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Repr {
            num: self.num(),
            den: self.den(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = Repr::deserialize(d)?;
        Rational::new(r.num, r.den).map_err(serde::de::Error::custom)
    }
}

/// Total order helper for sorting in decreasing order.
pub fn descending(a: &Rational, b: &Rational) -> Ordering {
    b.cmp(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_and_orders() {
        let a = Rational::new(2, -4).unwrap();
        assert_eq!((a.num(), a.den()), (-1, 2));
        assert!(Rational::half() > a);
        assert_eq!(Rational::half() + Rational::half(), Rational::integer(1));
    }

    #[test]
    fn parse_and_json_round_trip() {
        let r: Rational = "-11/2".parse().unwrap();
        assert_eq!(r, Rational::new(-11, 2).unwrap());
        let js = serde_json::to_string(&r).unwrap();
        assert_eq!(js, r#"{"num":-11,"den":2}"#);
        let back: Rational = serde_json::from_str(&js).unwrap();
        assert_eq!(back, r);
        assert!("1/0".parse::<Rational>().is_err());
    }
}
