//! Exact nonnegative fractions.
//!
//! Every density, gap and ratio the toolkit reports is a quotient of element
//! counts, so all of them are carried as `Ratio<u128>` and only converted to
//! floating point for display.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type Frac = Ratio<u128>;

pub fn frac(num: u128, den: u128) -> Frac {
    Ratio::new(num, den)
}

pub fn to_f64(q: &Frac) -> f64 {
    q.numer().to_f64().unwrap_or(f64::NAN) / q.denom().to_f64().unwrap_or(f64::NAN)
}

/// `⌈q · n⌉` computed exactly.
pub fn ceil_mul(q: &Frac, n: u32) -> u32 {
    let num = q.numer() * n as u128;
    let den = *q.denom();
    num.div_ceil(den) as u32
}

/// Parses `"0.05"`, `"1/20"`, `"3"` into an exact fraction.
pub fn parse_frac(s: &str) -> Result<Frac> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a nonnegative rational: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: u128 = n.trim().parse().map_err(|_| bad())?;
        let d: u128 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    if let Some((int, dec)) = s.split_once('.') {
        if dec.is_empty() || !dec.bytes().all(|b| b.is_ascii_digit()) || dec.len() > 30 {
            return Err(bad());
        }
        let int: u128 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let scale = 10u128.pow(dec.len() as u32);
        let dec: u128 = dec.parse().map_err(|_| bad())?;
        return Ok(Ratio::new(int * scale + dec, scale));
    }
    let n: u128 = s.parse().map_err(|_| bad())?;
    Ok(Ratio::from_integer(n))
}

/// Serde wrapper writing a fraction as `"p/q"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Q(pub Frac);

impl Q {
    pub fn zero() -> Self {
        Q(Frac::zero())
    }
}

impl From<Frac> for Q {
    fn from(q: Frac) -> Self {
        Q(q)
    }
}

impl fmt::Display for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for Q {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_frac(s).map(Q)
    }
}

impl Serialize for Q {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Int(u64),
        }
        match Repr::deserialize(d)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Int(n) => Ok(Q(Ratio::from_integer(n as u128))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_and_fractions() {
        assert_eq!(parse_frac("0.05").unwrap(), frac(1, 20));
        assert_eq!(parse_frac("3/6").unwrap(), frac(1, 2));
        assert_eq!(parse_frac("2").unwrap(), frac(2, 1));
        assert_eq!(parse_frac(".5").unwrap(), frac(1, 2));
        assert!(parse_frac("-1").is_err());
        assert!(parse_frac("1/0").is_err());
        assert!(parse_frac("abc").is_err());
    }

    #[test]
    fn ceil_mul_is_exact() {
        assert_eq!(ceil_mul(&frac(1, 50), 100), 2);
        assert_eq!(ceil_mul(&frac(1, 20), 10), 1);
        assert_eq!(ceil_mul(&frac(1, 20), 100), 5);
        assert_eq!(ceil_mul(&frac(1, 20), 0), 0);
    }

    #[test]
    fn serde_text_form() {
        let q = Q(frac(5, 21));
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, "\"5/21\"");
        let back: Q = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
        let from_decimal: Q = serde_json::from_str("\"0.25\"").unwrap();
        assert_eq!(from_decimal.0, frac(1, 4));
    }
}
