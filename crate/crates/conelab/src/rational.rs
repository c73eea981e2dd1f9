//! Exact rationals, parsing and the "num/den" wire format.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;

pub type Rat = BigRational;

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> Rat {
    Rat::from_integer(BigInt::from(v))
}

/// Accepts `a`, `a/b` and finite decimals such as `-1.25`.
pub fn parse_rat(text: &str) -> Result<Rat> {
    let s = text.trim();
    let bad = || Error::Parse(format!("not a rational: `{text}`"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rat::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = whole.trim_start().starts_with('-');
        let w: BigInt = if whole.is_empty() || whole == "-" || whole == "+" {
            BigInt::zero()
        } else {
            whole.parse().map_err(|_| bad())?
        };
        let f: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let mag = Rat::new(w.abs() * &scale + f, scale);
        return Ok(if negative { -mag } else { mag });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rat::from_integer(n))
}

pub fn parse_rat_list(text: &str) -> Result<Vec<Rat>> {
    text.split(',').map(parse_rat).collect()
}

pub fn format_rat(q: &Rat) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn to_f64(q: &Rat) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        let n = q.numer().to_f64().unwrap_or(f64::NAN);
        let d = q.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact binary value of a finite float.
pub fn from_f64_exact(x: f64) -> Rat {
    Rat::from_float(x).unwrap_or_else(Rat::zero)
}

/// Hölder conjugate q' = q/(q−1); ∞ for q = 1.
pub fn conjugate(q: &Rat) -> ExtRat {
    let d = q - Rat::one();
    if d.is_zero() {
        ExtRat::PosInf
    } else {
        ExtRat::Finite(q / d)
    }
}

/// A rational or +∞.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtRat {
    Finite(Rat),
    PosInf,
}

impl ExtRat {
    pub fn finite(&self) -> Option<&Rat> {
        match self {
            ExtRat::Finite(q) => Some(q),
            ExtRat::PosInf => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExtRat::Finite(q) => to_f64(q),
            ExtRat::PosInf => f64::INFINITY,
        }
    }

    pub fn add_rat(&self, q: &Rat) -> ExtRat {
        match self {
            ExtRat::Finite(a) => ExtRat::Finite(a + q),
            ExtRat::PosInf => ExtRat::PosInf,
        }
    }

    pub fn mul_rat(&self, q: &Rat) -> ExtRat {
        assert!(q.is_positive());
        match self {
            ExtRat::Finite(a) => ExtRat::Finite(a * q),
            ExtRat::PosInf => ExtRat::PosInf,
        }
    }

    pub fn min(self, other: ExtRat) -> ExtRat {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: ExtRat) -> ExtRat {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for ExtRat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtRat {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtRat::PosInf, ExtRat::PosInf) => Ordering::Equal,
            (ExtRat::PosInf, _) => Ordering::Greater,
            (_, ExtRat::PosInf) => Ordering::Less,
            (ExtRat::Finite(a), ExtRat::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for ExtRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRat::Finite(q) => write!(f, "{}", format_rat(q)),
            ExtRat::PosInf => write!(f, "inf"),
        }
    }
}

impl serde::Serialize for ExtRat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Open interval (lo, hi) with lo finite and hi possibly +∞. Empty when lo ≥ hi.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpenInterval {
    pub lo: Rat,
    pub hi: ExtRat,
}

impl OpenInterval {
    pub fn new(lo: Rat, hi: ExtRat) -> OpenInterval {
        OpenInterval { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        ExtRat::Finite(self.lo.clone()) >= self.hi
    }

    pub fn contains(&self, q: &Rat) -> bool {
        !self.is_empty() && *q > self.lo && ExtRat::Finite(q.clone()) < self.hi
    }

    pub fn describe(&self) -> String {
        if self.is_empty() {
            "EMPTY".to_string()
        } else {
            format!("({}, {})", format_rat(&self.lo), self.hi)
        }
    }
}

impl serde::Serialize for OpenInterval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("OpenInterval", 4)?;
        st.serialize_field("lo", &format_rat(&self.lo))?;
        st.serialize_field("hi", &self.hi.to_string())?;
        st.serialize_field("empty", &self.is_empty())?;
        st.serialize_field("display", &self.describe())?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_forms() {
        assert_eq!(parse_rat("2/3").unwrap(), rat(2, 3));
        assert_eq!(parse_rat(" -4 ").unwrap(), int(-4));
        assert_eq!(parse_rat("-1.25").unwrap(), rat(-5, 4));
        assert_eq!(parse_rat("0.5").unwrap(), rat(1, 2));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("abc").is_err());
    }

    #[test]
    fn wire_format() {
        assert_eq!(format_rat(&rat(8, 6)), "4/3");
        assert_eq!(format_rat(&int(3)), "3/1");
    }

    #[test]
    fn conjugate_of_two_is_two() {
        assert_eq!(conjugate(&int(2)), ExtRat::Finite(int(2)));
        assert_eq!(conjugate(&int(1)), ExtRat::PosInf);
    }

    #[test]
    fn interval_emptiness() {
        let i = OpenInterval::new(rat(5, 2), ExtRat::Finite(rat(5, 3)));
        assert!(i.is_empty());
        assert_eq!(i.describe(), "EMPTY");
        let j = OpenInterval::new(rat(3, 2), ExtRat::Finite(int(3)));
        assert!(j.contains(&int(2)));
        assert!(!j.contains(&int(3)));
    }
}
