//! Exact rational helpers: parsing and printing `p/q` strings, an extended
//! value with a `+inf` top element, and serde adapters that keep rationals
//! as strings in every file format.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::Error;

/// Arbitrary-precision rational used for every belief, payoff and likelihood.
pub type Q = BigRational;

/// `n/d` as a rational. Panics on `d == 0`.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Integer as a rational.
pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Parses `"p/q"`, `"-p/q"` or an integer literal.
pub fn parse_q(text: &str) -> Result<Q, Error> {
    let s = text.trim();
    let bad = || Error::InvalidInput(format!("not an exact rational: {text:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(Error::InvalidInput(format!("zero denominator in {text:?}")));
            }
            Ok(Q::new(n, d))
        }
        None => {
            let n: BigInt = s.parse().map_err(|_| bad())?;
            Ok(Q::from_integer(n))
        }
    }
}

/// Canonical `p/q` text (integers print without a denominator).
pub fn fmt_q(value: &Q) -> String {
    value.to_string()
}

pub fn to_f64(value: &Q) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Six-decimal companion column used in CSV and reports.
pub fn fmt_dec(value: &Q) -> String {
    format!("{:.6}", to_f64(value))
}

/// Smallest integer `>= value`.
pub fn ceil_q(value: &Q) -> BigInt {
    value.ceil().to_integer()
}

/// Largest integer `<= value`.
pub fn floor_q(value: &Q) -> BigInt {
    value.floor().to_integer()
}

pub fn q_max<'a>(values: impl IntoIterator<Item = &'a Q>) -> Option<Q> {
    values.into_iter().max().cloned()
}

pub fn q_min<'a>(values: impl IntoIterator<Item = &'a Q>) -> Option<Q> {
    values.into_iter().min().cloned()
}

/// Sup-norm distance between two equally long vectors.
pub fn sup_distance(a: &[Q], b: &[Q]) -> Q {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .max()
        .unwrap_or_else(Q::zero)
}

/// A rational extended with a positive-infinity top element.
///
/// Used for sentinel values such as the no-disclosure threshold of the last
/// state, which is unbounded by construction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExtQ {
    Finite(Q),
    PosInf,
}

impl ExtQ {
    pub fn finite(&self) -> Option<&Q> {
        match self {
            ExtQ::Finite(v) => Some(v),
            ExtQ::PosInf => None,
        }
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, ExtQ::PosInf)
    }
}

impl PartialOrd for ExtQ {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtQ {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtQ::Finite(a), ExtQ::Finite(b)) => a.cmp(b),
            (ExtQ::Finite(_), ExtQ::PosInf) => Ordering::Less,
            (ExtQ::PosInf, ExtQ::Finite(_)) => Ordering::Greater,
            (ExtQ::PosInf, ExtQ::PosInf) => Ordering::Equal,
        }
    }
}

impl PartialEq<Q> for ExtQ {
    fn eq(&self, other: &Q) -> bool {
        matches!(self, ExtQ::Finite(v) if v == other)
    }
}

impl PartialOrd<Q> for ExtQ {
    fn partial_cmp(&self, other: &Q) -> Option<Ordering> {
        Some(match self {
            ExtQ::Finite(v) => v.cmp(other),
            ExtQ::PosInf => Ordering::Greater,
        })
    }
}

impl serde::Serialize for ExtQ {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for ExtQ {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = <String as serde::Deserialize>::deserialize(d)?;
        if text.trim() == "+inf" {
            Ok(ExtQ::PosInf)
        } else {
            parse_q(&text).map(ExtQ::Finite).map_err(serde::de::Error::custom)
        }
    }
}

impl fmt::Display for ExtQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtQ::Finite(v) => write!(f, "{v}"),
            ExtQ::PosInf => write!(f, "+inf"),
        }
    }
}

/// `x^k` for a non-negative integer exponent.
pub fn pow_q(x: &Q, k: u64) -> Q {
    let mut acc = Q::one();
    for _ in 0..k {
        acc *= x;
    }
    acc
}

/// Serde adapters: rationals travel as `"p/q"` strings.
pub mod serde_q {
    use super::{fmt_q, parse_q, Q};
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let text = String::deserialize(d)?;
        parse_q(&text).map_err(D::Error::custom)
    }

    pub mod vec {
        use super::super::{fmt_q, parse_q, Q};
        use serde::{de::Error as _, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(values: &[Q], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(values.len()))?;
            for v in values {
                seq.serialize_element(&fmt_q(v))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
            let texts = Vec::<String>::deserialize(d)?;
            texts
                .iter()
                .map(|t| parse_q(t).map_err(D::Error::custom))
                .collect()
        }
    }

    /// `Vec<(T, Q)>` as a list of `[T, "p/q"]` pairs.
    pub mod weighted {
        use super::super::{fmt_q, parse_q, Q};
        use serde::{
            de::DeserializeOwned, de::Error as _, ser::SerializeSeq, Deserialize, Deserializer,
            Serialize, Serializer,
        };

        pub fn serialize<T: Serialize, S: Serializer>(
            items: &[(T, Q)],
            s: S,
        ) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(items.len()))?;
            for (t, w) in items {
                seq.serialize_element(&(t, fmt_q(w)))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, T: DeserializeOwned, D: Deserializer<'de>>(
            d: D,
        ) -> Result<Vec<(T, Q)>, D::Error> {
            let raw = Vec::<(T, String)>::deserialize(d)?;
            raw.into_iter()
                .map(|(t, w)| Ok((t, parse_q(&w).map_err(D::Error::custom)?)))
                .collect()
        }
    }

    pub mod matrix {
        use super::super::{fmt_q, parse_q, Q};
        use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(rows: &[Vec<Q>], s: S) -> Result<S::Ok, S::Error> {
            let texts: Vec<Vec<String>> =
                rows.iter().map(|r| r.iter().map(fmt_q).collect()).collect();
            texts.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Q>>, D::Error> {
            let texts = Vec::<Vec<String>>::deserialize(d)?;
            texts
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|t| parse_q(t).map_err(D::Error::custom))
                        .collect()
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        assert_eq!(parse_q("3/6").unwrap(), q(1, 2));
        assert_eq!(parse_q(" -7 ").unwrap(), qi(-7));
        assert_eq!(fmt_q(&q(10, 4)), "5/2");
        assert_eq!(fmt_q(&qi(3)), "3");
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("0.5").is_err());
    }

    #[test]
    fn ext_order() {
        assert!(ExtQ::PosInf > ExtQ::Finite(qi(1_000_000)));
        assert!(ExtQ::Finite(q(1, 2)) < ExtQ::Finite(q(2, 3)));
        assert!(ExtQ::Finite(q(1, 2)) > q(1, 3));
    }

    #[test]
    fn ceilings() {
        assert_eq!(ceil_q(&q(112, 3)), BigInt::from(38));
        assert_eq!(ceil_q(&qi(36)), BigInt::from(36));
        assert_eq!(floor_q(&q(-1, 2)), BigInt::from(-1));
    }
}
