//! Exact rational scalars.
//!
//! Every coefficient in this crate is an arbitrary-precision rational,
//! always kept in reduced form by `num-rational`. Reports serialize
//! rationals as `"p/q"` strings so no precision is lost in JSON.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// The scalar type used throughout the crate.
pub type Q = BigRational;

/// Shorthand for an integer rational.
pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Shorthand for `n/d`.
pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn q_zero() -> Q {
    Q::zero()
}

pub fn q_one() -> Q {
    Q::one()
}

/// Parses `"p"`, `"-p"` or `"p/q"`.
pub fn parse_q(s: &str) -> Result<Q, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty rational literal".into());
    }
    match s.split_once('/') {
        None => s
            .parse::<BigInt>()
            .map(Q::from_integer)
            .map_err(|e| format!("bad integer `{s}`: {e}")),
        Some((num, den)) => {
            let n = num
                .trim()
                .parse::<BigInt>()
                .map_err(|e| format!("bad numerator `{num}`: {e}"))?;
            let d = den
                .trim()
                .parse::<BigInt>()
                .map_err(|e| format!("bad denominator `{den}`: {e}"))?;
            if d.is_zero() {
                return Err(format!("zero denominator in `{s}`"));
            }
            Ok(Q::new(n, d))
        }
    }
}

/// Renders a rational as `"p"` or `"p/q"`.
pub fn format_q(q: &Q) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Total bit size of numerator and denominator, used by the coefficient
/// size guard.
pub fn bit_size(q: &Q) -> u64 {
    q.numer().abs().bits() + q.denom().bits()
}

/// Serde adapter: a rational as a `"p/q"` string.
pub mod serde_q {
    use super::{format_q, parse_q, Q};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_q(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_q(&s).map_err(D::Error::custom)
    }
}

/// Serde adapter for `Vec<Q>`.
pub mod serde_q_vec {
    use super::{format_q, parse_q, Q};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(format_q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| parse_q(s).map_err(D::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["0", "5", "-3", "3/4", "-7/2", "22/7"] {
            let q = parse_q(s).unwrap();
            assert_eq!(format_q(&q), s);
        }
        // reduction happens on parse
        assert_eq!(format_q(&parse_q("4/8").unwrap()), "1/2");
        assert_eq!(format_q(&parse_q("6/-4").unwrap()), "-3/2");
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_q("").is_err());
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("a/b").is_err());
        assert!(parse_q("1.5").is_err());
    }
}
