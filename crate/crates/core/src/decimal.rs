//! Shortest round-trip decimal strings for binary64 values.
//!
//! Used wherever a file format stores floats as strings so that reading a
//! file back reproduces the exact bits.

use serde::{Deserialize, Deserializer, Serializer};

pub fn format(x: f64) -> String {
    // `{:?}` prints the shortest digits that parse back to the same double.
    format!("{x:?}")
}

pub fn parse(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|e| format!("bad decimal `{s}`: {e}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("non-finite decimal `{s}`"))
    }
}

/// `#[serde(with = "crate::decimal")]` for a single `f64`.
pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format(*x))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let s = String::deserialize(d)?;
    parse(&s).map_err(serde::de::Error::custom)
}

/// `#[serde(with = "crate::decimal::vec")]` for `Vec<f64>`.
pub mod vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&format(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter().map(|s| parse(s).map_err(serde::de::Error::custom)).collect()
    }
}

/// `#[serde(with = "crate::decimal::matrix")]` for row-major `Vec<Vec<f64>>`.
pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let text: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|x| format(*x)).collect()).collect();
        serde::Serialize::serialize(&text, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let raw = Vec::<Vec<String>>::deserialize(d)?;
        raw.iter().map(|r| r.iter().map(|s| parse(s).map_err(serde::de::Error::custom)).collect()).collect()
    }
}
