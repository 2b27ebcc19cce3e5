//! Serde helpers for the extended-real numbers of the instance file format.
//!
//! Infinite values cannot be written as JSON numbers, so they travel as the
//! strings `"inf"` and `"-inf"`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Repr {
    Num(f64),
    Text(String),
}

fn to_repr(v: f64) -> Repr {
    if v == f64::INFINITY {
        Repr::Text("inf".into())
    } else if v == f64::NEG_INFINITY {
        Repr::Text("-inf".into())
    } else {
        Repr::Num(v)
    }
}

pub(crate) fn parse_text(s: &str) -> Option<f64> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => None,
    }
}

fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
    match r {
        Repr::Num(v) => Ok(v),
        Repr::Text(s) => {
            parse_text(&s).ok_or_else(|| E::custom(format!("expected a number, \"inf\" or \"-inf\", got \"{s}\"")))
        }
    }
}

/// `#[serde(with = "ext_vec")]` for vectors whose entries may be infinite.
pub mod ext_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&x| to_repr(x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<Repr>::deserialize(d)?;
        raw.into_iter().map(from_repr::<D::Error>).collect()
    }
}

/// `#[serde(with = "ext_f64")]` for scalars that may be infinite.
pub mod ext_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        super::deserialize_ext(d)
    }
}

/// Deserializes a scalar that is either a number or an infinity string.
pub(crate) fn deserialize_ext<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let raw = Repr::deserialize(d)?;
    from_repr::<D::Error>(raw)
}
