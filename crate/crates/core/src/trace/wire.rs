//! Serde helpers for reals on the wire. Finite values are plain JSON
//! numbers in shortest round-trip form; non-finite values become the
//! strings `"NaN"`, `"Infinity"` and `"-Infinity"`.

use serde::de::{self, Deserializer, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::Deserialize;
use std::fmt;

pub fn ser_real<Ser: Serializer>(v: f64, s: Ser) -> Result<Ser::Ok, Ser::Error> {
    if v.is_finite() {
        s.serialize_f64(v)
    } else if v.is_nan() {
        s.serialize_str("NaN")
    } else if v > 0.0 {
        s.serialize_str("Infinity")
    } else {
        s.serialize_str("-Infinity")
    }
}

struct RealVisitor;

impl Visitor<'_> for RealVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number or one of \"NaN\", \"Infinity\", \"-Infinity\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }
    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }
    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }
    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        match v {
            "NaN" => Ok(f64::NAN),
            "Infinity" => Ok(f64::INFINITY),
            "-Infinity" => Ok(f64::NEG_INFINITY),
            other => Err(E::custom(format!("invalid real `{other}`"))),
        }
    }
}

fn de_real<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    d.deserialize_any(RealVisitor)
}

#[derive(Deserialize)]
struct WireReal(#[serde(deserialize_with = "de_real")] f64);

pub mod real {
    use super::*;

    pub fn serialize<Ser: Serializer>(v: &f64, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        ser_real(*v, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        de_real(d)
    }
}

pub mod real_vec {
    use super::*;

    struct Elem(f64);

    impl serde::Serialize for Elem {
        fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
            ser_real(self.0, s)
        }
    }

    pub fn serialize<Ser: Serializer>(v: &[f64], s: Ser) -> Result<Ser::Ok, Ser::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for &x in v {
            seq.serialize_element(&Elem(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<WireReal>::deserialize(d)?;
        Ok(raw.into_iter().map(|r| r.0).collect())
    }
}

/// Serialize-only helpers for generic scalars, widened through `f64`.
pub mod scalar {
    use super::*;
    use crate::scalar::Scalar;

    pub fn serialize<S: Scalar, Ser: Serializer>(v: &S, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        ser_real(v.to_f64_lossless(), s)
    }
}

pub mod scalar_vec {
    use super::*;
    use crate::scalar::Scalar;

    struct Elem(f64);

    impl serde::Serialize for Elem {
        fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
            ser_real(self.0, s)
        }
    }

    pub fn serialize<S: Scalar, Ser: Serializer>(v: &[S], s: Ser) -> Result<Ser::Ok, Ser::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for &x in v {
            seq.serialize_element(&Elem(x.to_f64_lossless()))?;
        }
        seq.end()
    }
}

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, Debug)]
    struct Probe {
        #[serde(with = "super::real")]
        a: f64,
        #[serde(with = "super::real_vec")]
        v: Vec<f64>,
    }

    #[test]
    fn non_finite_survive() {
        let p = Probe { a: f64::NAN, v: vec![f64::INFINITY, -0.0, 0.1, f64::NEG_INFINITY] };
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(text, r#"{"a":"NaN","v":["Infinity",-0.0,0.1,"-Infinity"]}"#);
        let back: Probe = serde_json::from_str(&text).unwrap();
        assert!(back.a.is_nan());
        assert_eq!(back.v[0], f64::INFINITY);
        assert_eq!(back.v[1].to_bits(), (-0.0f64).to_bits());
        assert!(serde_json::from_str::<Probe>(r#"{"a":"nope","v":[]}"#).is_err());
    }
}
