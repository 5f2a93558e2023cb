//! Lossless `f64` encoding for persisted documents.
//!
//! A real is written as the 16 lowercase hex digits of its IEEE-754 bit
//! pattern (`1.0` → `"3ff0000000000000"`); a complex number is a two-element
//! array `[re, im]` of such strings.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serializer};

pub fn encode(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

pub fn decode(s: &str) -> Result<f64, String> {
    if s.len() != 16 {
        return Err(format!("hex float `{s}` must have 16 digits"));
    }
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|e| format!("hex float `{s}`: {e}"))
}

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&encode(*v))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let s = String::deserialize(d)?;
    decode(&s).map_err(D::Error::custom)
}

pub(crate) fn encode_complex(z: Complex64) -> [String; 2] {
    [encode(z.re), encode(z.im)]
}

pub(crate) fn decode_complex(pair: &[String; 2]) -> Result<Complex64, String> {
    Ok(Complex64::new(decode(&pair[0])?, decode(&pair[1])?))
}

/// `Vec<Complex64>` as a list of `[re, im]` hex pairs.
pub mod complex_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for z in v {
            seq.serialize_element(&encode_complex(*z))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let raw = Vec::<[String; 2]>::deserialize(d)?;
        raw.iter()
            .map(|p| decode_complex(p).map_err(D::Error::custom))
            .collect()
    }
}

/// A dense complex matrix as `{rows, cols, values}` with row-major hex pairs.
pub mod cmatrix {
    use super::*;
    use crate::CMatrix;
    use serde::Serialize;

    #[derive(Serialize, Deserialize)]
    struct Doc {
        rows: usize,
        cols: usize,
        #[serde(with = "super::complex_vec")]
        values: Vec<Complex64>,
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        Doc {
            rows: m.nrows(),
            cols: m.ncols(),
            values: m.iter().copied().collect(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let doc = Doc::deserialize(d)?;
        CMatrix::from_shape_vec((doc.rows, doc.cols), doc.values).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_encoding() {
        assert_eq!(encode(1.0), "3ff0000000000000");
        assert_eq!(decode("c000000000000000").unwrap(), -2.0);
        assert!(decode("3ff").is_err());
        assert!(decode("zzzzzzzzzzzzzzzz").is_err());
    }

    proptest! {
        #[test]
        fn bit_exact_round_trip(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assert_eq!(decode(&encode(v)).unwrap().to_bits(), bits);
        }
    }
}
