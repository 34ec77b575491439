//! Serde adapters for floats that may be non-finite. JSON has no literal for
//! inf or NaN, so those are written as the strings "inf", "-inf", "nan".

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Repr {
    Num(f64),
    Word(String),
}

fn to_repr(x: f64) -> Repr {
    if x.is_finite() {
        Repr::Num(x)
    } else if x.is_nan() {
        Repr::Word("nan".into())
    } else if x > 0.0 {
        Repr::Word("inf".into())
    } else {
        Repr::Word("-inf".into())
    }
}

fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
    match r {
        Repr::Num(x) => Ok(x),
        Repr::Word(w) => match w.as_str() {
            "nan" => Ok(f64::NAN),
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            other => Err(E::custom(format!("not a float: {other}"))),
        },
    }
}

pub mod ext_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }
}

pub mod ext_opt_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        x.map(to_repr).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<Repr>::deserialize(d)?.map(from_repr).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize, Deserialize, Debug)]
    struct Probe {
        #[serde(with = "ext_f64")]
        a: f64,
        #[serde(with = "ext_opt_f64")]
        b: Option<f64>,
    }

    #[test]
    fn non_finite_round_trip() {
        for (a, b) in [(f64::INFINITY, None), (0.1 + 0.2, Some(f64::NEG_INFINITY)), (1e-300, Some(f64::NAN))] {
            let s = serde_json::to_string(&Probe { a, b }).unwrap();
            let back: Probe = serde_json::from_str(&s).unwrap();
            assert_eq!(back.a.to_bits(), a.to_bits(), "{s}");
            match (back.b, b) {
                (Some(x), Some(y)) => assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()), "{s}"),
                (None, None) => {}
                other => panic!("{other:?}"),
            }
        }
    }
}
