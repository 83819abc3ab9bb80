//! Typed scalar values carried by attributes, condition references and
//! request context bindings.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

/// Declared kind of a scalar, as written in the `valueType` XML attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarType {
    String,
    Int,
    Bool,
    Decimal,
}

impl ScalarType {
    pub fn as_str(self) -> &'static str {
        match self {
            ScalarType::String => "string",
            ScalarType::Int => "int",
            ScalarType::Bool => "bool",
            ScalarType::Decimal => "decimal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "string" => Some(ScalarType::String),
            "int" | "integer" => Some(ScalarType::Int),
            "bool" | "boolean" => Some(ScalarType::Bool),
            "decimal" => Some(ScalarType::Decimal),
            _ => None,
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, ScalarType::Int | ScalarType::Decimal)
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single typed value. Decimals are finite `f64`s.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Scalar {
    String(String),
    Int(i64),
    Bool(bool),
    Decimal(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot read {text:?} as {expected}")]
pub struct ScalarParseError {
    pub text: String,
    pub expected: ScalarType,
}

impl Scalar {
    pub fn kind(&self) -> ScalarType {
        match self {
            Scalar::String(_) => ScalarType::String,
            Scalar::Int(_) => ScalarType::Int,
            Scalar::Bool(_) => ScalarType::Bool,
            Scalar::Decimal(_) => ScalarType::Decimal,
        }
    }

    /// Parses `text` as a value of the given kind. Decimals must be finite.
    pub fn parse_as(kind: ScalarType, text: &str) -> Result<Scalar, ScalarParseError> {
        let err = || ScalarParseError {
            text: text.to_string(),
            expected: kind,
        };
        match kind {
            ScalarType::String => Ok(Scalar::String(text.to_string())),
            ScalarType::Int => text.trim().parse().map(Scalar::Int).map_err(|_| err()),
            ScalarType::Bool => match text.trim() {
                "true" => Ok(Scalar::Bool(true)),
                "false" => Ok(Scalar::Bool(false)),
                _ => Err(err()),
            },
            ScalarType::Decimal => {
                let v: f64 = text.trim().parse().map_err(|_| err())?;
                if v.is_finite() {
                    Ok(Scalar::Decimal(v))
                } else {
                    Err(err())
                }
            }
        }
    }

    /// Lexical form used on the wire. Parsing it back with [`Scalar::parse_as`]
    /// and [`Scalar::kind`] yields an equal value.
    pub fn lexical(&self) -> String {
        match self {
            Scalar::String(s) => s.clone(),
            Scalar::Int(i) => i.to_string(),
            Scalar::Bool(b) => b.to_string(),
            Scalar::Decimal(d) => d.to_string(),
        }
    }

    fn as_f64(&self) -> Option<f64> {
        match self {
            Scalar::Int(i) => Some(*i as f64),
            Scalar::Decimal(d) => Some(*d),
            _ => None,
        }
    }

    /// Equality across compatible kinds. Int and Decimal compare numerically;
    /// any other kind pairing is `None` (type mismatch).
    pub fn loose_eq(&self, other: &Scalar) -> Option<bool> {
        match (self, other) {
            (Scalar::String(a), Scalar::String(b)) => Some(a == b),
            (Scalar::Bool(a), Scalar::Bool(b)) => Some(a == b),
            (Scalar::Int(a), Scalar::Int(b)) => Some(a == b),
            _ => {
                let (a, b) = (self.as_f64()?, other.as_f64()?);
                Some(a == b)
            }
        }
    }

    /// Numeric ordering. `None` unless both sides are numeric.
    pub fn numeric_cmp(&self, other: &Scalar) -> Option<Ordering> {
        match (self, other) {
            (Scalar::Int(a), Scalar::Int(b)) => Some(a.cmp(b)),
            _ => self.as_f64()?.partial_cmp(&other.as_f64()?),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::String(s) => write!(f, "{s:?}"),
            other => f.write_str(&other.lexical()),
        }
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::String(s.to_string())
    }
}

impl From<i64> for Scalar {
    fn from(i: i64) -> Self {
        Scalar::Int(i)
    }
}

impl From<bool> for Scalar {
    fn from(b: bool) -> Self {
        Scalar::Bool(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn string_never_equals_number() {
        assert_eq!(Scalar::from("3").loose_eq(&Scalar::Int(3)), None);
        assert_eq!(Scalar::Int(3).numeric_cmp(&Scalar::from("3")), None);
    }

    #[test]
    fn int_and_decimal_compare_numerically() {
        assert_eq!(Scalar::Int(3).loose_eq(&Scalar::Decimal(3.0)), Some(true));
        assert_eq!(
            Scalar::Decimal(2.5).numeric_cmp(&Scalar::Int(3)),
            Some(Ordering::Less)
        );
    }

    #[test]
    fn non_finite_decimals_rejected() {
        assert!(Scalar::parse_as(ScalarType::Decimal, "NaN").is_err());
        assert!(Scalar::parse_as(ScalarType::Decimal, "inf").is_err());
        assert_eq!(
            Scalar::parse_as(ScalarType::Decimal, "0.1").unwrap(),
            Scalar::Decimal(0.1)
        );
    }

    #[test]
    fn lexical_form_reparses() {
        for v in [
            Scalar::Decimal(1e-7),
            Scalar::Decimal(-3.0),
            Scalar::Int(i64::MIN),
            Scalar::Bool(false),
            Scalar::from(" padded "),
        ] {
            assert_eq!(Scalar::parse_as(v.kind(), &v.lexical()).unwrap(), v);
        }
    }
}
