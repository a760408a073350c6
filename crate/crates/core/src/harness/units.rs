//! Quantities with unit suffixes: `20ns`, `25MHz`, `0.8pi`, `780nm`.
//!
//! Plain numbers are taken as SI base units (seconds, hertz, meters,
//! radians). Config fields accept either form; serialization always writes
//! plain SI numbers.

use std::f64::consts::PI;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Time,
    Frequency,
    Length,
    Angle,
    Dimensionless,
}

impl Dimension {
    fn name(self) -> &'static str {
        match self {
            Dimension::Time => "time",
            Dimension::Frequency => "frequency",
            Dimension::Length => "length",
            Dimension::Angle => "angle",
            Dimension::Dimensionless => "number",
        }
    }

    fn scale(self, unit: &str) -> Option<f64> {
        let s = match (self, unit) {
            (_, "") => 1.0,
            (Dimension::Time, "s") => 1.0,
            (Dimension::Time, "ms") => 1e-3,
            (Dimension::Time, "us" | "µs") => 1e-6,
            (Dimension::Time, "ns") => 1e-9,
            (Dimension::Time, "ps") => 1e-12,
            (Dimension::Frequency, "Hz") => 1.0,
            (Dimension::Frequency, "kHz") => 1e3,
            (Dimension::Frequency, "MHz") => 1e6,
            (Dimension::Frequency, "GHz") => 1e9,
            (Dimension::Length, "m") => 1.0,
            (Dimension::Length, "km") => 1e3,
            (Dimension::Length, "mm") => 1e-3,
            (Dimension::Length, "um" | "µm") => 1e-6,
            (Dimension::Length, "nm") => 1e-9,
            (Dimension::Angle, "rad") => 1.0,
            (Dimension::Angle, "pi" | "π") => PI,
            (Dimension::Angle, "deg") => PI / 180.0,
            _ => return None,
        };
        Some(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot read `{text}` as a {dimension}")]
pub struct UnitError {
    pub text: String,
    pub dimension: &'static str,
}

/// Parses `<number><unit>`; whitespace between the two is allowed.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, UnitError> {
    let err = || UnitError {
        text: text.to_string(),
        dimension: dim.name(),
    };
    let t = text.trim();
    let split = t
        .char_indices()
        .find(|(_, c)| c.is_alphabetic() || *c == 'µ' || *c == 'π')
        .map_or(t.len(), |(i, _)| i);
    // keep exponents like 1e-3 inside the number
    let split = match t[split..].chars().next() {
        Some('e' | 'E')
            if t[split + 1..]
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '+') =>
        {
            let rest = &t[split + 1..];
            let exp_len = rest
                .char_indices()
                .skip(1)
                .find(|(_, c)| !c.is_ascii_digit())
                .map_or(rest.len(), |(i, _)| i);
            split + 1 + exp_len
        }
        _ => split,
    };
    let (num, unit) = t.split_at(split);
    let unit = unit.trim();
    let scale = dim.scale(unit).ok_or_else(err)?;
    let value = if num.trim().is_empty() && dim == Dimension::Angle && scale == PI {
        1.0
    } else {
        num.trim().parse::<f64>().map_err(|_| err())?
    };
    Ok(value * scale)
}

struct QuantityVisitor(Dimension);

impl<'de> Visitor<'de> for QuantityVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a {} as a number or a string with a unit", self.0.name())
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
        parse_quantity(v, self.0).map_err(E::custom)
    }
}

pub fn time<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    d.deserialize_any(QuantityVisitor(Dimension::Time))
}

pub fn frequency<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    d.deserialize_any(QuantityVisitor(Dimension::Frequency))
}

pub fn length<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    d.deserialize_any(QuantityVisitor(Dimension::Length))
}

pub fn angle<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    d.deserialize_any(QuantityVisitor(Dimension::Angle))
}

pub fn number<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    d.deserialize_any(QuantityVisitor(Dimension::Dimensionless))
}

pub fn opt_length<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    length(d).map(Some)
}

pub fn opt_number<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    number(d).map(Some)
}

pub fn time_pair<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 2], D::Error> {
    #[derive(serde::Deserialize)]
    struct Pair(
        #[serde(deserialize_with = "time")] f64,
        #[serde(deserialize_with = "time")] f64,
    );
    let Pair(a, b) = serde::Deserialize::deserialize(d)?;
    Ok([a, b])
}

/// Value parser for clap arguments.
pub fn time_arg(s: &str) -> Result<f64, String> {
    parse_quantity(s, Dimension::Time).map_err(|e| e.to_string())
}

pub fn angle_arg(s: &str) -> Result<f64, String> {
    parse_quantity(s, Dimension::Angle).map_err(|e| e.to_string())
}

pub fn length_arg(s: &str) -> Result<f64, String> {
    parse_quantity(s, Dimension::Length).map_err(|e| e.to_string())
}
