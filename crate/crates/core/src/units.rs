//! Unit-carrying quantities for configuration files.
//!
//! Internally the toolkit works in millimetres, kilopascals and seconds.
//! Config values are strings such as `"2.5 mm"` or `"6.5 GPa"`; a bare number
//! for a dimensioned field is rejected.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PressureUnit {
    Pa,
    #[serde(rename = "kPa")]
    KPa,
    #[serde(rename = "MPa")]
    MPa,
    #[serde(rename = "GPa")]
    GPa,
}

impl PressureUnit {
    /// Multiplier converting a value in this unit to kPa.
    pub fn to_kpa(self) -> f64 {
        match self {
            PressureUnit::Pa => 1e-3,
            PressureUnit::KPa => 1.0,
            PressureUnit::MPa => 1e3,
            PressureUnit::GPa => 1e6,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            PressureUnit::Pa => "Pa",
            PressureUnit::KPa => "kPa",
            PressureUnit::MPa => "MPa",
            PressureUnit::GPa => "GPa",
        }
    }
}

impl FromStr for PressureUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Pa" => Ok(PressureUnit::Pa),
            "kPa" => Ok(PressureUnit::KPa),
            "MPa" => Ok(PressureUnit::MPa),
            "GPa" => Ok(PressureUnit::GPa),
            other => Err(Error::Config(format!("unknown pressure unit '{other}'"))),
        }
    }
}

impl fmt::Display for PressureUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Physical dimension of a configured quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Pressure,
    Time,
    Angle,
    Frequency,
    /// Creep gain: degrees per second per kilopascal.
    CreepGain,
}

impl Dimension {
    /// Canonical unit symbol and conversion factors for accepted symbols.
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[("mm", 1.0), ("cm", 10.0), ("m", 1e3), ("um", 1e-3)],
            Dimension::Pressure => &[("kPa", 1.0), ("Pa", 1e-3), ("MPa", 1e3), ("GPa", 1e6)],
            Dimension::Time => &[("s", 1.0), ("ms", 1e-3)],
            Dimension::Angle => &[("deg", 1.0), ("rad", 180.0 / std::f64::consts::PI)],
            Dimension::Frequency => &[("Hz", 1.0), ("fps", 1.0), ("kHz", 1e3)],
            Dimension::CreepGain => &[("deg/s/kPa", 1.0)],
        }
    }

    pub fn canonical(self) -> &'static str {
        self.units()[0].0
    }
}

/// Parses `"<number> <unit>"` into the canonical unit of `dim`.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_whitespace())
        .ok_or_else(|| Error::Config(format!("'{text}' lacks a unit (expected {})", dim.canonical())))?;
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .parse()
        .map_err(|_| Error::Config(format!("'{num}' is not a number")))?;
    let unit = unit.trim();
    let factor = dim
        .units()
        .iter()
        .find(|(sym, _)| *sym == unit)
        .map(|(_, f)| *f)
        .ok_or_else(|| Error::Config(format!("unit '{unit}' is not a valid {dim:?} unit")))?;
    Ok(value * factor)
}

macro_rules! quantity_type {
    ($name:ident, $dim:expr) => {
        /// Value stored in the canonical unit; (de)serialized as `"<value> <unit>"`.
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
        pub struct $name(pub f64);

        impl $name {
            pub const DIMENSION: Dimension = $dim;

            pub fn value(self) -> f64 {
                self.0
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(&format!("{} {}", self.0, Self::DIMENSION.canonical()))
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                #[derive(Deserialize)]
                #[serde(untagged)]
                enum Raw {
                    Text(String),
                    Number(f64),
                }
                match Raw::deserialize(d)? {
                    Raw::Text(t) => parse_quantity(&t, Self::DIMENSION)
                        .map($name)
                        .map_err(serde::de::Error::custom),
                    Raw::Number(n) => Err(serde::de::Error::custom(format!(
                        "{n} lacks a unit (expected e.g. \"{n} {}\")",
                        Self::DIMENSION.canonical()
                    ))),
                }
            }
        }
    };
}

quantity_type!(Length, Dimension::Length);
quantity_type!(Pressure, Dimension::Pressure);
quantity_type!(Time, Dimension::Time);
quantity_type!(Angle, Dimension::Angle);
quantity_type!(Frequency, Dimension::Frequency);
quantity_type!(CreepGain, Dimension::CreepGain);
