//! Unit-tagged quantities: `{"value": 100, "unit": "nm"}`.

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dim {
    Length,
    InverseLength,
    Temperature,
    Field,
    Frequency,
    Pressure,
    Mass,
    Time,
    Torque,
    Angle,
}

impl Dim {
    pub fn si_unit(self) -> &'static str {
        match self {
            Dim::Length => "m",
            Dim::InverseLength => "1/m",
            Dim::Temperature => "K",
            Dim::Field => "T",
            Dim::Frequency => "rad/s",
            Dim::Pressure => "Pa",
            Dim::Mass => "kg",
            Dim::Time => "s",
            Dim::Torque => "N*m",
            Dim::Angle => "rad",
        }
    }
}

const UNITS: &[(&str, Dim, f64)] = &[
    ("m", Dim::Length, 1.0),
    ("cm", Dim::Length, 1e-2),
    ("mm", Dim::Length, 1e-3),
    ("um", Dim::Length, 1e-6),
    ("µm", Dim::Length, 1e-6),
    ("nm", Dim::Length, 1e-9),
    ("1/m", Dim::InverseLength, 1.0),
    ("1/um", Dim::InverseLength, 1e6),
    ("1/nm", Dim::InverseLength, 1e9),
    ("K", Dim::Temperature, 1.0),
    ("T", Dim::Field, 1.0),
    ("mT", Dim::Field, 1e-3),
    ("rad/s", Dim::Frequency, 1.0),
    ("Pa", Dim::Pressure, 1.0),
    ("mbar", Dim::Pressure, 100.0),
    ("torr", Dim::Pressure, fluxtorque::constants::PA_PER_TORR),
    ("kg", Dim::Mass, 1.0),
    ("amu", Dim::Mass, 1.660_539_066_6e-27),
    ("s", Dim::Time, 1.0),
    ("ms", Dim::Time, 1e-3),
    ("us", Dim::Time, 1e-6),
    ("ns", Dim::Time, 1e-9),
    ("N*m", Dim::Torque, 1.0),
    ("N·m", Dim::Torque, 1.0),
    ("rad", Dim::Angle, 1.0),
    ("deg", Dim::Angle, std::f64::consts::PI / 180.0),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    pub fn si(value: f64, dim: Dim) -> Self {
        Quantity {
            value,
            unit: dim.si_unit().to_string(),
        }
    }

    /// Value in SI units; `field` names the config key in errors.
    pub fn to_si(&self, dim: Dim, field: &str) -> Result<f64, CliError> {
        let Some(&(_, d, factor)) = UNITS.iter().find(|u| u.0 == self.unit) else {
            return Err(CliError::config(field, format!("unknown unit `{}`", self.unit)));
        };
        if d != dim {
            return Err(CliError::config(
                field,
                format!("unit `{}` is not a {:?} unit (expected e.g. `{}`)", self.unit, dim, dim.si_unit()),
            ));
        }
        if !self.value.is_finite() {
            return Err(CliError::config(field, "value must be finite"));
        }
        Ok(self.value * factor)
    }

    /// SI value rounded to 12 significant digits, so `300 nm` and
    /// `0.3 um` land on the same bits.
    pub fn canonical(&self, dim: Dim, field: &str) -> Result<Quantity, CliError> {
        Ok(Quantity::si(round_sig(self.to_si(dim, field)?), dim))
    }
}

/// Round to 12 significant decimal digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}
