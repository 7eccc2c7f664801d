//! SI-facing conversion layer. Internally ħ = 1: lengths stay in metres,
//! times in seconds, and a mass becomes `m / ħ_SI` (units of s/m²).

use crate::error::{Error, Result};

/// Reduced Planck constant in J·s.
pub const HBAR_SI: f64 = 1.054_571_817e-34;
/// Unified atomic mass unit in kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Time,
    Mass,
}

impl Dimension {
    fn suffixes(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[("nm", 1e-9), ("um", 1e-6), ("mm", 1e-3), ("m", 1.0)],
            Dimension::Time => &[("ns", 1e-9), ("us", 1e-6), ("ms", 1e-3), ("s", 1.0)],
            Dimension::Mass => &[("kg", 1.0 / HBAR_SI), ("u", ATOMIC_MASS_UNIT / HBAR_SI)],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Mass => "mass",
        }
    }
}

/// Parses a number with an optional SI suffix (`100um`, `2.5ms`, `7u`,
/// `1.165e-26kg`). Unsuffixed values are taken as canonical units.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let t = text.trim();
    let split = t
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_ascii_alphabetic())
        .last()
        .map_or(t.len(), |(i, _)| i);
    // an exponent marker belongs to the number, not the suffix
    let (num, suffix) = t.split_at(split);
    let factor = if suffix.is_empty() {
        1.0
    } else {
        dim.suffixes()
            .iter()
            .find(|(s, _)| *s == suffix)
            .map(|(_, f)| *f)
            .ok_or_else(|| Error::invalid(format!("unknown {} unit '{suffix}' in '{t}'", dim.name())))?
    };
    let value: f64 = num
        .parse()
        .map_err(|_| Error::invalid(format!("'{t}' is not a {} value", dim.name())))?;
    if !value.is_finite() {
        return Err(Error::NonFinite("quantity"));
    }
    Ok(value * factor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert_eq!(parse_quantity("2.5", Dimension::Length).unwrap(), 2.5);
        assert!((parse_quantity("100um", Dimension::Length).unwrap() - 1e-4).abs() < 1e-18);
        assert!((parse_quantity("3ms", Dimension::Time).unwrap() - 3e-3).abs() < 1e-18);
        assert!((parse_quantity("1e-3s", Dimension::Time).unwrap() - 1e-3).abs() < 1e-18);
        let m = parse_quantity("7u", Dimension::Mass).unwrap();
        assert!((m * HBAR_SI / ATOMIC_MASS_UNIT - 7.0).abs() < 1e-12);
        assert!(parse_quantity("3kg", Dimension::Length).is_err());
        assert!(parse_quantity("abc", Dimension::Length).is_err());
    }
}
