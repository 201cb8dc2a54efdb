//! Sweep values such as `0.5`, `pi/2`, `1.5pi` or `0.25k`.

use std::f64::consts::PI;
use std::str::FromStr;

/// A sweep value, possibly in units of π or of the packet wavenumber |k0|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepValue {
    coef: f64,
    unit: Unit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Unit {
    One,
    Pi,
    K,
}

impl SweepValue {
    /// Numeric value, with `k` standing for `k_norm`.
    pub fn resolve(self, k_norm: f64) -> f64 {
        match self.unit {
            Unit::One => self.coef,
            Unit::Pi => self.coef * PI,
            Unit::K => self.coef * k_norm,
        }
    }
}

impl FromStr for SweepValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim().to_ascii_lowercase().replace('π', "pi");
        let bad = || format!("cannot parse sweep value '{s}' (try 0.5, pi/2, 1.5pi or 0.25k)");
        let (num, den) = match text.split_once('/') {
            Some((n, d)) => (n.trim(), Some(d.trim().parse::<f64>().map_err(|_| bad())?)),
            None => (text.as_str(), None),
        };
        let (head, unit) = if let Some(h) = num.strip_suffix("pi") {
            (h, Unit::Pi)
        } else if let Some(h) = num.strip_suffix('k') {
            (h, Unit::K)
        } else {
            (num, Unit::One)
        };
        let head = head.trim().trim_end_matches('*').trim();
        let coef = match (head, unit) {
            ("", Unit::Pi | Unit::K) | ("+", Unit::Pi | Unit::K) => 1.0,
            ("-", Unit::Pi | Unit::K) => -1.0,
            _ => head.parse::<f64>().map_err(|_| bad())?,
        };
        let coef = match den {
            Some(0.0) => return Err(bad()),
            Some(d) => coef / d,
            None => coef,
        };
        if !coef.is_finite() {
            return Err(bad());
        }
        Ok(Self { coef, unit })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> f64 {
        s.parse::<SweepValue>().unwrap().resolve(12.0)
    }

    #[test]
    fn parses_units() {
        assert_eq!(v("0.5"), 0.5);
        assert_eq!(v("pi"), PI);
        assert_eq!(v("1.5pi"), 1.5 * PI);
        assert_eq!(v("pi/2"), PI / 2.0);
        assert_eq!(v("-π"), -PI);
        assert_eq!(v("2*pi"), 2.0 * PI);
        assert_eq!(v("0.25k"), 3.0);
        assert_eq!(v("k"), 12.0);
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "pie", "1/0", "x", "nan"] {
            assert!(s.parse::<SweepValue>().is_err(), "{s}");
        }
    }
}
