//! Config values with explicit units: `"128 GB"`, `"40 Gbps"`, `"30 d"`.
//!
//! Byte and bit prefixes are decimal (`1 TB = 10^12 B`); `KiB`..`TiB` are
//! accepted for binary sizes. Values serialize back to a canonical string
//! that parses to the same value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::Error;

fn split(s: &str) -> Result<(f64, &str), Error> {
    let s = s.trim();
    let at = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E'))
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(at);
    let value: f64 = num.trim().parse().map_err(|_| Error::Unit(s.to_string()))?;
    if !value.is_finite() {
        return Err(Error::Unit(s.to_string()));
    }
    Ok((value, unit.trim()))
}

fn whole(value: f64, scale: f64, raw: &str) -> Result<u64, Error> {
    let v = value * scale;
    if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(Error::Unit(raw.to_string()));
    }
    Ok(v as u64)
}

/// A byte count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ByteSize(pub u64);

const BYTE_UNITS: [(&str, f64); 9] = [
    ("TB", 1e12),
    ("GB", 1e9),
    ("MB", 1e6),
    ("KB", 1e3),
    ("TiB", 1_099_511_627_776.0),
    ("GiB", 1_073_741_824.0),
    ("MiB", 1_048_576.0),
    ("KiB", 1_024.0),
    ("B", 1.0),
];

impl FromStr for ByteSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let (value, unit) = split(s)?;
        let scale = BYTE_UNITS
            .iter()
            .find(|(u, _)| u.eq_ignore_ascii_case(unit))
            .map(|(_, f)| *f)
            .ok_or_else(|| Error::Unit(s.to_string()))?;
        whole(value, scale, s).map(ByteSize)
    }
}

impl fmt::Display for ByteSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (unit, scale) in &BYTE_UNITS[..4] {
            let scale = *scale as u64;
            if self.0 >= scale && self.0.is_multiple_of(scale) {
                return write!(f, "{} {unit}", self.0 / scale);
            }
        }
        write!(f, "{} B", self.0)
    }
}

/// A link speed in gigabits per second.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Bandwidth(pub f64);

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let (value, unit) = split(s)?;
        let scale = match unit.to_ascii_lowercase().as_str() {
            "tbps" => 1e3,
            "gbps" => 1.0,
            "mbps" => 1e-3,
            "kbps" => 1e-6,
            _ => return Err(Error::Unit(s.to_string())),
        };
        if value <= 0.0 {
            return Err(Error::Unit(s.to_string()));
        }
        Ok(Bandwidth(value * scale))
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} Gbps", self.0)
    }
}

/// A span of time in whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Duration(pub i64);

const TIME_UNITS: [(&str, i64); 5] = [("w", 604_800), ("d", 86_400), ("h", 3_600), ("min", 60), ("s", 1)];

impl FromStr for Duration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let (value, unit) = split(s)?;
        let scale = TIME_UNITS
            .iter()
            .find(|(u, _)| *u == unit.to_ascii_lowercase())
            .map(|(_, f)| *f)
            .ok_or_else(|| Error::Unit(s.to_string()))?;
        let secs = whole(value, scale as f64, s)?;
        i64::try_from(secs).map(Duration).map_err(|_| Error::Unit(s.to_string()))
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (unit, scale) in &TIME_UNITS[..4] {
            if self.0 >= *scale && self.0 % scale == 0 {
                return write!(f, "{} {unit}", self.0 / scale);
            }
        }
        write!(f, "{} s", self.0)
    }
}

macro_rules! string_serde {
    ($($t:ty),*) => {$(
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    )*};
}

string_serde!(ByteSize, Bandwidth, Duration);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_sizes_are_decimal() {
        assert_eq!("128 GB".parse::<ByteSize>().unwrap(), ByteSize(128_000_000_000));
        assert_eq!("1TB".parse::<ByteSize>().unwrap(), ByteSize(1_000_000_000_000));
        assert_eq!("0.5 GB".parse::<ByteSize>().unwrap(), ByteSize(500_000_000));
        assert_eq!("1 KiB".parse::<ByteSize>().unwrap(), ByteSize(1024));
        assert_eq!("12 B".parse::<ByteSize>().unwrap(), ByteSize(12));
        assert!("12".parse::<ByteSize>().is_err());
        assert!("1.5 B".parse::<ByteSize>().is_err());
        assert!("-1 GB".parse::<ByteSize>().is_err());
    }

    #[test]
    fn canonical_strings_round_trip() {
        for raw in ["128 GB", "10 TB", "1500 MB", "7 B"] {
            let v: ByteSize = raw.parse().unwrap();
            assert_eq!(v.to_string(), raw);
        }
        assert_eq!(ByteSize(1024).to_string(), "1024 B");
        let d: Duration = "30 d".parse().unwrap();
        assert_eq!((d.0, d.to_string()), (2_592_000, "30 d".to_string()));
        assert_eq!(Duration(90).to_string(), "90 s");
        assert_eq!(Duration(604_800).to_string(), "1 w");
    }

    #[test]
    fn bandwidth_in_gbps() {
        assert_eq!("40 Gbps".parse::<Bandwidth>().unwrap(), Bandwidth(40.0));
        assert_eq!("500 Mbps".parse::<Bandwidth>().unwrap(), Bandwidth(0.5));
        assert!("40 GB".parse::<Bandwidth>().is_err());
        assert!("0 Gbps".parse::<Bandwidth>().is_err());
    }
}
