//! Exact fixed-point decimals with four fractional digits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const SCALE: i128 = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FixedError {
    #[error("arithmetic overflow")]
    Overflow,
    #[error("result not representable at scale 4")]
    Inexact,
    #[error("division by zero")]
    DivisionByZero,
    #[error("invalid decimal literal `{0}`")]
    BadLiteral(String),
}

/// A decimal number with exactly four fractional digits, stored as a scaled
/// integer. All operations are checked: overflow and results that would need
/// more than four fractional digits are errors, never rounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fixed4(i128);

impl Fixed4 {
    pub const ZERO: Fixed4 = Fixed4(0);
    pub const ONE: Fixed4 = Fixed4(SCALE);

    /// Build from an already-scaled raw value (`raw` = value * 10^4).
    pub fn from_raw(raw: i128) -> Fixed4 {
        Fixed4(raw)
    }

    pub fn from_int(n: i64) -> Fixed4 {
        Fixed4(n as i128 * SCALE)
    }

    pub fn raw(self) -> i128 {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, rhs: Fixed4) -> Result<Fixed4, FixedError> {
        self.0
            .checked_add(rhs.0)
            .map(Fixed4)
            .ok_or(FixedError::Overflow)
    }

    pub fn checked_sub(self, rhs: Fixed4) -> Result<Fixed4, FixedError> {
        self.0
            .checked_sub(rhs.0)
            .map(Fixed4)
            .ok_or(FixedError::Overflow)
    }

    pub fn checked_mul(self, rhs: Fixed4) -> Result<Fixed4, FixedError> {
        let wide = self.0.checked_mul(rhs.0).ok_or(FixedError::Overflow)?;
        if wide % SCALE != 0 {
            return Err(FixedError::Inexact);
        }
        Ok(Fixed4(wide / SCALE))
    }

    pub fn checked_div(self, rhs: Fixed4) -> Result<Fixed4, FixedError> {
        if rhs.0 == 0 {
            return Err(FixedError::DivisionByZero);
        }
        let wide = self.0.checked_mul(SCALE).ok_or(FixedError::Overflow)?;
        if wide % rhs.0 != 0 {
            return Err(FixedError::Inexact);
        }
        Ok(Fixed4(wide / rhs.0))
    }

    /// Whole number of seconds, when the value is a non-negative integer.
    pub fn as_seconds(self) -> Option<u64> {
        if self.0 < 0 || self.0 % SCALE != 0 {
            return None;
        }
        u64::try_from(self.0 / SCALE).ok()
    }

    pub fn from_seconds(t: u64) -> Result<Fixed4, FixedError> {
        i128::from(t)
            .checked_mul(SCALE)
            .map(Fixed4)
            .ok_or(FixedError::Overflow)
    }
}

impl fmt::Display for Fixed4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{}{}.{:04}", sign, abs / SCALE as u128, abs % SCALE as u128)
    }
}

impl FromStr for Fixed4 {
    type Err = FixedError;

    fn from_str(s: &str) -> Result<Fixed4, FixedError> {
        let bad = || FixedError::BadLiteral(s.to_string());
        let (sign, rest) = match s.strip_prefix('-') {
            Some(r) => (-1i128, r),
            None => (1i128, s),
        };
        let (int_part, frac_part) = match rest.split_once('.') {
            Some((i, f)) => (i, f),
            None => (rest, ""),
        };
        if int_part.is_empty() || frac_part.len() > 4 {
            return Err(bad());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        let int: i128 = int_part.parse().map_err(|_| bad())?;
        let mut frac: i128 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| bad())?
        };
        for _ in frac_part.len()..4 {
            frac *= 10;
        }
        let raw = int
            .checked_mul(SCALE)
            .and_then(|v| v.checked_add(frac))
            .ok_or(FixedError::Overflow)?;
        Ok(Fixed4(sign * raw))
    }
}

impl Serialize for Fixed4 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Fixed4 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Fixed4, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fx(s: &str) -> Fixed4 {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(fx("2").to_string(), "2.0000");
        assert_eq!(fx("0.1").to_string(), "0.1000");
        assert_eq!(fx("3600").to_string(), "3600.0000");
        assert_eq!(fx("-1.5").to_string(), "-1.5000");
        assert!("0.00001".parse::<Fixed4>().is_err());
        assert!("".parse::<Fixed4>().is_err());
        assert!("1.2.3".parse::<Fixed4>().is_err());
    }

    #[test]
    fn exact_multiplication() {
        // 100 * 0.1 = 10, exactly: raws 1_000_000 * 1_000 / 10_000 = 100_000
        assert_eq!(fx("100").checked_mul(fx("0.1")).unwrap(), fx("10"));
        assert_eq!(fx("0.5").checked_mul(fx("0.5")).unwrap(), fx("0.25"));
        assert_eq!(
            fx("0.0001").checked_mul(fx("0.1")),
            Err(FixedError::Inexact)
        );
    }

    #[test]
    fn exact_division() {
        assert_eq!(fx("9").checked_div(fx("3")).unwrap(), fx("3"));
        assert_eq!(fx("1").checked_div(fx("8")).unwrap(), fx("0.125"));
        assert_eq!(fx("1").checked_div(fx("3")), Err(FixedError::Inexact));
        assert_eq!(fx("1").checked_div(fx("0")), Err(FixedError::DivisionByZero));
    }

    #[test]
    fn overflow_is_an_error() {
        let big = Fixed4::from_raw(i128::MAX);
        assert_eq!(big.checked_add(Fixed4::ONE), Err(FixedError::Overflow));
        assert_eq!(big.checked_mul(fx("2")), Err(FixedError::Overflow));
    }

    #[test]
    fn seconds_view() {
        assert_eq!(fx("3600").as_seconds(), Some(3600));
        assert_eq!(fx("3600.5").as_seconds(), None);
        assert_eq!(fx("-1").as_seconds(), None);
        assert_eq!(Fixed4::from_seconds(3).unwrap(), fx("3"));
    }
}
