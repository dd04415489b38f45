//! Fixed-point currency amounts.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Currency amount stored in ten-thousandths of a unit (4 decimal places).
///
/// Serialized as a decimal string such as `"32.54"` so that JSON consumers never
/// see a binary float.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Money(i128);

impl Money {
    pub const SCALE: i128 = 10_000;
    pub const ZERO: Money = Money(0);
    /// Largest amount the ledger will represent: 10^15 whole units.
    pub const MAX: Money = Money(1_000_000_000_000_000 * Self::SCALE);

    pub const fn from_raw(ten_thousandths: i128) -> Money {
        Money(ten_thousandths)
    }

    pub const fn from_cents(cents: i64) -> Money {
        Money(cents as i128 * 100)
    }

    pub const fn from_units(units: i64) -> Money {
        Money(units as i128 * Self::SCALE)
    }

    pub fn raw(self) -> i128 {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    /// `self * n`, failing once the product leaves the representable range.
    pub fn checked_mul(self, n: u64) -> Result<Money> {
        self.0
            .checked_mul(n as i128)
            .map(Money)
            .filter(|m| m.0.abs() <= Self::MAX.0)
            .ok_or_else(|| Error::Range(format!("{self} x {n} exceeds {}", Money::MAX)))
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }
}

impl Add for Money {
    type Output = Money;

    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.copied().sum()
    }
}

impl fmt::Display for Money {
    /// At least two decimals; four when the sub-cent digits are non-zero.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / Self::SCALE as u128;
        let frac = abs % Self::SCALE as u128;
        if frac % 100 == 0 {
            write!(f, "{sign}{whole}.{:02}", frac / 100)
        } else {
            write!(f, "{sign}{whole}.{frac:04}")
        }
    }
}

impl FromStr for Money {
    type Err = Error;

    /// Accepts `12`, `12.5`, `$0.02`, `-3.0001`; at most four decimals.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::input(format!("invalid amount {s:?}"));
        let t = s.trim();
        let (neg, t) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let t = t.strip_prefix('$').unwrap_or(t);
        let (whole, frac) = t.split_once('.').unwrap_or((t, ""));
        if whole.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if frac.len() > 4 {
            return Err(Error::input(format!("amount {s:?} has more than 4 decimal places")));
        }
        let whole: i128 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| bad())? };
        let frac_val: i128 = format!("{frac:0<4}").parse().map_err(|_| bad())?;
        let raw = whole
            .checked_mul(Self::SCALE)
            .and_then(|w| w.checked_add(frac_val))
            .filter(|v| *v <= Self::MAX.0)
            .ok_or_else(|| Error::Range(format!("amount {s:?} too large")))?;
        Ok(Money(if neg { -raw } else { raw }))
    }
}

impl TryFrom<String> for Money {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Money> for String {
    fn from(m: Money) -> Self {
        m.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn display_and_parse() {
        assert_eq!(Money::from_cents(2).to_string(), "0.02");
        assert_eq!("$0.02".parse::<Money>().unwrap(), Money::from_cents(2));
        assert_eq!("32.54".parse::<Money>().unwrap(), Money::from_cents(3254));
        assert_eq!(Money::from_raw(5).to_string(), "0.0005");
        assert_eq!("-1.5".parse::<Money>().unwrap().to_string(), "-1.50");
        assert!("1.00001".parse::<Money>().is_err());
        assert!("abc".parse::<Money>().is_err());
        assert!("".parse::<Money>().is_err());
        assert!(".".parse::<Money>().is_err());
    }

    #[test]
    fn checked_mul_range() {
        assert_eq!(Money::from_units(1).checked_mul(7_000_000_000_000).unwrap(), Money::from_units(7_000_000_000_000));
        assert!(matches!(Money::from_units(2).checked_mul(1_000_000_000_000_000), Err(Error::Range(_))));
    }

    #[test]
    fn serde_is_a_string() {
        let json = serde_json::to_string(&Money::from_cents(441)).unwrap();
        assert_eq!(json, "\"4.41\"");
        let back: Money = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Money::from_cents(441));
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(raw in -10_000_000_000i128..10_000_000_000i128) {
            let m = Money::from_raw(raw);
            prop_assert_eq!(m.to_string().parse::<Money>().unwrap(), m);
        }
    }
}
