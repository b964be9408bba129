//! Exact decimal fractions for sweep parameters.
//!
//! Sweep values like budget or sleep percentages are decimal strings
//! ("0.3", "0.75"). They are kept as `numer / 10^k` and applied to durations
//! with exact integer arithmetic, so 0.3 of a 100 ms period is 30 ms on the
//! nose and CSV output never depends on float formatting.

use std::fmt;
use std::str::FromStr;

use crate::time::TimeNs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fraction {
    numer: u64,
    denom: u64,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FractionError {
    #[error("`{0}` is not a decimal fraction")]
    Malformed(String),

    #[error("`{0}` has more than 9 fractional digits (nanosecond resolution)")]
    TooPrecise(String),

    #[error("{frac} of {of} ns is not an integer nanosecond count")]
    Inexact { frac: Fraction, of: TimeNs },
}

impl Fraction {
    pub const ZERO: Fraction = Fraction { numer: 0, denom: 1 };
    pub const ONE: Fraction = Fraction { numer: 1, denom: 1 };

    pub fn numer(&self) -> u64 {
        self.numer
    }

    pub fn denom(&self) -> u64 {
        self.denom
    }

    pub fn is_zero(&self) -> bool {
        self.numer == 0
    }

    pub fn gt_zero(&self) -> bool {
        self.numer > 0
    }

    pub fn le_one(&self) -> bool {
        self.numer <= self.denom
    }

    /// `1 - self`; requires `self <= 1`.
    pub fn one_minus(&self) -> Fraction {
        assert!(self.le_one());
        Fraction {
            numer: self.denom - self.numer,
            denom: self.denom,
        }
    }

    /// Applies the fraction to a duration, exactly.
    pub fn of(&self, t: TimeNs) -> Result<TimeNs, FractionError> {
        let product = t.as_nanos() as u128 * self.numer as u128;
        if !product.is_multiple_of(self.denom as u128) {
            return Err(FractionError::Inexact { frac: *self, of: t });
        }
        Ok(TimeNs::from_nanos((product / self.denom as u128) as u64))
    }
}

impl FromStr for Fraction {
    type Err = FractionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || FractionError::Malformed(s.to_owned());
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(malformed());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
        {
            return Err(malformed());
        }
        if frac_part.len() > 9 {
            return Err(FractionError::TooPrecise(s.to_owned()));
        }
        let int_val: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| malformed())?
        };
        let frac_val: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| malformed())?
        };
        let denom = 10u64.pow(frac_part.len() as u32);
        let numer = int_val
            .checked_mul(denom)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(malformed)?;
        Ok(Fraction { numer, denom })
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let int = self.numer / self.denom;
        let rem = self.numer % self.denom;
        if rem == 0 {
            return write!(f, "{int}");
        }
        let digits = self.denom.ilog10() as usize;
        let frac = format!("{rem:0width$}", width = digits);
        write!(f, "{int}.{}", frac.trim_end_matches('0'))
    }
}
