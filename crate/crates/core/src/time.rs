//! Virtual time in integer nanoseconds.
//!
//! Everything in the simulator — instants, durations, budgets, replenishment
//! periods — is a [`TimeNs`]. No floating point anywhere on the time axis, so
//! two runs of the same scenario produce byte-identical traces.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

/// A non-negative point in time or duration, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TimeNs(u64);

impl TimeNs {
    pub const ZERO: TimeNs = TimeNs(0);

    pub const fn from_nanos(ns: u64) -> Self {
        TimeNs(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        TimeNs(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        TimeNs(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        TimeNs(s * 1_000_000_000)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Subtraction that reports underflow instead of wrapping.
    pub fn checked_sub(self, rhs: TimeNs) -> Option<TimeNs> {
        self.0.checked_sub(rhs.0).map(TimeNs)
    }

    pub fn checked_add(self, rhs: TimeNs) -> Option<TimeNs> {
        self.0.checked_add(rhs.0).map(TimeNs)
    }

    pub fn min(self, rhs: TimeNs) -> TimeNs {
        TimeNs(self.0.min(rhs.0))
    }

    pub fn max(self, rhs: TimeNs) -> TimeNs {
        TimeNs(self.0.max(rhs.0))
    }

    /// Saturating multiply by an integer count (used for periodic schedules).
    pub fn saturating_mul(self, k: u64) -> TimeNs {
        TimeNs(self.0.saturating_mul(k))
    }
}

impl Add for TimeNs {
    type Output = TimeNs;
    fn add(self, rhs: TimeNs) -> TimeNs {
        TimeNs(
            self.0
                .checked_add(rhs.0)
                .expect("virtual time overflow (u64 nanoseconds)"),
        )
    }
}

impl AddAssign for TimeNs {
    fn add_assign(&mut self, rhs: TimeNs) {
        *self = *self + rhs;
    }
}

impl Sub for TimeNs {
    type Output = TimeNs;
    fn sub(self, rhs: TimeNs) -> TimeNs {
        TimeNs(
            self.0
                .checked_sub(rhs.0)
                .expect("virtual time underflow: durations are never negative"),
        )
    }
}

impl fmt::Display for TimeNs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
