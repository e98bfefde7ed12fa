//! Virtual time kept as integer microseconds.
//!
//! Integer ticks make event ordering exact and reproducible; seconds as
//! `f64` appear only at the API boundary.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

/// A point on the virtual clock (or a duration), in whole microseconds.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    /// Nearest-microsecond conversion; negative inputs are a caller bug.
    pub fn from_secs(secs: f64) -> Self {
        debug_assert!(secs >= 0.0, "negative time: {secs}");
        SimTime((secs * 1e6).round() as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        debug_assert!(self.0 >= rhs.0, "SimTime underflow");
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Debug for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.as_secs())
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.as_secs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_round_trip() {
        let t = SimTime::from_secs(2.048e-3);
        assert_eq!(t.as_micros(), 2048);
        assert!((t.as_secs() - 0.002048).abs() < 1e-12);
    }

    #[test]
    fn ordering_is_integer_exact() {
        let a = SimTime::from_micros(1_000_000);
        let b = SimTime::from_micros(1_000_001);
        assert!(a < b);
        assert_eq!(b - a, SimTime::from_micros(1));
    }
}
