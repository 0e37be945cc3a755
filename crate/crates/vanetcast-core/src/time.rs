//! Simulation clock.
//!
//! Time is integer microseconds. Keeping the clock integral makes event
//! ordering and trace output independent of floating-point rounding; the
//! six-decimal second rendering used in trace files is exactly microsecond
//! resolution.

use core::fmt;
use core::ops::{Add, AddAssign, Sub};
use core::str::FromStr;

pub const MICROS_PER_SEC: u64 = 1_000_000;

/// A point in simulated time, microseconds since the start of the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * MICROS_PER_SEC)
    }

    /// Convert from seconds, rounding to the nearest microsecond.
    pub fn from_secs_f64(s: f64) -> Self {
        SimTime(libm::round(s * MICROS_PER_SEC as f64) as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SEC as f64
    }

    pub const fn saturating_sub(self, rhs: SimTime) -> SimTime {
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
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    /// Seconds with six decimal places, e.g. `12.345678`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{:06}",
            self.0 / MICROS_PER_SEC,
            self.0 % MICROS_PER_SEC
        )
    }
}

/// Error parsing a `SimTime` from text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseTimeError;

impl fmt::Display for ParseTimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("invalid time literal")
    }
}

impl FromStr for SimTime {
    type Err = ParseTimeError;

    /// Accepts `SECONDS` or `SECONDS.FRAC` with up to six fractional digits.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if whole.is_empty() || frac.len() > 6 {
            return Err(ParseTimeError);
        }
        let secs: u64 = whole.parse().map_err(|_| ParseTimeError)?;
        let mut micros = 0u64;
        if !frac.is_empty() {
            let parsed: u64 = frac.parse().map_err(|_| ParseTimeError)?;
            micros = parsed * 10u64.pow(6 - frac.len() as u32);
        }
        Ok(SimTime(secs * MICROS_PER_SEC + micros))
    }
}
