//! Broadcast radio model.
//!
//! Unit-disc coverage: every node within `range_m` of a transmitter hears
//! the frame, nobody further out does. Delivery latency is serialisation
//! time at the nominal link rate plus distance-proportional propagation
//! delay, both rounded to whole microseconds. An optional independent loss
//! probability and an optional receiver-side collision rule can be layered
//! on top by the engine.

use crate::mobility::Position;
use crate::time::SimTime;

#[derive(Debug, Clone)]
pub struct RadioConfig {
    /// Reception radius in metres, inclusive.
    pub range_m: f64,
    /// Link rate used for serialisation delay, bits per second.
    pub bitrate_bps: u64,
    /// Signal propagation speed in metres per microsecond.
    pub propagation_m_per_us: f64,
    /// Independent per-reception loss probability in [0, 1].
    pub loss_probability: f64,
    /// Drop receptions that overlap in time at a receiver.
    pub collisions: bool,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            range_m: 1_000.0,
            bitrate_bps: 11_000_000,
            propagation_m_per_us: 300.0,
            loss_probability: 0.0,
            collisions: false,
        }
    }
}

impl RadioConfig {
    pub fn in_range(&self, a: &Position, b: &Position) -> bool {
        a.distance_to(b) <= self.range_m
    }

    /// Serialisation delay for a `size_bytes` frame, at least 1 us.
    pub fn tx_delay(&self, size_bytes: u32) -> SimTime {
        let bits = size_bytes as f64 * 8.0;
        let us = bits * 1_000_000.0 / self.bitrate_bps as f64;
        SimTime::from_micros(round_us(us).max(1))
    }

    pub fn propagation_delay(&self, distance_m: f64) -> SimTime {
        SimTime::from_micros(round_us(distance_m / self.propagation_m_per_us))
    }

    /// Total air time between start of transmission and reception.
    pub fn delivery_delay(&self, size_bytes: u32, distance_m: f64) -> SimTime {
        self.tx_delay(size_bytes) + self.propagation_delay(distance_m)
    }
}

fn round_us(us: f64) -> u64 {
    libm::round(us) as u64
}
