//! Highway strip mobility.
//!
//! Vehicles drive along a straight multi-lane strip at a constant
//! per-vehicle speed and wrap around at the ends, so the fleet density
//! stays constant for the whole run. Lanes alternate direction in pairs:
//! the two lower lanes head in +x, the two upper lanes in -x.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::packet::NodeId;
use crate::time::SimTime;

const KMH_TO_MS: f64 = 1.0 / 3.6;

#[derive(Debug, Clone)]
pub struct MobilityConfig {
    /// Strip length in metres; positions wrap modulo this.
    pub strip_length_m: f64,
    /// Strip width in metres (bounds only, motion is along x).
    pub strip_width_m: f64,
    /// Fixed lane y offsets; vehicles are assigned round-robin by id.
    pub lane_offsets_m: [f64; 4],
    pub speed_min_kmh: f64,
    pub speed_max_kmh: f64,
    /// Position update step.
    pub tick: SimTime,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig {
            strip_length_m: 10_000.0,
            strip_width_m: 1_000.0,
            lane_offsets_m: [200.0, 400.0, 600.0, 800.0],
            speed_min_kmh: 80.0,
            speed_max_kmh: 110.0,
            tick: SimTime::from_millis(500),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance_to(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        libm::sqrt(dx * dx + dy * dy)
    }
}

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: NodeId,
    pub pos: Position,
    /// Signed velocity along x in m/s; sign encodes lane direction.
    pub velocity_ms: f64,
}

impl Vehicle {
    /// Advance by `dt_s` seconds, wrapping at the strip ends.
    pub fn advance(&mut self, dt_s: f64, strip_length_m: f64) {
        let x = self.pos.x + self.velocity_ms * dt_s;
        let mut wrapped = x % strip_length_m;
        if wrapped < 0.0 {
            wrapped += strip_length_m;
        }
        self.pos.x = wrapped;
    }
}

/// The whole fleet, indexable by node id.
#[derive(Debug, Clone)]
pub struct Fleet {
    vehicles: Vec<Vehicle>,
    strip_length_m: f64,
}

impl Fleet {
    /// Place `n` vehicles evenly along the strip, round-robin across lanes,
    /// with per-vehicle speeds drawn uniformly from the configured range.
    /// Even lanes drive in +x, odd lanes in -x.
    pub fn init(n: u32, cfg: &MobilityConfig, rng: &mut ChaCha8Rng) -> Fleet {
        let mut vehicles = Vec::with_capacity(n as usize);
        for i in 0..n {
            let lane = (i % 4) as usize;
            let x = cfg.strip_length_m * i as f64 / n as f64;
            let speed_kmh = rng.random_range(cfg.speed_min_kmh..=cfg.speed_max_kmh);
            let dir = if lane % 2 == 0 { 1.0 } else { -1.0 };
            vehicles.push(Vehicle {
                id: NodeId(i),
                pos: Position {
                    x,
                    y: cfg.lane_offsets_m[lane],
                },
                velocity_ms: dir * speed_kmh * KMH_TO_MS,
            });
        }
        Fleet {
            vehicles,
            strip_length_m: cfg.strip_length_m,
        }
    }

    /// Build a fleet from explicit vehicles (tests, replayed layouts).
    pub fn from_vehicles(vehicles: Vec<Vehicle>, strip_length_m: f64) -> Fleet {
        Fleet {
            vehicles,
            strip_length_m,
        }
    }

    pub fn advance_all(&mut self, dt_s: f64) {
        for v in &mut self.vehicles {
            v.advance(dt_s, self.strip_length_m);
        }
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    pub fn position(&self, id: NodeId) -> Position {
        self.vehicles[id.index()].pos
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    /// Vehicle closest to `target`; ties resolved toward the lowest id.
    pub fn nearest(&self, target: Position) -> NodeId {
        let mut best = NodeId(0);
        let mut best_d = f64::INFINITY;
        for v in &self.vehicles {
            let d = v.pos.distance_to(&target);
            if d < best_d {
                best_d = d;
                best = v.id;
            }
        }
        best
    }
}
