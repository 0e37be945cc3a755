//! Deterministic discrete-event simulation of multicast routing in
//! vehicular ad-hoc networks.
//!
//! The crate models a straight-highway vehicle fleet, a unit-disk broadcast
//! radio, a VBR data source, churned listener sessions, and two multicast
//! routing protocols: tree-based MAODV and mesh-based PUMA. Runs are fully
//! reproducible: one master seed derives five named random streams, the
//! clock is integer microseconds, and every container with iteration-order
//! influence on behaviour is ordered.
//!
//! The crate is `no_std` (with `alloc`); file IO, configuration files and
//! the command-line interface live in the companion `vanetcast` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod engine;
pub mod event;
pub mod maodv;
pub mod metrics;
pub mod mobility;
pub mod packet;
pub mod protocol;
pub mod puma;
pub mod radio;
pub mod rng;
pub mod scenario;
pub mod time;
pub mod trace;
pub mod traffic;

pub use engine::Engine;
pub use packet::{GroupId, NodeId, Packet, PacketId};
pub use scenario::{ProtocolKind, ScenarioConfig};
pub use time::SimTime;
