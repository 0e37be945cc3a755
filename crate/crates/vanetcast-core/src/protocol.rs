//! Shared protocol plumbing: handler outputs, per-node timers, tuning
//! parameters and the dispatch wrapper over the two implementations.
//!
//! Protocol handlers are pure state machines: they never touch the event
//! queue or the radio directly. Every handler returns a list of [`Output`]s
//! that the engine turns into transmissions, timers and trace records. That
//! keeps the protocols testable in isolation and radio-agnostic.

use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::maodv::MaodvNode;
use crate::packet::{GroupId, NodeId, Packet, PacketId};
use crate::puma::PumaNode;
use crate::time::SimTime;

/// Per-node protocol timers.
///
/// Timers are fire-and-forget: a timer whose purpose has lapsed by the time
/// it fires is ignored by the handler, so nothing ever needs cancelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolTimer {
    /// MAODV: end of the reply-collection window for one request attempt.
    MaodvJoinWait { rreq_id: u32, attempt: u8 },
    /// MAODV: 1 s per-node maintenance tick (hello origination, link checks).
    MaodvTick,
    /// PUMA: 1 s per-node maintenance tick (announcements, core silence).
    PumaTick,
}

/// Reason attached to a `d` trace record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// Control message older than state already held.
    Stale,
}

/// What a protocol handler asks the engine to do.
#[derive(Debug, Clone)]
pub enum Output {
    /// Broadcast `packet` after `delay` (forwarding jitter or backoff).
    Send { packet: Packet, delay: SimTime },
    SetTimer { delay: SimTime, timer: ProtocolTimer },
    /// Application-level delivery at a group member: one `r` trace record.
    Deliver {
        id: PacketId,
        size: u32,
        group: GroupId,
    },
    /// Noteworthy discard: one `d` trace record.
    Drop {
        id: PacketId,
        size: u32,
        group: GroupId,
        reason: DropReason,
    },
}

/// Timing and shape knobs for both protocols.
///
/// The forwarding delays stand in for medium-access and queueing delay:
/// real radios cannot rebroadcast the instant they receive, and without
/// some desynchronisation all relays of a flood would fire in the same
/// microsecond. End-to-end delay is dominated by these values, so the
/// data path uses a mostly deterministic cost (`data_latency`) with a
/// small uniform spread on top; a wide spread would let flood-redundant
/// forwarding race far ahead of single-path forwarding purely through
/// min-of-many-jitters selection.
#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub group: GroupId,
    /// Fixed per-hop processing cost applied to every data transmission.
    pub data_latency: SimTime,
    /// Upper bound of the uniform per-hop forwarding delay for data.
    pub data_jitter: SimTime,
    /// Upper bound of the uniform delay applied to control transmissions.
    pub ctl_jitter: SimTime,
    pub flood_ttl: u8,
    // MAODV
    pub hello_interval: SimTime,
    /// Missed hellos from the upstream before the link counts as broken.
    pub hello_miss_limit: u32,
    /// Route request retries after the initial attempt.
    pub join_retries: u8,
    /// Reply-collection window for the first attempt; doubles per retry.
    pub join_backoff: SimTime,
    /// Wait after leader abdication before rejoining, so the abandoned
    /// subtree's freshness can decay and cannot answer our own request.
    pub rejoin_delay: SimTime,
    // PUMA
    pub announce_interval: SimTime,
    /// Connectivity entries expire after this many announcement periods.
    pub connectivity_expiry_periods: u32,
    /// A receiver assumes the core role after this many silent periods.
    pub core_silence_periods: u32,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            group: GroupId(1),
            data_latency: SimTime::from_micros(6_000),
            data_jitter: SimTime::from_millis(4),
            ctl_jitter: SimTime::from_millis(10),
            flood_ttl: 32,
            hello_interval: SimTime::from_secs(1),
            hello_miss_limit: 3,
            join_retries: 3,
            join_backoff: SimTime::from_millis(100),
            rejoin_delay: SimTime::from_micros(3_500_000),
            announce_interval: SimTime::from_secs(3),
            connectivity_expiry_periods: 3,
            core_silence_periods: 2,
        }
    }
}

impl ProtocolConfig {
    /// Window after which a silent tree upstream counts as lost.
    pub fn link_loss_window(&self) -> SimTime {
        SimTime(self.hello_interval.0 * self.hello_miss_limit as u64)
    }

    /// Age limit for PUMA connectivity entries.
    pub fn connectivity_expiry(&self) -> SimTime {
        SimTime(self.announce_interval.0 * self.connectivity_expiry_periods as u64)
    }

    /// Core silence before a receiver starts its own announcements.
    pub fn core_silence(&self) -> SimTime {
        SimTime(self.announce_interval.0 * self.core_silence_periods as u64)
    }
}

/// Uniform draw in `[0, max]`, used for forwarding jitter.
pub(crate) fn jitter(rng: &mut ChaCha8Rng, max: SimTime) -> SimTime {
    SimTime::from_micros(rng.random_range(0..=max.as_micros()))
}

/// Per-hop delay before a data transmission: fixed cost plus jitter.
pub(crate) fn data_delay(rng: &mut ChaCha8Rng, cfg: &ProtocolConfig) -> SimTime {
    cfg.data_latency + jitter(rng, cfg.data_jitter)
}

/// One node's protocol instance.
pub enum ProtocolAgent {
    Maodv(MaodvNode),
    Puma(PumaNode),
}

impl ProtocolAgent {
    /// Application-level group join (session start).
    pub fn join(
        &mut self,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        match self {
            ProtocolAgent::Maodv(n) => n.join(now, cfg, rng),
            ProtocolAgent::Puma(n) => n.join(now, cfg),
        }
    }

    /// Application-level group leave (session end).
    pub fn leave(
        &mut self,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        match self {
            ProtocolAgent::Maodv(n) => n.leave(now, cfg, rng),
            ProtocolAgent::Puma(n) => n.leave(),
        }
    }

    /// A packet arrived over the radio from neighbour `from`.
    pub fn on_packet(
        &mut self,
        from: NodeId,
        packet: &Packet,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        match self {
            ProtocolAgent::Maodv(n) => n.on_packet(from, packet, now, cfg, rng),
            ProtocolAgent::Puma(n) => n.on_packet(from, packet, now, cfg, rng),
        }
    }

    pub fn on_timer(
        &mut self,
        timer: ProtocolTimer,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        match self {
            ProtocolAgent::Maodv(n) => n.on_timer(timer, now, cfg, rng),
            ProtocolAgent::Puma(n) => n.on_timer(timer, now, cfg, rng),
        }
    }

    /// The local application hands a freshly created data packet down.
    pub fn originate(
        &mut self,
        packet: &Packet,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        match self {
            ProtocolAgent::Maodv(n) => n.originate(packet, now, cfg, rng),
            ProtocolAgent::Puma(n) => n.originate(packet, rng, cfg),
        }
    }

    /// Whether the node currently considers itself a group member.
    pub fn is_member(&self) -> bool {
        match self {
            ProtocolAgent::Maodv(n) => n.is_member(),
            ProtocolAgent::Puma(n) => n.is_receiver(),
        }
    }
}
