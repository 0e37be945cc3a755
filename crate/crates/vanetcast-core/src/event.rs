//! Event queue for the discrete-event engine.
//!
//! Events are totally ordered by `(fire_at, insertion_seq)`: equal-time
//! events fire in the order they were scheduled, which keeps runs
//! deterministic without any reliance on heap internals.

use alloc::collections::{BTreeSet, BinaryHeap};
use core::cmp::Ordering;
use core::fmt;

use crate::packet::{NodeId, Packet};
use crate::protocol::ProtocolTimer;
use crate::time::SimTime;

/// Everything the engine can be asked to do at a future instant.
#[derive(Debug, Clone)]
pub enum EventKind {
    /// Advance every vehicle by one mobility tick.
    MobilityTick,
    /// The VBR source creates its next packet.
    TrafficEmit,
    SessionJoin { node: NodeId },
    SessionLeave { node: NodeId },
    /// A node puts a packet on the air (after any forwarding jitter).
    Transmit { from: NodeId, packet: Packet },
    /// A transmitted packet reaches one receiver.
    RadioDeliver { from: NodeId, to: NodeId, packet: Packet },
    /// A per-node protocol timer.
    Timer { node: NodeId, timer: ProtocolTimer },
}

/// Handle returned by [`EventQueue::schedule`]; permits cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventHandle(u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleError {
    /// Attempted to schedule before the current clock.
    PastEvent { at: SimTime, clock: SimTime },
}

impl fmt::Display for ScheduleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleError::PastEvent { at, clock } => {
                write!(f, "cannot schedule event at {at} behind clock {clock}")
            }
        }
    }
}

struct Queued {
    at: SimTime,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // Reversed so the std max-heap pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

#[derive(Default)]
pub struct EventQueue {
    heap: BinaryHeap<Queued>,
    next_seq: u64,
    cancelled: BTreeSet<u64>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Schedule `kind` at `at`. `at == clock` is allowed and fires during
    /// the current instant, after already-queued events with the same time.
    pub fn schedule(
        &mut self,
        clock: SimTime,
        at: SimTime,
        kind: EventKind,
    ) -> Result<EventHandle, ScheduleError> {
        if at < clock {
            return Err(ScheduleError::PastEvent { at, clock });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Queued { at, seq, kind });
        Ok(EventHandle(seq))
    }

    /// Cancel a scheduled event. Idempotent; cancelling an event that has
    /// already fired has no effect.
    pub fn cancel(&mut self, handle: EventHandle) {
        self.cancelled.insert(handle.0);
    }

    /// Pop the next live event, skipping cancelled ones.
    pub fn pop(&mut self) -> Option<(SimTime, EventKind)> {
        while let Some(q) = self.heap.pop() {
            if self.cancelled.remove(&q.seq) {
                continue;
            }
            return Some((q.at, q.kind));
        }
        None
    }

    /// Fire time of the next live event, without removing it.
    pub fn next_time(&mut self) -> Option<SimTime> {
        while let Some(q) = self.heap.peek() {
            if self.cancelled.contains(&q.seq) {
                let seq = q.seq;
                self.heap.pop();
                self.cancelled.remove(&seq);
                continue;
            }
            return Some(q.at);
        }
        None
    }

    pub fn is_empty(&self) -> bool {
        self.heap.len() == self.cancelled.len()
    }
}
