//! A deliberately naive metrics reference plus a generator for randomized
//! miniature traces. Shared between test targets via `#[path]` includes so
//! the cross-check logic exists exactly once.
//!
//! The reference shares no code with the library: it rebuilds every
//! quantity with plain nested scans over the records.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use vanetcast_core::metrics::MetricsError;
use vanetcast_core::packet::{GroupId, NodeId, PacketId};
use vanetcast_core::time::SimTime;
use vanetcast_core::trace::{TraceKind, TraceOp, TraceProto, TraceRecord};

pub mod reference {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    fn end_of_trace(records: &[TraceRecord]) -> SimTime {
        records
            .iter()
            .map(|r| r.time)
            .max()
            .unwrap_or(SimTime::ZERO)
    }

    /// Listener membership intervals, in record order, unclosed intervals
    /// running to the end of the trace.
    fn memberships(records: &[TraceRecord]) -> BTreeMap<NodeId, Vec<(SimTime, SimTime)>> {
        let end = end_of_trace(records);
        let mut open: BTreeMap<NodeId, SimTime> = BTreeMap::new();
        let mut closed: BTreeMap<NodeId, Vec<(SimTime, SimTime)>> = BTreeMap::new();
        for r in records {
            if r.op != TraceOp::Sess {
                continue;
            }
            match r.kind {
                TraceKind::Join => {
                    open.insert(r.node, r.time);
                }
                TraceKind::Leave => {
                    if let Some(start) = open.remove(&r.node) {
                        closed.entry(r.node).or_default().push((start, r.time));
                    }
                }
                _ => {}
            }
        }
        for (node, start) in open {
            closed.entry(node).or_default().push((start, end));
        }
        closed
    }

    /// First transmission time of each data packet.
    fn origin_sends(records: &[TraceRecord]) -> BTreeMap<PacketId, SimTime> {
        let mut map = BTreeMap::new();
        for r in records {
            if r.op == TraceOp::Send && r.proto == TraceProto::Data {
                if let Some(id) = r.packet {
                    map.entry(id).or_insert(r.time);
                }
            }
        }
        map
    }

    /// First reception per (listener, packet), with the record's size.
    fn first_receptions(
        records: &[TraceRecord],
    ) -> BTreeMap<(NodeId, PacketId), (SimTime, u32)> {
        let mut map = BTreeMap::new();
        for r in records {
            if r.op == TraceOp::Recv {
                if let Some(id) = r.packet {
                    map.entry((r.node, id)).or_insert((r.time, r.size));
                }
            }
        }
        map
    }

    /// Every (listener, packet) pair whose packet was first sent inside
    /// one of the listener's membership intervals, bounds inclusive.
    fn expected_pairs(records: &[TraceRecord]) -> BTreeSet<(NodeId, PacketId)> {
        let members = memberships(records);
        let sends = origin_sends(records);
        let mut out = BTreeSet::new();
        for (&node, intervals) in &members {
            for (&id, &at) in &sends {
                for &(join, leave) in intervals {
                    if join <= at && at <= leave {
                        out.insert((node, id));
                        break;
                    }
                }
            }
        }
        out
    }

    pub fn pdr(records: &[TraceRecord]) -> Result<f64, MetricsError> {
        let expected = expected_pairs(records);
        if expected.is_empty() {
            return Err(MetricsError::PdrUndefined);
        }
        let got = first_receptions(records);
        let hit = expected.iter().filter(|p| got.contains_key(p)).count();
        Ok(hit as f64 / expected.len() as f64)
    }

    pub fn expected_count(records: &[TraceRecord]) -> u64 {
        expected_pairs(records).len() as u64
    }

    pub fn avg_eed(records: &[TraceRecord], per_received: bool) -> Result<f64, MetricsError> {
        let sends = origin_sends(records);
        if sends.is_empty() {
            return Err(MetricsError::EedUndefined);
        }
        let firsts = first_receptions(records);
        let mut per_packet: BTreeMap<PacketId, SimTime> = BTreeMap::new();
        for (&(_, id), &(at, _)) in &firsts {
            let latest = per_packet.entry(id).or_insert(at);
            if at > *latest {
                *latest = at;
            }
        }
        let mut total = 0.0;
        for (&id, &latest) in &per_packet {
            if let Some(&sent) = sends.get(&id) {
                total += latest.saturating_sub(sent).as_secs_f64();
            }
        }
        let denom = if per_received {
            per_packet.len()
        } else {
            sends.len()
        };
        if denom == 0 {
            return Err(MetricsError::EedUndefined);
        }
        Ok(total / denom as f64)
    }

    pub fn throughput(records: &[TraceRecord]) -> Result<f64, MetricsError> {
        let mut first: Option<SimTime> = None;
        let mut last: Option<SimTime> = None;
        for r in records {
            if r.op == TraceOp::Send && r.proto == TraceProto::Data {
                if first.map_or(true, |f| r.time < f) {
                    first = Some(r.time);
                }
                if last.map_or(true, |l| r.time > l) {
                    last = Some(r.time);
                }
            }
        }
        let (first, last) = match (first, last) {
            (Some(f), Some(l)) if l > f => (f, l),
            _ => return Err(MetricsError::ThroughputUndefined),
        };
        let bytes: u64 = first_receptions(records)
            .values()
            .map(|&(_, size)| size as u64)
            .sum();
        let window = last.saturating_sub(first).as_secs_f64();
        Ok(bytes as f64 / window * 8.0 / 1024.0)
    }

    pub fn nrl(records: &[TraceRecord]) -> Result<f64, MetricsError> {
        let receptions = first_receptions(records).len();
        if receptions == 0 {
            return Err(MetricsError::NrlUndefined);
        }
        let control = records
            .iter()
            .filter(|r| r.op == TraceOp::Send && r.proto.is_control())
            .count();
        Ok(control as f64 / receptions as f64)
    }

    pub fn counts(records: &[TraceRecord]) -> (u64, u64, u64) {
        let sent = origin_sends(records).len() as u64;
        let received = first_receptions(records).len() as u64;
        let control = records
            .iter()
            .filter(|r| r.op == TraceOp::Send && r.proto.is_control())
            .count() as u64;
        (sent, received, control)
    }
}

pub const GROUP: GroupId = GroupId(1);

fn sess(t: SimTime, node: NodeId, kind: TraceKind) -> TraceRecord {
    TraceRecord {
        time: t,
        op: TraceOp::Sess,
        node,
        packet: None,
        proto: TraceProto::Sess,
        kind,
        size: 0,
        group: GROUP,
    }
}

/// A random but structurally valid miniature trace: ordered session
/// intervals, data sends before any matching reception, duplicate relays
/// and deliveries, receptions outside membership, control chatter, drops.
pub fn generate(rng: &mut ChaCha8Rng) -> Vec<TraceRecord> {
    let duration = rng.random_range(1_000_000u64..=60_000_000);
    let n_nodes = rng.random_range(2u32..=8);
    let mut records = Vec::new();

    for node in 1..n_nodes {
        if rng.random_bool(0.3) {
            continue; // not a listener at all
        }
        let mut t = rng.random_range(0..duration / 2);
        for _ in 0..rng.random_range(1u32..=3) {
            let join = t;
            if join >= duration {
                break;
            }
            let leave = (join + rng.random_range(1..=duration / 2)).min(duration);
            records.push(sess(SimTime(join), NodeId(node), TraceKind::Join));
            if rng.random_bool(0.85) {
                records.push(sess(SimTime(leave), NodeId(node), TraceKind::Leave));
                t = leave + rng.random_range(1..=duration / 4);
            } else {
                break; // leave the last interval unclosed
            }
        }
    }

    let n_packets = rng.random_range(0u32..=25);
    let mut send_times = Vec::new();
    for seq in 1..=n_packets {
        let id = PacketId {
            origin: NodeId(0),
            seq,
        };
        let at = rng.random_range(0..duration);
        let size = rng.random_range(64u32..=1024);
        records.push(TraceRecord {
            time: SimTime(at),
            op: TraceOp::Send,
            node: NodeId(0),
            packet: Some(id),
            proto: TraceProto::Data,
            kind: TraceKind::Data,
            size,
            group: GROUP,
        });
        // Relay rebroadcasts reuse the id at a later time.
        for _ in 0..rng.random_range(0u32..=2) {
            records.push(TraceRecord {
                time: SimTime(at + rng.random_range(1..=400_000)),
                op: TraceOp::Send,
                node: NodeId(rng.random_range(1..n_nodes)),
                packet: Some(id),
                proto: TraceProto::Data,
                kind: TraceKind::Data,
                size,
                group: GROUP,
            });
        }
        send_times.push((id, at, size));
    }

    for &(id, at, size) in &send_times {
        for node in 0..n_nodes {
            if !rng.random_bool(0.35) {
                continue;
            }
            let rx = at + rng.random_range(1..=500_000);
            records.push(TraceRecord {
                time: SimTime(rx),
                op: TraceOp::Recv,
                node: NodeId(node),
                packet: Some(id),
                proto: TraceProto::Data,
                kind: TraceKind::Data,
                size,
                group: GROUP,
            });
            if rng.random_bool(0.3) {
                // A duplicate delivery of the same copy, later.
                records.push(TraceRecord {
                    time: SimTime(rx + rng.random_range(1..=100_000)),
                    op: TraceOp::Recv,
                    node: NodeId(node),
                    packet: Some(id),
                    proto: TraceProto::Data,
                    kind: TraceKind::Data,
                    size,
                    group: GROUP,
                });
            }
        }
    }

    let control_kinds = [
        (TraceProto::Maodv, TraceKind::Rreq, 24),
        (TraceProto::Maodv, TraceKind::Rrep, 24),
        (TraceProto::Maodv, TraceKind::Mact, 16),
        (TraceProto::Maodv, TraceKind::GroupHello, 24),
        (TraceProto::Maodv, TraceKind::Prune, 16),
        (TraceProto::Puma, TraceKind::Ann, 28),
    ];
    for i in 0..rng.random_range(0u32..=60) {
        let (proto, kind, size) = control_kinds[rng.random_range(0..control_kinds.len())];
        let node = NodeId(rng.random_range(0..n_nodes));
        let op = if rng.random_bool(0.9) {
            TraceOp::Send
        } else {
            TraceOp::Drop
        };
        records.push(TraceRecord {
            time: SimTime(rng.random_range(0..=duration)),
            op,
            node,
            packet: Some(PacketId {
                origin: node,
                seq: 10_000 + i,
            }),
            proto,
            kind: if op == TraceOp::Drop {
                TraceKind::Stale
            } else {
                kind
            },
            size,
            group: GROUP,
        });
    }

    records.sort_by_key(|r| r.time);
    records
}

/// Assert that library and reference agree: values to within 1e-9, or the
/// same error variant when undefined.
pub fn assert_same(
    seed: u64,
    what: &str,
    mine: Result<f64, MetricsError>,
    reference: Result<f64, MetricsError>,
) {
    match (&mine, &reference) {
        (Ok(a), Ok(b)) => {
            let tol = 1e-9 * b.abs().max(1.0);
            assert!(
                (a - b).abs() <= tol,
                "seed {seed}: {what} diverged: {a} vs reference {b}"
            );
        }
        (Err(a), Err(b)) => {
            assert_eq!(a, b, "seed {seed}: {what} disagreed on the error");
        }
        _ => panic!("seed {seed}: {what} definedness split: {mine:?} vs {reference:?}"),
    }
}
