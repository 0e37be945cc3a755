//! The four QoS analyzers. All of them are pure functions of a trace:
//! nothing is read from live simulator state, so any tool that can write
//! the trace format can be analysed identically.
//!
//! Definitions:
//! - PDR: distinct per-listener data deliveries divided by the number of
//!   packets each listener was expected to receive (emissions that fall
//!   inside its membership intervals). Deliveries of packets emitted
//!   outside a listener's membership are not counted, which keeps the
//!   ratio in [0, 1] by construction.
//! - Avg EED: summed per-packet delivery delay (last delivery minus the
//!   origin transmission) divided by the number of distinct data packets
//!   sent. Dividing by sent rather than delivered packets deflates the
//!   value under loss; that is deliberate and documented, and a
//!   per-delivered denominator is available via [`MetricsOptions`].
//! - Throughput: aggregate goodput. Bytes of all distinct per-listener
//!   deliveries over the span from first to last data transmission,
//!   scaled by 8/1024 to Kbps.
//! - NRL: control transmissions per distinct data delivery.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::packet::{NodeId, PacketId};
use crate::time::SimTime;
use crate::trace::{TraceOp, TraceProto, TraceRecord};

#[derive(Debug, Clone, Copy, Default)]
pub struct MetricsOptions {
    /// Divide total delay by delivered packets instead of sent packets.
    pub eed_per_received: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub pdr: f64,
    pub avg_eed_s: f64,
    pub throughput_kbps: f64,
    pub nrl: f64,
    /// Distinct data packets with an origin transmission.
    pub data_packets_sent: u64,
    /// Distinct (listener, packet) deliveries.
    pub data_receptions: u64,
    pub control_sends: u64,
    /// Per-listener expected deliveries (the PDR denominator).
    pub expected_receptions: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsError {
    /// No listener was ever expected to receive anything.
    PdrUndefined,
    /// No data packet was sent (or none delivered, for the per-received
    /// variant).
    EedUndefined,
    /// Transmission window is empty or absent.
    ThroughputUndefined,
    /// No data packet was received.
    NrlUndefined,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::PdrUndefined => {
                write!(f, "PDR undefined: no packets were expected by any listener")
            }
            MetricsError::EedUndefined => {
                write!(f, "average delay undefined: no data packets in the denominator")
            }
            MetricsError::ThroughputUndefined => {
                write!(f, "throughput undefined: empty transmission window")
            }
            MetricsError::NrlUndefined => {
                write!(f, "NRL undefined: no data packets were received")
            }
        }
    }
}

/// Everything the four analyzers need, gathered in one pass.
struct Digest {
    /// First data transmission per packet id (the origin send).
    origin_send: BTreeMap<PacketId, SimTime>,
    /// Origin sends ordered by time, for membership matching.
    sends_by_time: Vec<(SimTime, PacketId)>,
    first_data_send: Option<SimTime>,
    last_data_send: Option<SimTime>,
    /// First delivery time per (listener, packet).
    receptions: BTreeMap<(NodeId, PacketId), SimTime>,
    /// Latest delivery per packet, across listeners.
    last_delivery: BTreeMap<PacketId, SimTime>,
    received_bytes: u64,
    control_sends: u64,
    memberships: BTreeMap<NodeId, Vec<(SimTime, SimTime)>>,
}

impl Digest {
    fn new(records: &[TraceRecord]) -> Digest {
        let mut d = Digest {
            origin_send: BTreeMap::new(),
            sends_by_time: Vec::new(),
            first_data_send: None,
            last_data_send: None,
            receptions: BTreeMap::new(),
            last_delivery: BTreeMap::new(),
            received_bytes: 0,
            control_sends: 0,
            memberships: BTreeMap::new(),
        };
        let end = records.iter().map(|r| r.time).max().unwrap_or(SimTime(0));
        let mut open: BTreeMap<NodeId, SimTime> = BTreeMap::new();
        for rec in records {
            match (rec.op, rec.proto) {
                (TraceOp::Send, TraceProto::Data) => {
                    if let Some(id) = rec.packet {
                        if !d.origin_send.contains_key(&id) {
                            d.origin_send.insert(id, rec.time);
                            d.sends_by_time.push((rec.time, id));
                        }
                    }
                    if d.first_data_send.map_or(true, |t| rec.time < t) {
                        d.first_data_send = Some(rec.time);
                    }
                    if d.last_data_send.map_or(true, |t| rec.time > t) {
                        d.last_data_send = Some(rec.time);
                    }
                }
                (TraceOp::Recv, TraceProto::Data) => {
                    if let Some(id) = rec.packet {
                        let key = (rec.node, id);
                        if !d.receptions.contains_key(&key) {
                            d.receptions.insert(key, rec.time);
                            d.received_bytes += rec.size as u64;
                            // Per-packet delay uses each listener's first
                            // copy, then the latest listener overall.
                            let last = d.last_delivery.entry(id).or_insert(rec.time);
                            if rec.time > *last {
                                *last = rec.time;
                            }
                        }
                    }
                }
                (TraceOp::Send, p) if p.is_control() => {
                    d.control_sends += 1;
                }
                (TraceOp::Sess, _) => match rec.kind {
                    crate::trace::TraceKind::Join => {
                        open.entry(rec.node).or_insert(rec.time);
                    }
                    crate::trace::TraceKind::Leave => {
                        if let Some(start) = open.remove(&rec.node) {
                            d.memberships
                                .entry(rec.node)
                                .or_default()
                                .push((start, rec.time));
                        }
                    }
                    _ => {}
                },
                _ => {}
            }
        }
        // A session still open when the trace ends runs to the last record.
        for (node, start) in open {
            d.memberships.entry(node).or_default().push((start, end));
        }
        d.sends_by_time.sort();
        d
    }

    /// Each listener's expected packets: emissions that fall inside one of
    /// its membership intervals (inclusive ends).
    fn expected_pairs(&self) -> BTreeSet<(NodeId, PacketId)> {
        let mut expected = BTreeSet::new();
        for (&node, intervals) in &self.memberships {
            let mut sorted = intervals.clone();
            sorted.sort();
            let mut it = sorted.iter().peekable();
            for &(t, id) in &self.sends_by_time {
                while let Some(&&(_, leave)) = it.peek() {
                    if leave < t {
                        it.next();
                    } else {
                        break;
                    }
                }
                match it.peek() {
                    Some(&&(join, leave)) if join <= t && t <= leave => {
                        expected.insert((node, id));
                    }
                    _ => {}
                }
            }
        }
        expected
    }
}

pub fn compute_pdr(records: &[TraceRecord]) -> Result<f64, MetricsError> {
    let d = Digest::new(records);
    pdr_from(&d).map(|(p, _, _)| p)
}

fn pdr_from(d: &Digest) -> Result<(f64, u64, u64), MetricsError> {
    let expected = d.expected_pairs();
    if expected.is_empty() {
        return Err(MetricsError::PdrUndefined);
    }
    let delivered = expected
        .iter()
        .filter(|pair| d.receptions.contains_key(pair))
        .count();
    Ok((
        delivered as f64 / expected.len() as f64,
        delivered as u64,
        expected.len() as u64,
    ))
}

pub fn compute_avg_eed(
    records: &[TraceRecord],
    opts: MetricsOptions,
) -> Result<f64, MetricsError> {
    let d = Digest::new(records);
    eed_from(&d, opts)
}

fn eed_from(d: &Digest, opts: MetricsOptions) -> Result<f64, MetricsError> {
    let sent = d.origin_send.len();
    if sent == 0 {
        return Err(MetricsError::EedUndefined);
    }
    let mut total_s = 0.0f64;
    for (id, &last) in &d.last_delivery {
        if let Some(&sent_at) = d.origin_send.get(id) {
            total_s += last.saturating_sub(sent_at).as_secs_f64();
        }
    }
    let denom = if opts.eed_per_received {
        d.last_delivery.len()
    } else {
        sent
    };
    if denom == 0 {
        return Err(MetricsError::EedUndefined);
    }
    Ok(total_s / denom as f64)
}

pub fn compute_throughput(records: &[TraceRecord]) -> Result<f64, MetricsError> {
    let d = Digest::new(records);
    throughput_from(&d)
}

fn throughput_from(d: &Digest) -> Result<f64, MetricsError> {
    let (first, last) = match (d.first_data_send, d.last_data_send) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(MetricsError::ThroughputUndefined),
    };
    let window_s = last.saturating_sub(first).as_secs_f64();
    if window_s <= 0.0 {
        return Err(MetricsError::ThroughputUndefined);
    }
    Ok(d.received_bytes as f64 / window_s * 8.0 / 1024.0)
}

pub fn compute_nrl(records: &[TraceRecord]) -> Result<f64, MetricsError> {
    let d = Digest::new(records);
    nrl_from(&d)
}

fn nrl_from(d: &Digest) -> Result<f64, MetricsError> {
    if d.receptions.is_empty() {
        return Err(MetricsError::NrlUndefined);
    }
    Ok(d.control_sends as f64 / d.receptions.len() as f64)
}

/// Run all four analyzers over one digest of the records.
pub fn analyze(
    records: &[TraceRecord],
    opts: MetricsOptions,
) -> Result<MetricsReport, MetricsError> {
    let d = Digest::new(records);
    let (pdr, _, expected) = pdr_from(&d)?;
    let avg_eed_s = eed_from(&d, opts)?;
    let throughput_kbps = throughput_from(&d)?;
    let nrl = nrl_from(&d)?;
    Ok(MetricsReport {
        pdr,
        avg_eed_s,
        throughput_kbps,
        nrl,
        data_packets_sent: d.origin_send.len() as u64,
        data_receptions: d.receptions.len() as u64,
        control_sends: d.control_sends,
        expected_receptions: expected,
    })
}
