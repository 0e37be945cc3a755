//! Simulation trace records.
//!
//! One line per noteworthy act, whitespace-separated:
//!
//! ```text
//! time op node packet proto kind size group
//! 12.345678 s 17 17-3 data data 512 1
//! 12.345901 r 22 17-3 data data 512 1
//! 13.000000 s 4 4-9 maodv rreq 24 1
//! 12.300000 sess 9 - sess join 0 1
//! ```
//!
//! `s` is a transmission, `r` an application-level delivery at a group
//! member, `d` a noteworthy discard and `sess` a listener session edge.
//! Data packets carry an `origin-seq` id; session records have no packet
//! and print `-`. Times are seconds with six decimals. All metrics are
//! computed from these records alone, never from live simulator state.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::packet::{GroupId, NodeId, PacketId};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOp {
    Send,
    Recv,
    Drop,
    Sess,
}

impl TraceOp {
    fn as_str(&self) -> &'static str {
        match self {
            TraceOp::Send => "s",
            TraceOp::Recv => "r",
            TraceOp::Drop => "d",
            TraceOp::Sess => "sess",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceProto {
    Data,
    Maodv,
    Puma,
    Sess,
}

impl TraceProto {
    fn as_str(&self) -> &'static str {
        match self {
            TraceProto::Data => "data",
            TraceProto::Maodv => "maodv",
            TraceProto::Puma => "puma",
            TraceProto::Sess => "sess",
        }
    }

    pub fn is_control(&self) -> bool {
        matches!(self, TraceProto::Maodv | TraceProto::Puma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Data,
    Rreq,
    Rrep,
    Mact,
    GroupHello,
    Prune,
    Ann,
    Join,
    Leave,
    Stale,
}

impl TraceKind {
    fn as_str(&self) -> &'static str {
        match self {
            TraceKind::Data => "data",
            TraceKind::Rreq => "rreq",
            TraceKind::Rrep => "rrep",
            TraceKind::Mact => "mact",
            TraceKind::GroupHello => "ghello",
            TraceKind::Prune => "prune",
            TraceKind::Ann => "ann",
            TraceKind::Join => "join",
            TraceKind::Leave => "leave",
            TraceKind::Stale => "stale",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: SimTime,
    pub op: TraceOp,
    pub node: NodeId,
    /// `None` for session records, printed as `-`.
    pub packet: Option<PacketId>,
    pub proto: TraceProto,
    pub kind: TraceKind,
    pub size: u32,
    pub group: GroupId,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} ", self.time, self.op.as_str(), self.node)?;
        match &self.packet {
            Some(id) => write!(f, "{id}")?,
            None => write!(f, "-")?,
        }
        write!(
            f,
            " {} {} {} {}",
            self.proto.as_str(),
            self.kind.as_str(),
            self.size,
            self.group.0
        )
    }
}

/// Why a trace line or file was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceError {
    /// `line` is 1-based; `what` names the offending field.
    Malformed { line: usize, what: String },
    /// A delivery appeared before any transmission of the same packet.
    Causality { line: usize, packet: PacketId },
}

impl fmt::Display for TraceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceError::Malformed { line, what } => {
                write!(f, "malformed trace line {line}: {what}")
            }
            TraceError::Causality { line, packet } => {
                write!(
                    f,
                    "causality violation at line {line}: {packet} received before it was sent"
                )
            }
        }
    }
}

impl FromStr for TraceRecord {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut it = s.split_whitespace();
        let mut next = |what: &str| it.next().ok_or_else(|| format!("missing {what} field"));
        let time: SimTime = next("time")?
            .parse()
            .map_err(|e| format!("bad time: {e}"))?;
        let op = match next("op")? {
            "s" => TraceOp::Send,
            "r" => TraceOp::Recv,
            "d" => TraceOp::Drop,
            "sess" => TraceOp::Sess,
            other => return Err(format!("unknown op `{other}`")),
        };
        let node = NodeId(
            next("node")?
                .parse()
                .map_err(|_| String::from("bad node id"))?,
        );
        let packet = match next("packet")? {
            "-" => None,
            id => Some(
                id.parse::<PacketId>()
                    .map_err(|e| format!("bad packet id: {e}"))?,
            ),
        };
        let proto = match next("proto")? {
            "data" => TraceProto::Data,
            "maodv" => TraceProto::Maodv,
            "puma" => TraceProto::Puma,
            "sess" => TraceProto::Sess,
            other => return Err(format!("unknown proto `{other}`")),
        };
        let kind = match next("kind")? {
            "data" => TraceKind::Data,
            "rreq" => TraceKind::Rreq,
            "rrep" => TraceKind::Rrep,
            "mact" => TraceKind::Mact,
            "ghello" => TraceKind::GroupHello,
            "prune" => TraceKind::Prune,
            "ann" => TraceKind::Ann,
            "join" => TraceKind::Join,
            "leave" => TraceKind::Leave,
            "stale" => TraceKind::Stale,
            other => return Err(format!("unknown kind `{other}`")),
        };
        let size = next("size")?
            .parse()
            .map_err(|_| String::from("bad size"))?;
        let group = GroupId(
            next("group")?
                .parse()
                .map_err(|_| String::from("bad group id"))?,
        );
        if it.next().is_some() {
            return Err(String::from("trailing fields"));
        }
        Ok(TraceRecord {
            time,
            op,
            node,
            packet,
            proto,
            kind,
            size,
            group,
        })
    }
}

/// Parse a whole trace. Blank lines are allowed; anything else must be a
/// valid record. Data deliveries are checked against an earlier data
/// transmission of the same packet.
pub fn parse_trace(input: &str) -> Result<Vec<TraceRecord>, TraceError> {
    use alloc::collections::BTreeSet;
    let mut records = Vec::new();
    let mut sent: BTreeSet<PacketId> = BTreeSet::new();
    for (idx, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = line.parse().map_err(|what| TraceError::Malformed {
            line: idx + 1,
            what,
        })?;
        if rec.proto == TraceProto::Data {
            match rec.op {
                TraceOp::Send => {
                    if let Some(id) = rec.packet {
                        sent.insert(id);
                    }
                }
                TraceOp::Recv => {
                    if let Some(id) = rec.packet {
                        if !sent.contains(&id) {
                            return Err(TraceError::Causality {
                                line: idx + 1,
                                packet: id,
                            });
                        }
                    }
                }
                _ => {}
            }
        }
        records.push(rec);
    }
    Ok(records)
}

/// Consumer of records as the simulation emits them.
pub trait TraceSink {
    fn record(&mut self, rec: &TraceRecord);
}

/// Keeps everything in memory; the usual sink for tests and analysis.
#[derive(Debug, Default)]
pub struct VecSink {
    pub records: Vec<TraceRecord>,
}

impl VecSink {
    pub fn new() -> VecSink {
        VecSink::default()
    }
}

impl TraceSink for VecSink {
    fn record(&mut self, rec: &TraceRecord) {
        self.records.push(rec.clone());
    }
}

/// Discards everything; for structural tests that inspect node state only.
#[derive(Debug, Default)]
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _rec: &TraceRecord) {}
}

impl<T: TraceSink + ?Sized> TraceSink for &mut T {
    fn record(&mut self, rec: &TraceRecord) {
        (**self).record(rec);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn sample() -> TraceRecord {
        TraceRecord {
            time: SimTime::from_micros(12_345_678),
            op: TraceOp::Send,
            node: NodeId(17),
            packet: Some(PacketId {
                origin: NodeId(17),
                seq: 3,
            }),
            proto: TraceProto::Data,
            kind: TraceKind::Data,
            size: 512,
            group: GroupId(1),
        }
    }

    #[test]
    fn renders_the_documented_shape() {
        assert_eq!(sample().to_string(), "12.345678 s 17 17-3 data data 512 1");
    }

    #[test]
    fn session_records_use_a_dash_for_the_packet() {
        let rec = TraceRecord {
            time: SimTime::from_micros(12_300_000),
            op: TraceOp::Sess,
            node: NodeId(9),
            packet: None,
            proto: TraceProto::Sess,
            kind: TraceKind::Join,
            size: 0,
            group: GroupId(1),
        };
        assert_eq!(rec.to_string(), "12.300000 sess 9 - sess join 0 1");
    }

    #[test]
    fn every_record_round_trips_through_its_text_form() {
        let records = [
            sample(),
            TraceRecord {
                op: TraceOp::Recv,
                node: NodeId(22),
                ..sample()
            },
            TraceRecord {
                op: TraceOp::Drop,
                proto: TraceProto::Maodv,
                kind: TraceKind::Stale,
                size: 20,
                ..sample()
            },
            TraceRecord {
                time: SimTime::from_micros(12_300_000),
                op: TraceOp::Sess,
                node: NodeId(9),
                packet: None,
                proto: TraceProto::Sess,
                kind: TraceKind::Leave,
                size: 0,
                group: GroupId(1),
            },
        ];
        for rec in records {
            let parsed: TraceRecord = rec.to_string().parse().unwrap();
            assert_eq!(parsed, rec);
        }
    }

    #[test]
    fn truncated_line_is_rejected_with_its_line_number() {
        let input = "12.345678 s 17 17-3 data data 512 1\n13.0 s 17";
        match parse_trace(input) {
            Err(TraceError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn recv_before_send_is_a_causality_violation() {
        let input = "1.000000 r 5 2-1 data data 512 1";
        match parse_trace(input) {
            Err(TraceError::Causality { line, packet }) => {
                assert_eq!(line, 1);
                assert_eq!(packet.to_string(), "2-1");
            }
            other => panic!("expected causality error, got {other:?}"),
        }
    }

    #[test]
    fn control_records_are_not_causality_checked() {
        // Hello relays legitimately appear at nodes that never "sent" them.
        let input = "1.000000 s 3 0-1 maodv ghello 20 1";
        assert!(parse_trace(input).is_ok());
    }

    #[test]
    fn blank_lines_are_skipped() {
        let input = "\n12.345678 s 17 17-3 data data 512 1\n\n";
        assert_eq!(parse_trace(input).unwrap().len(), 1);
    }

    #[test]
    fn parses_a_million_records_quickly() {
        use alloc::string::String;
        let mut input = String::new();
        for i in 0..1_000_000u64 {
            let t = SimTime::from_micros(i);
            input.push_str(&format!("{t} s 1 1-{i} data data 512 1\n"));
        }
        let start = std::time::Instant::now();
        let parsed = parse_trace(&input).unwrap();
        let elapsed = start.elapsed();
        assert_eq!(parsed.len(), 1_000_000);
        assert!(
            elapsed < std::time::Duration::from_secs(2),
            "parse took {elapsed:?}"
        );
    }
}
