//! Packet and node identity types shared across the simulator.

use core::fmt;
use core::str::FromStr;

use crate::maodv::MaodvMessage;
use crate::puma::Announcement;
use crate::time::SimTime;

/// Index of a node (vehicle). Node ids are dense: `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Multicast group identifier. The scenarios here use a single group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupId(pub u32);

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Logical packet identity: creator plus per-creator sequence number.
///
/// Forwarded copies keep the creator's id, which is what duplicate
/// suppression and the trace analyzers key on. Rendered as `origin-seq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId {
    pub origin: NodeId,
    pub seq: u32,
}

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.origin, self.seq)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsePacketIdError;

impl fmt::Display for ParsePacketIdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("packet ids look like ORIGIN-SEQ")
    }
}

impl FromStr for PacketId {
    type Err = ParsePacketIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (o, q) = s.split_once('-').ok_or(ParsePacketIdError)?;
        Ok(PacketId {
            origin: NodeId(o.parse().map_err(|_| ParsePacketIdError)?),
            seq: q.parse().map_err(|_| ParsePacketIdError)?,
        })
    }
}

/// What a packet carries.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Application data from the VBR source.
    Data,
    Maodv(MaodvMessage),
    Puma(Announcement),
}

impl Payload {
    pub fn is_data(&self) -> bool {
        matches!(self, Payload::Data)
    }

    pub fn trace_proto(&self) -> crate::trace::TraceProto {
        match self {
            Payload::Data => crate::trace::TraceProto::Data,
            Payload::Maodv(_) => crate::trace::TraceProto::Maodv,
            Payload::Puma(_) => crate::trace::TraceProto::Puma,
        }
    }

    pub fn trace_kind(&self) -> crate::trace::TraceKind {
        use crate::maodv::MaodvMessage as M;
        use crate::trace::TraceKind as K;
        match self {
            Payload::Data => K::Data,
            Payload::Maodv(M::RouteRequest { .. }) => K::Rreq,
            Payload::Maodv(M::RouteReply { .. }) => K::Rrep,
            Payload::Maodv(M::Activate { .. }) => K::Mact,
            Payload::Maodv(M::GroupHello { .. }) => K::GroupHello,
            Payload::Maodv(M::Prune { .. }) => K::Prune,
            Payload::Puma(_) => K::Ann,
        }
    }
}

/// A packet in flight. Broadcast is the only transmission primitive;
/// "unicast" control messages carry their intended next hop in the payload
/// and are ignored by everyone else.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: PacketId,
    pub group: GroupId,
    pub size: u32,
    pub created: SimTime,
    pub payload: Payload,
}
