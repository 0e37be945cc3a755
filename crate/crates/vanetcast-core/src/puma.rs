//! Mesh-based multicast routing.
//!
//! One elected core per group floods a periodic multicast announcement.
//! Every node rebroadcasts each `(core, seq)` round exactly once, stamping
//! its own distance to the core, its chosen parent (the neighbour it
//! first builds toward the core through) and whether it is a mesh member.
//! Each node keeps a connectivity list of its neighbours' latest
//! announcements; entries expire after a few announcement periods.
//!
//! The mesh is defined implicitly: a node is a mesh member if it is a
//! receiver or if some fresh connectivity entry shows a mesh-member
//! neighbour sitting farther from the core, i.e. the node lies on a
//! descent path from a receiver towards the core. Data floods inside the
//! mesh with duplicate suppression; outside it, a node forwards a data
//! packet only when the transmitting neighbour is farther from the core
//! than itself, so packets from an off-mesh source flow down every
//! descending path into the mesh.
//!
//! Core life cycle: the first receiver that hears no announcements for a
//! full period declares itself core with sequence 1. If the core falls
//! silent (it left or the network split), receivers start their own
//! announcements after a staggered silence window; when two cores meet,
//! the higher id wins and the other stops announcing.

use alloc::vec;
use alloc::vec::Vec;

use alloc::collections::{BTreeMap, BTreeSet};
use rand_chacha::ChaCha8Rng;

use crate::packet::{NodeId, Packet, PacketId, Payload};
use crate::protocol::{data_delay, jitter, Output, ProtocolConfig, ProtocolTimer};
use crate::time::SimTime;

pub const SIZE_ANNOUNCEMENT: u32 = 28;

/// Multicast announcement, the only PUMA control message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Announcement {
    pub core: NodeId,
    pub seq: u32,
    /// Sender's distance from the core, in hops.
    pub distance: u32,
    /// Sender's parent toward the core; `None` at the core itself.
    pub parent: Option<NodeId>,
    /// Whether the sender considers itself part of the mesh.
    pub mesh_member: bool,
    pub ttl: u8,
}

/// Latest announcement heard from one neighbour.
#[derive(Debug, Clone, Copy)]
struct NeighbourEntry {
    core: NodeId,
    distance: u32,
    mesh_member: bool,
    heard: SimTime,
}

#[derive(Debug)]
pub struct PumaNode {
    id: NodeId,
    receiver: bool,
    core_self: bool,
    core: Option<NodeId>,
    core_heard: SimTime,
    /// Highest announcement sequence seen per core id.
    highest_seq: BTreeMap<NodeId, u32>,
    my_seq: u32,
    last_announce: SimTime,
    /// Set while a receiver waits to learn of an existing core.
    join_waiting_since: Option<SimTime>,
    connectivity: BTreeMap<NodeId, NeighbourEntry>,
    relayed: BTreeSet<(NodeId, u32)>,
    parent: Option<NodeId>,
    distance: u32,
    data_seen: BTreeSet<PacketId>,
}

impl PumaNode {
    pub fn new(id: NodeId) -> PumaNode {
        PumaNode {
            id,
            receiver: false,
            core_self: false,
            core: None,
            core_heard: SimTime(0),
            highest_seq: BTreeMap::new(),
            my_seq: 0,
            last_announce: SimTime(0),
            join_waiting_since: None,
            connectivity: BTreeMap::new(),
            relayed: BTreeSet::new(),
            parent: None,
            distance: u32::MAX,
            data_seen: BTreeSet::new(),
        }
    }

    pub fn is_receiver(&self) -> bool {
        self.receiver
    }

    pub fn is_core(&self) -> bool {
        self.core_self
    }

    pub fn core(&self) -> Option<NodeId> {
        self.core
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn distance(&self) -> u32 {
        self.distance
    }

    pub fn announcement_seq(&self) -> u32 {
        self.my_seq
    }

    fn entry_fresh(&self, e: &NeighbourEntry, now: SimTime, cfg: &ProtocolConfig) -> bool {
        now.saturating_sub(e.heard) <= cfg.connectivity_expiry()
    }

    fn core_fresh(&self, now: SimTime, cfg: &ProtocolConfig) -> bool {
        self.core.is_some() && now.saturating_sub(self.core_heard) <= cfg.core_silence()
    }

    /// Mesh membership is evaluated live from the connectivity list.
    ///
    /// Receivers and the core are always members. A non-receiver belongs
    /// to the mesh when some fresh mesh-member neighbour sits farther from
    /// the core, i.e. the node lies on a descent path from a receiver
    /// towards the core. Every such neighbour qualifies, which is what
    /// makes the mesh redundant rather than a single-parent tree.
    pub fn is_mesh_member(&self, now: SimTime, cfg: &ProtocolConfig) -> bool {
        if self.receiver || self.core_self {
            return true;
        }
        if self.distance == u32::MAX {
            return false;
        }
        let core = match self.core {
            Some(c) => c,
            None => return false,
        };
        self.connectivity.values().any(|e| {
            e.core == core
                && e.mesh_member
                && e.distance > self.distance
                && self.entry_fresh(e, now, cfg)
        })
    }

    /// Per-node stagger so silent-core takeovers do not all fire at once.
    fn silence_stagger(&self) -> SimTime {
        SimTime::from_millis((self.id.0 as u64 * 37) % 1_500)
    }

    fn announcement_packet(&self, cfg: &ProtocolConfig, created: SimTime, ann: Announcement) -> Packet {
        Packet {
            // All relays of one round share the (core, seq) identity.
            id: PacketId {
                origin: ann.core,
                seq: ann.seq,
            },
            group: cfg.group,
            size: SIZE_ANNOUNCEMENT,
            created,
            payload: Payload::Puma(ann),
        }
    }

    fn originate_announcement(
        &mut self,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Output {
        self.my_seq += 1;
        self.last_announce = now;
        self.highest_seq.insert(self.id, self.my_seq);
        self.relayed.insert((self.id, self.my_seq));
        let pkt = self.announcement_packet(
            cfg,
            now,
            Announcement {
                core: self.id,
                seq: self.my_seq,
                distance: 0,
                parent: None,
                mesh_member: true,
                ttl: cfg.flood_ttl,
            },
        );
        Output::Send {
            packet: pkt,
            delay: jitter(rng, cfg.ctl_jitter),
        }
    }

    fn become_core(
        &mut self,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Output {
        self.core_self = true;
        self.core = Some(self.id);
        self.core_heard = now;
        self.join_waiting_since = None;
        self.parent = None;
        self.distance = 0;
        // Continue above every sequence ever heard so our announcements
        // are not mistaken for replays.
        let max_seen = self.highest_seq.values().copied().max().unwrap_or(0);
        self.my_seq = self.my_seq.max(max_seen);
        self.originate_announcement(now, cfg, rng)
    }

    /// Recompute parent and distance from fresh entries for our core.
    fn refresh_parent(&mut self, now: SimTime, cfg: &ProtocolConfig) {
        if self.core_self {
            self.parent = None;
            self.distance = 0;
            return;
        }
        let core = match self.core {
            Some(c) => c,
            None => {
                self.parent = None;
                self.distance = u32::MAX;
                return;
            }
        };
        let mut best: Option<(u32, NodeId)> = None;
        for (&nb, e) in &self.connectivity {
            if e.core != core || !self.entry_fresh(e, now, cfg) {
                continue;
            }
            let key = (e.distance, nb);
            if best.map_or(true, |b| key < b) {
                best = Some(key);
            }
        }
        match best {
            Some((d, nb)) => {
                self.parent = Some(nb);
                self.distance = d.saturating_add(1);
            }
            None => {
                self.parent = None;
                self.distance = u32::MAX;
            }
        }
    }

    pub fn join(&mut self, now: SimTime, cfg: &ProtocolConfig) -> Vec<Output> {
        self.receiver = true;
        if !self.core_self && !self.core_fresh(now, cfg) {
            // No live core known; the tick decides after one full period.
            self.join_waiting_since = Some(now);
        }
        vec![]
    }

    pub fn leave(&mut self) -> Vec<Output> {
        self.receiver = false;
        self.join_waiting_since = None;
        // A core that stops receiving abdicates silently on its next tick.
        vec![]
    }

    pub fn originate(
        &mut self,
        packet: &Packet,
        rng: &mut ChaCha8Rng,
        cfg: &ProtocolConfig,
    ) -> Vec<Output> {
        self.data_seen.insert(packet.id);
        vec![Output::Send {
            packet: packet.clone(),
            delay: data_delay(rng, cfg),
        }]
    }

    pub fn on_timer(
        &mut self,
        timer: ProtocolTimer,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        match timer {
            ProtocolTimer::PumaTick => self.tick(now, cfg, rng),
            _ => vec![],
        }
    }

    fn tick(&mut self, now: SimTime, cfg: &ProtocolConfig, rng: &mut ChaCha8Rng) -> Vec<Output> {
        let mut out = vec![Output::SetTimer {
            delay: SimTime::from_secs(1),
            timer: ProtocolTimer::PumaTick,
        }];
        if self.core_self {
            if !self.receiver {
                // The core left the group: stop announcing and let the
                // receivers elect a successor via the silence rule.
                self.core_self = false;
                self.core = None;
                return out;
            }
            // A sitting core is always current about itself.
            self.core_heard = now;
            if now.saturating_sub(self.last_announce) >= cfg.announce_interval {
                out.push(self.originate_announcement(now, cfg, rng));
            }
            return out;
        }
        if !self.receiver {
            return out;
        }
        if let Some(since) = self.join_waiting_since {
            if self.core_fresh(now, cfg) {
                self.join_waiting_since = None;
            } else if now.saturating_sub(since) >= cfg.announce_interval {
                // Joined, listened for a full period, heard nothing.
                out.push(self.become_core(now, cfg, rng));
            }
            return out;
        }
        if self.core.is_some() {
            let silence = cfg.core_silence() + self.silence_stagger();
            if now.saturating_sub(self.core_heard) > silence {
                out.push(self.become_core(now, cfg, rng));
            }
        }
        out
    }

    pub fn on_packet(
        &mut self,
        from: NodeId,
        packet: &Packet,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        match &packet.payload {
            Payload::Data => self.on_data(from, packet, now, cfg, rng),
            Payload::Puma(ann) => self.on_announcement(from, ann.clone(), now, cfg, rng),
            Payload::Maodv(_) => vec![],
        }
    }

    fn on_data(
        &mut self,
        from: NodeId,
        packet: &Packet,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        if self.data_seen.contains(&packet.id) {
            return vec![];
        }
        if self.is_mesh_member(now, cfg) {
            self.data_seen.insert(packet.id);
            let mut out = Vec::new();
            if self.receiver {
                out.push(Output::Deliver {
                    id: packet.id,
                    size: packet.size,
                    group: packet.group,
                });
            }
            out.push(Output::Send {
                packet: packet.clone(),
                delay: data_delay(rng, cfg),
            });
            return out;
        }
        // Off-mesh: descent forwarding. Relay a packet whose sender sits
        // farther from the core than we do, so a non-member source's
        // packets flow down every descending path into the mesh instead
        // of relying on one fragile parent pointer per hop. A sender with
        // an unknown distance counts as farther.
        let descending = self.distance != u32::MAX
            && self
                .connectivity
                .get(&from)
                .map(|e| {
                    Some(e.core) == self.core
                        && e.distance > self.distance
                        && self.entry_fresh(e, now, cfg)
                })
                .unwrap_or(false);
        if descending {
            self.data_seen.insert(packet.id);
            return vec![Output::Send {
                packet: packet.clone(),
                delay: data_delay(rng, cfg),
            }];
        }
        vec![]
    }

    fn on_announcement(
        &mut self,
        from: NodeId,
        ann: Announcement,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        if ann.core == self.id {
            // Echo of our own flood.
            return vec![];
        }
        let stale = self
            .highest_seq
            .get(&ann.core)
            .map(|&s| ann.seq < s)
            .unwrap_or(false);
        if stale {
            return vec![];
        }
        self.highest_seq.insert(ann.core, ann.seq);
        self.connectivity.insert(
            from,
            NeighbourEntry {
                core: ann.core,
                distance: ann.distance,
                mesh_member: ann.mesh_member,
                heard: now,
            },
        );
        // Core adoption: same core refreshes, a higher id or a stale
        // belief switches us over, a lower id while ours is live is the
        // losing side of a partition merge and is not relayed. A sitting
        // core is its own freshness, so only a higher id can displace it.
        let adopt = if self.core_self {
            ann.core > self.id
        } else {
            match self.core {
                Some(c) if c == ann.core => true,
                Some(c) => ann.core > c || !self.core_fresh(now, cfg),
                None => true,
            }
        };
        if !adopt {
            return vec![];
        }
        if self.core != Some(ann.core) {
            self.core = Some(ann.core);
            self.join_waiting_since = None;
        }
        self.core_heard = now;
        if self.core_self && ann.core > self.id {
            // Merge lost: the higher-id core rules; we demote to a plain
            // receiver and pick up its mesh.
            self.core_self = false;
        }
        self.refresh_parent(now, cfg);
        if self.relayed.contains(&(ann.core, ann.seq)) || ann.ttl <= 1 {
            return vec![];
        }
        self.relayed.insert((ann.core, ann.seq));
        let fwd = self.announcement_packet(
            cfg,
            now,
            Announcement {
                core: ann.core,
                seq: ann.seq,
                distance: self.distance,
                parent: self.parent,
                mesh_member: self.is_mesh_member(now, cfg),
                ttl: ann.ttl - 1,
            },
        );
        vec![Output::Send {
            packet: fwd,
            delay: jitter(rng, cfg.ctl_jitter),
        }]
    }
}
