//! Tree-based multicast routing.
//!
//! One shared delivery tree per group, rooted at a group leader. Members
//! join by flooding a route request; tree nodes with fresh routes answer
//! with route replies carrying the group sequence number, and the joiner
//! activates the best reply hop by hop, grafting every node on the path
//! onto the tree. The leader floods a periodic group hello that both
//! refreshes the group sequence number and, through per-relay freshness
//! flags, lets every tree node confirm its chain to the leader is intact.
//! A node that stops hearing fresh hellos from its upstream declares the
//! link broken and re-grafts; if that fails, a member becomes the leader
//! of its own partition. When two leaders' hello floods meet, the
//! higher-id leader wins and the other abdicates. Hello relays also
//! advertise the relayer's own hop count, and a tree node that hears a
//! fresh on-tree neighbour offering a strictly shorter chain switches
//! its upstream to it (at most once per hello round), pulling chains
//! stretched by motion and repair back toward shortest paths.
//!
//! Data follows tree edges only: a tree node accepts a data packet from a
//! tree neighbour, delivers it locally if it is a member, and rebroadcasts
//! it once if it has other tree neighbours.

use alloc::vec;
use alloc::vec::Vec;

use alloc::collections::{BTreeMap, BTreeSet};
use rand_chacha::ChaCha8Rng;

use crate::packet::{NodeId, Packet, PacketId, Payload};
use crate::protocol::{data_delay, jitter, DropReason, Output, ProtocolConfig, ProtocolTimer};
use crate::time::SimTime;

pub const SIZE_RREQ: u32 = 24;
pub const SIZE_RREP: u32 = 24;
pub const SIZE_MACT: u32 = 16;
pub const SIZE_GROUP_HELLO: u32 = 24;
pub const SIZE_PRUNE: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MaodvMessage {
    /// Join/repair flood. The packet id is `(requester, rreq_id)`.
    RouteRequest {
        /// Requester's credited sequence; only strictly fresher chains
        /// answer, which keeps a repair from grafting onto the
        /// requester's own stale subtree.
        known_seq: u32,
        hop_count: u32,
        /// Only tree nodes closer to the leader than this may answer;
        /// `u32::MAX` means anyone fresh may.
        hop_bound: u32,
        ttl: u8,
    },
    /// Unicast back along the recorded reverse path.
    RouteReply {
        requester: NodeId,
        rreq_id: u32,
        replier: NodeId,
        /// Replier's credited sequence (see `GroupHello::relayer_seq`).
        group_seq: u32,
        leader: NodeId,
        /// Replier's distance from the leader.
        replier_hop: u32,
        /// Hops travelled from the replier so far.
        path_len: u32,
        next_hop: NodeId,
    },
    /// Branch activation, unicast hop by hop toward the replier.
    Activate {
        requester: NodeId,
        rreq_id: u32,
        next_hop: NodeId,
    },
    /// Leader's periodic flood. Relays rewrite the four relayer fields.
    GroupHello {
        leader: NodeId,
        seq: u32,
        relayer_on_tree: bool,
        relayer_fresh: bool,
        relayer_hop: u32,
        /// The relayer's own credited sequence: the newest round its
        /// chain to the leader has confirmed, as opposed to `seq`,
        /// which merely says which flood round this copy belongs to.
        /// Credited sequences can only shrink moving away from the
        /// leader, which is what makes them safe to order routes by.
        relayer_seq: u32,
        ttl: u8,
    },
    /// Branch removal, unicast to the upstream.
    Prune { next_hop: NodeId },
}

impl MaodvMessage {
    pub fn wire_size(&self) -> u32 {
        match self {
            MaodvMessage::RouteRequest { .. } => SIZE_RREQ,
            MaodvMessage::RouteReply { .. } => SIZE_RREP,
            MaodvMessage::Activate { .. } => SIZE_MACT,
            MaodvMessage::GroupHello { .. } => SIZE_GROUP_HELLO,
            MaodvMessage::Prune { .. } => SIZE_PRUNE,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    group_seq: u32,
    total_hops: u32,
    replier: NodeId,
    leader: NodeId,
    from: NodeId,
}

impl Candidate {
    /// Highest sequence first, then shortest path, then lowest replier id.
    fn better_than(&self, other: &Candidate) -> bool {
        (self.group_seq, other.total_hops, other.replier)
            > (other.group_seq, self.total_hops, self.replier)
    }
}

#[derive(Debug, Clone)]
struct PendingRequest {
    rreq_id: u32,
    attempt: u8,
    repair: bool,
    hop_bound: u32,
    best: Option<Candidate>,
}

/// Best reply forwarded toward a requester, kept so a later activation
/// can graft this node between requester and replier.
#[derive(Debug, Clone, Copy)]
struct ForwardedReply {
    from: NodeId,
    leader: NodeId,
    group_seq: u32,
    total_hops: u32,
    replier: NodeId,
}

#[derive(Debug)]
pub struct MaodvNode {
    id: NodeId,
    member: bool,
    on_tree: bool,
    leading: bool,
    upstream: Option<NodeId>,
    downstream: BTreeSet<NodeId>,
    leader: Option<NodeId>,
    leader_heard: SimTime,
    group_seq: u32,
    hop_to_leader: u32,
    ctl_seq: u32,
    pending: Option<PendingRequest>,
    rejoin_at: Option<SimTime>,
    /// Last time the upstream relayed a hello with its fresh flag set.
    upstream_heard: SimTime,
    upstream_fresh_seq: u32,
    /// Hello round of the last path-shortening switch.
    shorten_seq: u32,
    /// Highest hello sequence seen per leader (flood dedupe).
    hello_seen: BTreeMap<NodeId, u32>,
    rreq_seen: BTreeSet<PacketId>,
    /// Reverse path per request: neighbour the request arrived from first.
    reverse: BTreeMap<PacketId, NodeId>,
    forwarded_reply: BTreeMap<PacketId, ForwardedReply>,
    data_seen: BTreeSet<PacketId>,
}

impl MaodvNode {
    pub fn new(id: NodeId) -> MaodvNode {
        MaodvNode {
            id,
            member: false,
            on_tree: false,
            leading: false,
            upstream: None,
            downstream: BTreeSet::new(),
            leader: None,
            leader_heard: SimTime(0),
            group_seq: 0,
            hop_to_leader: u32::MAX,
            ctl_seq: 0,
            pending: None,
            rejoin_at: None,
            upstream_heard: SimTime(0),
            upstream_fresh_seq: 0,
            shorten_seq: 0,
            hello_seen: BTreeMap::new(),
            rreq_seen: BTreeSet::new(),
            reverse: BTreeMap::new(),
            forwarded_reply: BTreeMap::new(),
            data_seen: BTreeSet::new(),
        }
    }

    pub fn is_member(&self) -> bool {
        self.member
    }

    pub fn is_on_tree(&self) -> bool {
        self.on_tree
    }

    pub fn is_leader(&self) -> bool {
        self.leading
    }

    pub fn upstream(&self) -> Option<NodeId> {
        self.upstream
    }

    pub fn downstream(&self) -> &BTreeSet<NodeId> {
        &self.downstream
    }

    pub fn leader(&self) -> Option<NodeId> {
        self.leader
    }

    pub fn group_seq(&self) -> u32 {
        self.group_seq
    }

    pub fn hop_to_leader(&self) -> u32 {
        self.hop_to_leader
    }

    /// Is this node's chain to the leader recently confirmed?
    fn fresh(&self, now: SimTime, cfg: &ProtocolConfig) -> bool {
        self.leading
            || (self.on_tree
                && now.saturating_sub(self.upstream_heard) <= cfg.link_loss_window())
    }

    /// The sequence this node can vouch for through its own chain. A
    /// leader mints sequences, everyone else only repeats what its
    /// upstream confirmed, so this number never grows moving away from
    /// the leader. Requests and replies quote it instead of the
    /// flood-learned `group_seq`, which any overheard copy inflates: a
    /// node whose chain runs through the requester can then never look
    /// fresher than the requester itself, and repairs cannot loop back
    /// into the requester's own subtree.
    fn route_seq(&self) -> u32 {
        if self.leading {
            self.group_seq
        } else {
            self.upstream_fresh_seq
        }
    }

    fn ctl_packet(&mut self, created: SimTime, cfg: &ProtocolConfig, msg: MaodvMessage) -> Packet {
        self.ctl_seq += 1;
        Packet {
            id: PacketId {
                origin: self.id,
                seq: self.ctl_seq,
            },
            group: cfg.group,
            size: msg.wire_size(),
            created,
            payload: Payload::Maodv(msg),
        }
    }

    fn start_request(
        &mut self,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
        repair: bool,
        hop_bound: u32,
        attempt: u8,
    ) -> Vec<Output> {
        let rreq = self.ctl_packet(
            now,
            cfg,
            MaodvMessage::RouteRequest {
                known_seq: self.route_seq(),
                hop_count: 0,
                hop_bound,
                ttl: cfg.flood_ttl,
            },
        );
        let rreq_id = rreq.id.seq;
        self.rreq_seen.insert(rreq.id);
        self.pending = Some(PendingRequest {
            rreq_id,
            attempt,
            repair,
            hop_bound,
            best: None,
        });
        vec![
            Output::Send {
                packet: rreq,
                delay: jitter(rng, cfg.ctl_jitter),
            },
            Output::SetTimer {
                delay: SimTime(cfg.join_backoff.0 << attempt),
                timer: ProtocolTimer::MaodvJoinWait { rreq_id, attempt },
            },
        ]
    }

    fn hello_flood(
        &mut self,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Output {
        self.hello_seen.insert(self.id, self.group_seq);
        let hello = self.ctl_packet(
            now,
            cfg,
            MaodvMessage::GroupHello {
                leader: self.id,
                seq: self.group_seq,
                relayer_on_tree: true,
                relayer_fresh: true,
                relayer_hop: 0,
                relayer_seq: self.group_seq,
                ttl: cfg.flood_ttl,
            },
        );
        Output::Send {
            packet: hello,
            delay: jitter(rng, cfg.ctl_jitter),
        }
    }

    fn become_leader(
        &mut self,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        self.leading = true;
        self.on_tree = true;
        self.upstream = None;
        self.leader = Some(self.id);
        self.leader_heard = now;
        self.hop_to_leader = 0;
        self.group_seq += 1;
        vec![self.hello_flood(now, cfg, rng)]
    }

    fn teardown(&mut self) {
        self.on_tree = false;
        self.leading = false;
        self.upstream = None;
        self.downstream.clear();
        self.hop_to_leader = u32::MAX;
        self.upstream_heard = SimTime(0);
    }

    fn abdicate(&mut self, now: SimTime, winner: NodeId, cfg: &ProtocolConfig) {
        self.teardown();
        self.pending = None;
        self.leader = Some(winner);
        self.leader_heard = now;
        if self.member {
            self.rejoin_at = Some(now + cfg.rejoin_delay);
        }
    }

    pub fn join(
        &mut self,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        self.member = true;
        if self.on_tree || self.leading || self.pending.is_some() || self.rejoin_at.is_some() {
            // Already served (e.g. a forwarder upgrading to member) or a
            // request/rejoin is in flight.
            return vec![];
        }
        self.start_request(now, cfg, rng, false, u32::MAX, 0)
    }

    pub fn leave(
        &mut self,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        self.member = false;
        self.rejoin_at = None;
        if let Some(p) = &self.pending {
            if !p.repair {
                self.pending = None;
            }
        }
        if self.leading {
            if self.downstream.is_empty() {
                // Last member left and nothing hangs below: dissolve.
                self.teardown();
                self.leader = None;
            }
            // Otherwise keep serving until the downstreams drain.
            return vec![];
        }
        if self.on_tree && self.downstream.is_empty() {
            // Leaf: prune the branch upward.
            let up = self.upstream.expect("non-leader tree node has an upstream");
            self.teardown();
            let prune = self.ctl_packet(now, cfg, MaodvMessage::Prune { next_hop: up });
            return vec![Output::Send {
                packet: prune,
                delay: jitter(rng, cfg.ctl_jitter),
            }];
        }
        // Interior node: stays on the tree as a plain forwarder.
        vec![]
    }

    pub fn originate(
        &mut self,
        packet: &Packet,
        _now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        if !self.on_tree {
            // No tree to send into; the packet is silently lost.
            return vec![];
        }
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
            ProtocolTimer::MaodvTick => self.tick(now, cfg, rng),
            ProtocolTimer::MaodvJoinWait { rreq_id, attempt } => {
                self.join_wait_expired(rreq_id, attempt, now, cfg, rng)
            }
            ProtocolTimer::PumaTick => vec![],
        }
    }

    fn tick(&mut self, now: SimTime, cfg: &ProtocolConfig, rng: &mut ChaCha8Rng) -> Vec<Output> {
        let mut out = vec![Output::SetTimer {
            delay: cfg.hello_interval,
            timer: ProtocolTimer::MaodvTick,
        }];
        if self.leading {
            if !self.member && self.downstream.is_empty() {
                // Serving leader whose subtree drained away.
                self.teardown();
                self.leader = None;
                return out;
            }
            self.group_seq += 1;
            out.push(self.hello_flood(now, cfg, rng));
            return out;
        }
        if let Some(at) = self.rejoin_at {
            if !self.member {
                self.rejoin_at = None;
            } else if now >= at && !self.on_tree && self.pending.is_none() {
                self.rejoin_at = None;
                out.extend(self.start_request(now, cfg, rng, false, u32::MAX, 0));
                return out;
            }
        }
        if self.on_tree
            && self.pending.is_none()
            && now.saturating_sub(self.upstream_heard) > cfg.link_loss_window()
        {
            // Upstream went silent: try to re-graft closer to the leader
            // than we were, keeping the subtree below us intact.
            let bound = self.hop_to_leader;
            out.extend(self.start_request(now, cfg, rng, true, bound, 0));
        }
        out
    }

    fn join_wait_expired(
        &mut self,
        rreq_id: u32,
        attempt: u8,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        let p = match &self.pending {
            Some(p) if p.rreq_id == rreq_id && p.attempt == attempt => p.clone(),
            _ => return vec![],
        };
        if let Some(best) = p.best {
            self.pending = None;
            self.upstream = Some(best.from);
            self.on_tree = true;
            self.leader = Some(best.leader);
            self.leader_heard = now;
            if best.group_seq > self.group_seq {
                self.group_seq = best.group_seq;
            }
            self.hop_to_leader = best.total_hops;
            self.upstream_heard = now;
            self.upstream_fresh_seq = best.group_seq;
            let mact = self.ctl_packet(
                now,
                cfg,
                MaodvMessage::Activate {
                    requester: self.id,
                    rreq_id,
                    next_hop: best.from,
                },
            );
            return vec![Output::Send {
                packet: mact,
                delay: jitter(rng, cfg.ctl_jitter),
            }];
        }
        if attempt < cfg.join_retries {
            let next_attempt = attempt + 1;
            // The first retries keep the repair hop bound; later ones relax
            // it so any fresh tree node may answer.
            let bound = if next_attempt >= 2 { u32::MAX } else { p.hop_bound };
            return self.start_request(now, cfg, rng, p.repair, bound, next_attempt);
        }
        // Give up.
        self.pending = None;
        if self.member {
            return self.become_leader(now, cfg, rng);
        }
        self.teardown();
        vec![]
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
            Payload::Data => self.on_data(from, packet, cfg, rng),
            Payload::Maodv(msg) => match msg.clone() {
                MaodvMessage::RouteRequest {
                    known_seq,
                    hop_count,
                    hop_bound,
                    ttl,
                } => self.on_rreq(from, packet, known_seq, hop_count, hop_bound, ttl, now, cfg, rng),
                MaodvMessage::RouteReply { .. } => self.on_rrep(from, packet, now, cfg, rng),
                MaodvMessage::Activate {
                    requester,
                    rreq_id,
                    next_hop,
                } => self.on_activate(from, requester, rreq_id, next_hop, now, cfg, rng),
                MaodvMessage::GroupHello {
                    leader,
                    seq,
                    relayer_on_tree,
                    relayer_fresh,
                    relayer_hop,
                    relayer_seq,
                    ttl,
                } => self.on_hello(
                    from, packet, leader, seq, relayer_on_tree, relayer_fresh, relayer_hop,
                    relayer_seq, ttl, now, cfg, rng,
                ),
                MaodvMessage::Prune { next_hop } => self.on_prune(from, next_hop, now, cfg, rng),
            },
            Payload::Puma(_) => vec![],
        }
    }

    fn on_data(
        &mut self,
        from: NodeId,
        packet: &Packet,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        if !self.on_tree {
            return vec![];
        }
        let from_tree_neighbour =
            self.upstream == Some(from) || self.downstream.contains(&from);
        if !from_tree_neighbour {
            // Overheard from off the tree; a tree copy may still arrive, so
            // this must not count as seen.
            return vec![];
        }
        if !self.data_seen.insert(packet.id) {
            return vec![];
        }
        let mut out = Vec::new();
        if self.member {
            out.push(Output::Deliver {
                id: packet.id,
                size: packet.size,
                group: packet.group,
            });
        }
        let has_other_branch = self
            .upstream
            .map(|u| u != from)
            .unwrap_or(false)
            || self.downstream.iter().any(|d| *d != from);
        if has_other_branch {
            out.push(Output::Send {
                packet: packet.clone(),
                delay: data_delay(rng, cfg),
            });
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn on_rreq(
        &mut self,
        from: NodeId,
        packet: &Packet,
        known_seq: u32,
        hop_count: u32,
        hop_bound: u32,
        ttl: u8,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        if packet.id.origin == self.id || !self.rreq_seen.insert(packet.id) {
            return vec![];
        }
        self.reverse.insert(packet.id, from);
        let my_hop = if self.leading { 0 } else { self.hop_to_leader };
        // Strictly fresher only. A requester repairs because its chain
        // went quiet, so its credited sequence is several rounds old and
        // every live chain clears the bar; what cannot clear it is the
        // requester's own subtree, whose credited sequences trail the
        // requester's. Answering on equal sequence would let a stale
        // descendant adopt its ancestor and close an upstream loop.
        let can_answer = (self.leading || (self.on_tree && self.fresh(now, cfg)))
            && self.route_seq() > known_seq
            && my_hop < hop_bound;
        if can_answer {
            let leader = self.leader.expect("fresh tree node knows its leader");
            let reply = self.ctl_packet(
                now,
                cfg,
                MaodvMessage::RouteReply {
                    requester: packet.id.origin,
                    rreq_id: packet.id.seq,
                    replier: self.id,
                    group_seq: self.route_seq(),
                    leader,
                    replier_hop: my_hop,
                    path_len: 1,
                    next_hop: from,
                },
            );
            return vec![Output::Send {
                packet: reply,
                delay: jitter(rng, cfg.ctl_jitter),
            }];
        }
        if ttl > 1 {
            let fwd = Packet {
                payload: Payload::Maodv(MaodvMessage::RouteRequest {
                    known_seq,
                    hop_count: hop_count + 1,
                    hop_bound,
                    ttl: ttl - 1,
                }),
                ..packet.clone()
            };
            return vec![Output::Send {
                packet: fwd,
                delay: jitter(rng, cfg.ctl_jitter),
            }];
        }
        vec![]
    }

    fn on_rrep(
        &mut self,
        from: NodeId,
        packet: &Packet,
        _now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        let (requester, rreq_id, replier, group_seq, leader, replier_hop, path_len, next_hop) =
            match &packet.payload {
                Payload::Maodv(MaodvMessage::RouteReply {
                    requester,
                    rreq_id,
                    replier,
                    group_seq,
                    leader,
                    replier_hop,
                    path_len,
                    next_hop,
                }) => (
                    *requester, *rreq_id, *replier, *group_seq, *leader, *replier_hop, *path_len,
                    *next_hop,
                ),
                _ => unreachable!("on_rrep called with a route reply"),
            };
        if next_hop != self.id {
            return vec![];
        }
        let key = PacketId {
            origin: requester,
            seq: rreq_id,
        };
        let total_hops = replier_hop + path_len;
        if requester == self.id {
            let p = match &mut self.pending {
                Some(p) if p.rreq_id == rreq_id => p,
                _ => return vec![],
            };
            if replier_hop >= p.hop_bound {
                return vec![];
            }
            let cand = Candidate {
                group_seq,
                total_hops,
                replier,
                leader,
                from,
            };
            let take = p.best.map_or(true, |b| cand.better_than(&b));
            if take {
                p.best = Some(cand);
            }
            return vec![];
        }
        let back = match self.reverse.get(&key) {
            Some(b) => *b,
            None => return vec![],
        };
        if let Some(prev) = self.forwarded_reply.get(&key) {
            let cand = Candidate {
                group_seq,
                total_hops,
                replier,
                leader,
                from,
            };
            let prev_cand = Candidate {
                group_seq: prev.group_seq,
                total_hops: prev.total_hops,
                replier: prev.replier,
                leader: prev.leader,
                from: prev.from,
            };
            if !cand.better_than(&prev_cand) {
                return vec![];
            }
        }
        self.forwarded_reply.insert(
            key,
            ForwardedReply {
                from,
                leader,
                group_seq,
                total_hops,
                replier,
            },
        );
        let fwd = Packet {
            payload: Payload::Maodv(MaodvMessage::RouteReply {
                requester,
                rreq_id,
                replier,
                group_seq,
                leader,
                replier_hop,
                path_len: path_len + 1,
                next_hop: back,
            }),
            ..packet.clone()
        };
        vec![Output::Send {
            packet: fwd,
            delay: jitter(rng, cfg.ctl_jitter),
        }]
    }

    #[allow(clippy::too_many_arguments)]
    fn on_activate(
        &mut self,
        from: NodeId,
        requester: NodeId,
        rreq_id: u32,
        next_hop: NodeId,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        if next_hop != self.id {
            return vec![];
        }
        self.downstream.insert(from);
        if self.on_tree {
            // Graft point reached; the branch above already exists.
            return vec![];
        }
        let key = PacketId {
            origin: requester,
            seq: rreq_id,
        };
        let fr = match self.forwarded_reply.get(&key) {
            Some(fr) => *fr,
            None => {
                // Never forwarded a reply for this request; cannot graft.
                self.downstream.remove(&from);
                return vec![];
            }
        };
        self.on_tree = true;
        self.upstream = Some(fr.from);
        self.leader = Some(fr.leader);
        self.leader_heard = now;
        if fr.group_seq > self.group_seq {
            self.group_seq = fr.group_seq;
        }
        self.hop_to_leader = fr.total_hops;
        self.upstream_heard = now;
        self.upstream_fresh_seq = fr.group_seq;
        let mact = self.ctl_packet(
            now,
            cfg,
            MaodvMessage::Activate {
                requester,
                rreq_id,
                next_hop: fr.from,
            },
        );
        vec![Output::Send {
            packet: mact,
            delay: jitter(rng, cfg.ctl_jitter),
        }]
    }

    fn on_prune(
        &mut self,
        from: NodeId,
        next_hop: NodeId,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        if next_hop != self.id {
            return vec![];
        }
        self.downstream.remove(&from);
        if !self.member && self.downstream.is_empty() {
            if self.leading {
                // Serving leader lost its last downstream.
                self.teardown();
                self.leader = None;
                return vec![];
            }
            if self.on_tree {
                // Became a useless leaf ourselves: keep pruning upward.
                let up = self.upstream.expect("non-leader tree node has an upstream");
                self.teardown();
                let prune = self.ctl_packet(now, cfg, MaodvMessage::Prune { next_hop: up });
                return vec![Output::Send {
                    packet: prune,
                    delay: jitter(rng, cfg.ctl_jitter),
                }];
            }
        }
        vec![]
    }

    #[allow(clippy::too_many_arguments)]
    fn on_hello(
        &mut self,
        from: NodeId,
        packet: &Packet,
        leader: NodeId,
        seq: u32,
        relayer_on_tree: bool,
        relayer_fresh: bool,
        relayer_hop: u32,
        relayer_seq: u32,
        ttl: u8,
        now: SimTime,
        cfg: &ProtocolConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Output> {
        let mut out = Vec::new();
        // Freshness credit runs before dedupe: the copy relayed by our
        // upstream usually arrives after the flood first reached us. The
        // credit adopts the relayer's own credited sequence, not the
        // flood round, so a node never claims a sequence its chain has
        // not actually confirmed.
        if self.on_tree
            && !self.leading
            && self.upstream == Some(from)
            && relayer_fresh
            && relayer_seq >= self.upstream_fresh_seq
        {
            self.upstream_heard = now;
            self.upstream_fresh_seq = relayer_seq;
            self.hop_to_leader = relayer_hop.saturating_add(1);
            self.leader = Some(leader);
            self.leader_heard = now;
            if seq > self.group_seq {
                self.group_seq = seq;
            }
        }
        // Path shortening, also before dedupe so every relay of a round is
        // considered. Vehicles drift while the tree stands still, so chains
        // stretch with every repair; a fresh on-tree neighbour that leaves
        // us strictly closer to the leader is a better upstream. At most
        // one switch per hello round keeps ragged hop counts from causing
        // thrash. Eligibility demands a credited sequence at least our
        // own with a strictly shorter path: any node below us either
        // trails our credited sequence or, at equal sequence, sits
        // strictly deeper, so a switch can never point back into our own
        // subtree.
        if self.on_tree
            && !self.leading
            && self.pending.is_none()
            && relayer_on_tree
            && relayer_fresh
            && self.leader == Some(leader)
            && relayer_seq >= self.upstream_fresh_seq
            && seq > self.shorten_seq
            && !self.downstream.contains(&from)
            && relayer_hop.saturating_add(2) <= self.hop_to_leader
        {
            let old = self.upstream;
            self.upstream = Some(from);
            self.hop_to_leader = relayer_hop.saturating_add(1);
            self.upstream_heard = now;
            self.upstream_fresh_seq = relayer_seq;
            self.leader_heard = now;
            self.shorten_seq = seq;
            if let Some(up) = old {
                let prune = self.ctl_packet(now, cfg, MaodvMessage::Prune { next_hop: up });
                out.push(Output::Send {
                    packet: prune,
                    delay: jitter(rng, cfg.ctl_jitter),
                });
            }
            // No request backs this activation; the target is already on
            // the tree, so the request id is never looked up.
            let mact = self.ctl_packet(
                now,
                cfg,
                MaodvMessage::Activate {
                    requester: self.id,
                    rreq_id: 0,
                    next_hop: from,
                },
            );
            out.push(Output::Send {
                packet: mact,
                delay: jitter(rng, cfg.ctl_jitter),
            });
        }
        match self.hello_seen.get(&leader) {
            Some(&s) if seq < s => {
                out.push(Output::Drop {
                    id: packet.id,
                    size: packet.size,
                    group: packet.group,
                    reason: DropReason::Stale,
                });
                return out;
            }
            Some(&s) if seq == s => return out,
            _ => {}
        }
        self.hello_seen.insert(leader, seq);
        if seq > self.group_seq {
            self.group_seq = seq;
        }
        if self.leading && leader != self.id {
            if leader > self.id {
                // Two trees met and the other leader outranks us.
                self.abdicate(now, leader, cfg);
            } else {
                // We outrank them; they will fold when our flood arrives.
                return out;
            }
        } else if !self.leading {
            let adopt = match self.leader {
                None => true,
                Some(l) => {
                    l == leader
                        || leader > l
                        || now.saturating_sub(self.leader_heard) > cfg.link_loss_window()
                }
            };
            if adopt {
                self.leader = Some(leader);
                self.leader_heard = now;
            }
        }
        if ttl > 1 {
            let fresh_now = self.fresh(now, cfg);
            let fwd = Packet {
                payload: Payload::Maodv(MaodvMessage::GroupHello {
                    leader,
                    seq,
                    relayer_on_tree: self.on_tree,
                    relayer_fresh: self.on_tree && fresh_now,
                    relayer_hop: if self.leading { 0 } else { self.hop_to_leader },
                    relayer_seq: self.route_seq(),
                    ttl: ttl - 1,
                }),
                ..packet.clone()
            };
            out.push(Output::Send {
                packet: fwd,
                delay: jitter(rng, cfg.ctl_jitter),
            });
        }
        out
    }
}
