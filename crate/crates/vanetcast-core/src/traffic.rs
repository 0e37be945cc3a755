//! Application traffic: the VBR data source and listener session plan.
//!
//! The source emits variable-size packets back to back; each packet's size
//! is drawn uniformly and the gap to the next packet is the time that
//! packet would occupy at the nominal mean bitrate, scaled by a uniform
//! jitter factor. All gap arithmetic is integer microseconds, so a run is
//! reproducible bit for bit.
//!
//! The session plan pre-computes every listener's join/leave times for the
//! whole run. Each listener gets the same number of sessions, one per
//! window of the run, joining near the window's start and leaving near its
//! end. Listeners alternate between two window layouts offset by half a
//! window, so the group is never close to empty: whenever one cohort is
//! between sessions the other is fully subscribed.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::packet::{GroupId, NodeId, Packet, PacketId, Payload};
use crate::time::SimTime;

#[derive(Debug, Clone)]
pub struct VbrConfig {
    pub enabled: bool,
    /// Mean application bitrate the gaps are derived from.
    pub mean_bitrate_bps: u64,
    /// Nominal frame rate of the modelled stream (informational).
    pub frame_rate_hz: u32,
    pub size_min_bytes: u32,
    pub size_max_bytes: u32,
    /// Gap jitter: each gap is scaled by U[1 - p/100, 1 + p/100].
    pub gap_jitter_pct: u32,
}

impl Default for VbrConfig {
    fn default() -> Self {
        VbrConfig {
            enabled: true,
            mean_bitrate_bps: 64_000,
            frame_rate_hz: 25,
            size_min_bytes: 256,
            size_max_bytes: 768,
            gap_jitter_pct: 20,
        }
    }
}

impl VbrConfig {
    /// Expected inter-packet gap in microseconds at the mean packet size.
    pub fn mean_gap_us(&self) -> u64 {
        let mean_size = (self.size_min_bytes + self.size_max_bytes) as u64 / 2;
        mean_size * 8 * 1_000_000 / self.mean_bitrate_bps
    }
}

/// Stateful packet generator for one source node.
#[derive(Debug, Clone)]
pub struct VbrSource {
    next_seq: u32,
}

impl VbrSource {
    pub fn new() -> VbrSource {
        VbrSource { next_seq: 1 }
    }

    /// Produce the next packet and the gap to the one after it.
    pub fn emit(
        &mut self,
        origin: NodeId,
        group: GroupId,
        now: SimTime,
        cfg: &VbrConfig,
        rng: &mut ChaCha8Rng,
    ) -> (Packet, SimTime) {
        let size = rng.random_range(cfg.size_min_bytes..=cfg.size_max_bytes);
        let seq = self.next_seq;
        self.next_seq += 1;
        let base_us = size as u64 * 8 * 1_000_000 / cfg.mean_bitrate_bps;
        let jitter_lo = 1_000 - 10 * cfg.gap_jitter_pct as u64;
        let jitter_hi = 1_000 + 10 * cfg.gap_jitter_pct as u64;
        let jitter_permille = rng.random_range(jitter_lo..=jitter_hi);
        let gap = SimTime::from_micros(base_us * jitter_permille / 1_000);
        let packet = Packet {
            id: PacketId { origin, seq },
            group,
            size,
            created: now,
            payload: Payload::Data,
        };
        (packet, gap)
    }
}

impl Default for VbrSource {
    fn default() -> Self {
        VbrSource::new()
    }
}

/// One listener session: the node is a group member in `[join, leave]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Session {
    pub node: NodeId,
    pub join: SimTime,
    pub leave: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanError {
    NoListeners,
    /// More listeners requested than nodes available in the pool.
    TooManyListeners { requested: u32, available: usize },
    NoSessions,
    ZeroDuration,
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanError::NoListeners => write!(f, "listener count must be at least 1"),
            PlanError::TooManyListeners {
                requested,
                available,
            } => write!(
                f,
                "listeners exceed nodes: {requested} requested, {available} available"
            ),
            PlanError::NoSessions => write!(f, "session count must be at least 1"),
            PlanError::ZeroDuration => write!(f, "duration must be positive"),
        }
    }
}

/// Hard cap on how far inside a window joins and leaves may land.
const EDGE_BAND_CAP: SimTime = SimTime::from_secs(30);

#[derive(Debug, Clone, Default)]
pub struct SessionPlan {
    /// Sorted by join time, then node id.
    sessions: Vec<Session>,
}

impl SessionPlan {
    /// Draw a full plan: `listeners` nodes sampled from `pool`, each with
    /// `session_count` sessions across `duration`.
    pub fn build(
        listeners: u32,
        session_count: u32,
        duration: SimTime,
        pool: &[NodeId],
        rng: &mut ChaCha8Rng,
    ) -> Result<SessionPlan, PlanError> {
        if listeners == 0 {
            return Err(PlanError::NoListeners);
        }
        if listeners as usize > pool.len() {
            return Err(PlanError::TooManyListeners {
                requested: listeners,
                available: pool.len(),
            });
        }
        if session_count == 0 {
            return Err(PlanError::NoSessions);
        }
        if duration.0 == 0 {
            return Err(PlanError::ZeroDuration);
        }

        // Partial Fisher-Yates over a copy of the pool.
        let mut ids: Vec<NodeId> = pool.to_vec();
        for i in 0..listeners as usize {
            let j = rng.random_range(i..ids.len());
            ids.swap(i, j);
        }
        let mut chosen: Vec<NodeId> = ids[..listeners as usize].to_vec();
        chosen.sort();

        let mut sessions = Vec::with_capacity(chosen.len() * session_count as usize);
        for (idx, node) in chosen.iter().enumerate() {
            let windows = cohort_windows(idx % 2 == 1, session_count, duration);
            for (start, end) in windows {
                let len = end.saturating_sub(start);
                let band = band_for(session_count, duration, len);
                let join = start + SimTime(rng.random_range(0..band.0.max(1)));
                let leave = end - SimTime(rng.random_range(0..band.0.max(1)));
                sessions.push(Session {
                    node: *node,
                    join,
                    leave,
                });
            }
        }
        sessions.sort_by_key(|s| (s.join, s.node));
        Ok(SessionPlan { sessions })
    }

    /// Wrap explicit sessions (tests, hand-written scenarios).
    pub fn from_sessions(mut sessions: Vec<Session>) -> SessionPlan {
        sessions.sort_by_key(|s| (s.join, s.node));
        SessionPlan { sessions }
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn listeners(&self) -> BTreeSet<NodeId> {
        self.sessions.iter().map(|s| s.node).collect()
    }

    /// Number of nodes inside one of their sessions at `t` (inclusive ends).
    pub fn listening_at(&self, t: SimTime) -> usize {
        let mut nodes = BTreeSet::new();
        for s in &self.sessions {
            if s.join <= t && t <= s.leave {
                nodes.insert(s.node);
            }
        }
        nodes.len()
    }

    /// One line per session: `node join leave`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for s in &self.sessions {
            out.push_str(&format!("{} {} {}\n", s.node, s.join, s.leave));
        }
        out
    }

    pub fn parse(input: &str) -> Result<SessionPlan, String> {
        let mut sessions = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let err = |what: &str| format!("session plan line {}: {what}", idx + 1);
            let node = NodeId(
                it.next()
                    .ok_or_else(|| err("missing node"))?
                    .parse()
                    .map_err(|_| err("bad node id"))?,
            );
            let join: SimTime = it
                .next()
                .ok_or_else(|| err("missing join time"))?
                .parse()
                .map_err(|_| err("bad join time"))?;
            let leave: SimTime = it
                .next()
                .ok_or_else(|| err("missing leave time"))?
                .parse()
                .map_err(|_| err("bad leave time"))?;
            if join > leave {
                return Err(err("join after leave"));
            }
            sessions.push(Session { node, join, leave });
        }
        Ok(SessionPlan::from_sessions(sessions))
    }
}

/// Session windows for one listener. The offset cohort shifts interior
/// boundaries back by half a window so the two cohorts never pause at the
/// same moment.
fn cohort_windows(offset: bool, count: u32, duration: SimTime) -> Vec<(SimTime, SimTime)> {
    let w = duration.0 / count as u64;
    let boundary = |k: u64| -> u64 {
        if k == 0 {
            0
        } else if k >= count as u64 {
            duration.0
        } else if offset {
            k * w - w / 2
        } else {
            k * w
        }
    };
    (0..count as u64)
        .map(|k| (SimTime(boundary(k)), SimTime(boundary(k + 1))))
        .collect()
}

fn band_for(count: u32, duration: SimTime, window_len: SimTime) -> SimTime {
    let w = duration.0 / count as u64;
    SimTime((w / 4).min(window_len.0 / 4).min(EDGE_BAND_CAP.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn pool(n: u32) -> Vec<NodeId> {
        (1..=n).map(NodeId).collect()
    }

    #[test]
    fn mean_gap_sits_near_64_ms_over_many_draws() {
        let cfg = VbrConfig::default();
        assert_eq!(cfg.mean_gap_us(), 64_000);
        let mut src = VbrSource::new();
        let mut r = rng();
        let n = 10_000u64;
        let mut total = 0u64;
        for _ in 0..n {
            let (_, gap) = src.emit(NodeId(1), GroupId(1), SimTime(0), &cfg, &mut r);
            total += gap.0;
        }
        let mean = total / n;
        let lo = 64_000 * 95 / 100;
        let hi = 64_000 * 105 / 100;
        assert!(
            (lo..=hi).contains(&mean),
            "mean gap {mean} us outside 5% of 64 ms"
        );
    }

    #[test]
    fn sizes_and_gaps_stay_inside_their_bounds() {
        let cfg = VbrConfig::default();
        let mut src = VbrSource::new();
        let mut r = rng();
        for _ in 0..1_000 {
            let (pkt, gap) = src.emit(NodeId(1), GroupId(1), SimTime(0), &cfg, &mut r);
            assert!((256..=768).contains(&pkt.size));
            // Extremes: 256 B at 0.8x = 25.6 ms, 768 B at 1.2x = 115.2 ms.
            assert!((25_600..=115_200).contains(&gap.0), "gap {} us", gap.0);
        }
    }

    #[test]
    fn packets_are_numbered_from_one() {
        let cfg = VbrConfig::default();
        let mut src = VbrSource::new();
        let mut r = rng();
        let (p1, _) = src.emit(NodeId(4), GroupId(1), SimTime(0), &cfg, &mut r);
        let (p2, _) = src.emit(NodeId(4), GroupId(1), SimTime(1), &cfg, &mut r);
        assert_eq!(alloc::format!("{}", p1.id), "4-1");
        assert_eq!(alloc::format!("{}", p2.id), "4-2");
    }

    #[test]
    fn same_seed_gives_the_same_packet_stream() {
        let cfg = VbrConfig::default();
        let mut a = VbrSource::new();
        let mut b = VbrSource::new();
        let mut ra = rng();
        let mut rb = rng();
        for _ in 0..100 {
            let (pa, ga) = a.emit(NodeId(1), GroupId(1), SimTime(0), &cfg, &mut ra);
            let (pb, gb) = b.emit(NodeId(1), GroupId(1), SimTime(0), &cfg, &mut rb);
            assert_eq!(pa.size, pb.size);
            assert_eq!(ga, gb);
        }
    }

    #[test]
    fn single_listener_single_session_spans_most_of_the_run() {
        let plan = SessionPlan::build(1, 1, SimTime::from_secs(600), &pool(10), &mut rng()).unwrap();
        assert_eq!(plan.sessions().len(), 1);
        let s = plan.sessions()[0];
        assert!(s.join < SimTime::from_secs(30));
        assert!(s.leave > SimTime::from_secs(570));
        assert!(s.leave <= SimTime::from_secs(600));
    }

    #[test]
    fn each_listener_gets_exactly_the_requested_sessions() {
        let plan =
            SessionPlan::build(20, 10, SimTime::from_secs(600), &pool(99), &mut rng()).unwrap();
        let mut counts: BTreeMap<NodeId, usize> = BTreeMap::new();
        for s in plan.sessions() {
            *counts.entry(s.node).or_default() += 1;
        }
        assert_eq!(counts.len(), 20);
        assert!(counts.values().all(|&c| c == 10));
    }

    #[test]
    fn per_node_sessions_are_disjoint_and_ordered() {
        let plan =
            SessionPlan::build(40, 20, SimTime::from_secs(600), &pool(99), &mut rng()).unwrap();
        let mut last: BTreeMap<NodeId, SimTime> = BTreeMap::new();
        for s in plan.sessions() {
            assert!(s.join < s.leave, "empty or inverted session");
            if let Some(prev_leave) = last.get(&s.node) {
                assert!(
                    *prev_leave <= s.join,
                    "overlapping sessions for {}",
                    s.node
                );
            }
            last.insert(s.node, s.leave);
        }
    }

    #[test]
    fn joins_complete_early_and_final_leaves_land_late() {
        let plan =
            SessionPlan::build(50, 5, SimTime::from_secs(600), &pool(99), &mut rng()).unwrap();
        let mut first_join: BTreeMap<NodeId, SimTime> = BTreeMap::new();
        let mut last_leave: BTreeMap<NodeId, SimTime> = BTreeMap::new();
        for s in plan.sessions() {
            let fj = first_join.entry(s.node).or_insert(s.join);
            if s.join < *fj {
                *fj = s.join;
            }
            let ll = last_leave.entry(s.node).or_insert(s.leave);
            if s.leave > *ll {
                *ll = s.leave;
            }
        }
        for (&node, &j) in &first_join {
            assert!(
                j <= SimTime::from_secs(30),
                "node {node} first joins at {j}"
            );
        }
        for (&node, &l) in &last_leave {
            assert!(
                l >= SimTime::from_secs(570),
                "node {node} last leaves at {l}"
            );
        }
    }

    #[test]
    fn concurrent_listeners_never_drop_below_half() {
        for seed in [1u64, 2, 3] {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            for s in [5u32, 10, 20] {
                let plan = SessionPlan::build(50, s, SimTime::from_secs(600), &pool(99), &mut r)
                    .unwrap();
                for t_s in 30..=570 {
                    let count = plan.listening_at(SimTime::from_secs(t_s));
                    assert!(
                        (25..=50).contains(&count),
                        "S={s} t={t_s}s count={count}"
                    );
                }
            }
        }
    }

    #[test]
    fn every_session_covers_at_least_half_its_window() {
        let plan =
            SessionPlan::build(50, 10, SimTime::from_secs(600), &pool(99), &mut rng()).unwrap();
        let mut per_node: BTreeMap<NodeId, u64> = BTreeMap::new();
        for s in plan.sessions() {
            *per_node.entry(s.node).or_default() += s.leave.0 - s.join.0;
        }
        for (&node, &total) in &per_node {
            assert!(
                total >= SimTime::from_secs(300).0,
                "node {node} listens only {total} us"
            );
        }
    }

    #[test]
    fn plan_round_trips_through_text() {
        let plan =
            SessionPlan::build(10, 5, SimTime::from_secs(600), &pool(99), &mut rng()).unwrap();
        let reparsed = SessionPlan::parse(&plan.dump()).unwrap();
        assert_eq!(plan.sessions(), reparsed.sessions());
    }

    #[test]
    fn too_many_listeners_is_rejected() {
        let err = SessionPlan::build(200, 5, SimTime::from_secs(600), &pool(99), &mut rng())
            .unwrap_err();
        assert!(matches!(
            err,
            PlanError::TooManyListeners {
                requested: 200,
                available: 99
            }
        ));
        assert!(alloc::format!("{err}").contains("listeners exceed nodes"));
    }

    #[test]
    fn same_seed_gives_the_same_plan() {
        let a = SessionPlan::build(30, 10, SimTime::from_secs(600), &pool(99), &mut rng()).unwrap();
        let b = SessionPlan::build(30, 10, SimTime::from_secs(600), &pool(99), &mut rng()).unwrap();
        assert_eq!(a.sessions(), b.sessions());
    }
}
