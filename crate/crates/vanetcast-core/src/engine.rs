//! The discrete-event run loop.
//!
//! The engine owns the clock, the event queue, the fleet, one protocol
//! agent per vehicle and the five named random streams. Protocol handlers
//! return plain [`Output`] lists; the engine is the only place that turns
//! them into queued transmissions, timers and trace records, and the only
//! place that touches the radio. One run is strictly single threaded.
//!
//! Determinism: events are totally ordered by `(time, insertion seq)`,
//! every random draw comes from a labelled stream, and all time arithmetic
//! is integer microseconds, so a `(config, seed)` pair reproduces its
//! trace byte for byte.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::event::{EventHandle, EventKind, EventQueue};
use crate::maodv::MaodvNode;
use crate::mobility::{Fleet, Position, Vehicle};
use crate::packet::{NodeId, Packet, PacketId};
use crate::protocol::{DropReason, Output, ProtocolAgent, ProtocolTimer};
use crate::puma::PumaNode;
use crate::rng::Streams;
use crate::scenario::{ProtocolKind, ScenarioConfig};
use crate::time::SimTime;
use crate::trace::{TraceKind, TraceOp, TraceProto, TraceRecord, TraceSink};
use crate::traffic::{SessionPlan, VbrSource};
use rand::Rng;

/// How often the abort callback is polled, in processed events.
const ABORT_CHECK_EVERY: u64 = 100_000;

#[derive(Debug)]
pub enum BuildError {
    /// One message per rejected configuration field.
    Invalid(Vec<String>),
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::Invalid(errors) => {
                write!(f, "invalid scenario configuration:")?;
                for e in errors {
                    write!(f, "\n  - {e}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineError {
    Aborted { at: SimTime },
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Aborted { at } => write!(f, "run aborted at t={at}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub events_processed: u64,
    pub end: SimTime,
}

/// Ongoing reception at a node, for the optional collision rule: any
/// overlapping second reception destroys both frames.
struct BusyWindow {
    end: SimTime,
    live: Option<EventHandle>,
}

pub struct Engine<S: TraceSink> {
    cfg: ScenarioConfig,
    clock: SimTime,
    queue: EventQueue,
    fleet: Fleet,
    agents: Vec<ProtocolAgent>,
    streams: Streams,
    sink: S,
    source: NodeId,
    vbr: VbrSource,
    plan: SessionPlan,
    events_processed: u64,
    busy: Vec<Option<BusyWindow>>,
    mobility_probe: Option<Box<dyn FnMut(SimTime, &[Vehicle])>>,
}

impl<S: TraceSink> Engine<S> {
    /// Build a full scenario: fleet, session plan and initial events.
    pub fn new(cfg: ScenarioConfig, sink: S) -> Result<Engine<S>, BuildError> {
        cfg.validate().map_err(BuildError::Invalid)?;
        let mut streams = Streams::new(cfg.seed);
        let fleet = Fleet::init(cfg.node_count, &cfg.mobility, &mut streams.mobility);
        let source = source_node(&fleet, &cfg);
        let plan = if cfg.duration.0 == 0 {
            SessionPlan::default()
        } else {
            let pool: Vec<NodeId> = fleet
                .vehicles()
                .iter()
                .map(|v| v.id)
                .filter(|id| *id != source)
                .collect();
            SessionPlan::build(
                cfg.listeners,
                cfg.sessions_per_listener,
                cfg.duration,
                &pool,
                &mut streams.sessions,
            )
            .map_err(|e| BuildError::Invalid(alloc::vec![alloc::format!("{e}")]))?
        };
        Ok(Self::assemble(cfg, fleet, plan, streams, sink))
    }

    /// Build from an explicit fleet and session plan. Intended for tests
    /// and replay tooling; skips the usual configuration validation.
    pub fn with_parts(
        cfg: ScenarioConfig,
        fleet: Fleet,
        plan: SessionPlan,
        sink: S,
    ) -> Engine<S> {
        let streams = Streams::new(cfg.seed);
        Self::assemble(cfg, fleet, plan, streams, sink)
    }

    fn assemble(
        cfg: ScenarioConfig,
        fleet: Fleet,
        plan: SessionPlan,
        streams: Streams,
        sink: S,
    ) -> Engine<S> {
        let source = source_node(&fleet, &cfg);
        let agents = fleet
            .vehicles()
            .iter()
            .map(|v| match cfg.protocol {
                ProtocolKind::Maodv => ProtocolAgent::Maodv(MaodvNode::new(v.id)),
                ProtocolKind::Puma => ProtocolAgent::Puma(PumaNode::new(v.id)),
            })
            .collect();
        let n = fleet.len();
        let mut busy = Vec::with_capacity(n);
        busy.resize_with(n, || None);
        let mut engine = Engine {
            cfg,
            clock: SimTime::ZERO,
            queue: EventQueue::new(),
            fleet,
            agents,
            streams,
            sink,
            source,
            vbr: VbrSource::new(),
            plan,
            events_processed: 0,
            busy,
            mobility_probe: None,
        };
        engine.seed_events();
        engine
    }

    fn seed_events(&mut self) {
        let duration = self.cfg.duration;
        if self.fleet.len() > 0 {
            self.schedule(self.cfg.mobility.tick, EventKind::MobilityTick);
        }
        let first_tick = match self.cfg.protocol {
            ProtocolKind::Maodv => self.cfg.tuning.hello_interval,
            ProtocolKind::Puma => SimTime::from_secs(1),
        };
        let timer = match self.cfg.protocol {
            ProtocolKind::Maodv => ProtocolTimer::MaodvTick,
            ProtocolKind::Puma => ProtocolTimer::PumaTick,
        };
        for v in 0..self.fleet.len() {
            self.queue
                .schedule(
                    SimTime::ZERO,
                    first_tick,
                    EventKind::Timer {
                        node: NodeId(v as u32),
                        timer,
                    },
                )
                .expect("initial timer is in the future");
        }
        let sessions: Vec<_> = self.plan.sessions().to_vec();
        for s in &sessions {
            self.schedule(s.join, EventKind::SessionJoin { node: s.node });
            self.schedule(s.leave, EventKind::SessionLeave { node: s.node });
        }
        if duration.0 > 0 {
            if self.cfg.traffic.enabled {
                self.schedule(SimTime::ZERO, EventKind::TrafficEmit);
            }
            if self.cfg.protocol == ProtocolKind::Maodv {
                // The data source is a member for the whole run so the
                // delivery tree always has a root to grow from.
                let outputs = self.agents[self.source.index()].join(
                    SimTime::ZERO,
                    &self.cfg.tuning,
                    &mut self.streams.protocol,
                );
                self.apply(self.source, outputs);
            }
        }
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind) {
        self.queue
            .schedule(self.clock, at, kind)
            .expect("events are never scheduled in the past");
    }

    /// Observe fleet positions at t=0 and every mobility tick.
    pub fn set_mobility_probe(&mut self, probe: Box<dyn FnMut(SimTime, &[Vehicle])>) {
        self.mobility_probe = Some(probe);
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn plan(&self) -> &SessionPlan {
        &self.plan
    }

    pub fn fleet(&self) -> &Fleet {
        &self.fleet
    }

    pub fn agent(&self, node: NodeId) -> &ProtocolAgent {
        &self.agents[node.index()]
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }

    pub fn into_sink(self) -> S {
        self.sink
    }

    /// Run to completion.
    pub fn run(&mut self) -> RunSummary {
        match self.run_with_abort(&mut || false) {
            Ok(summary) => summary,
            Err(EngineError::Aborted { .. }) => unreachable!("abort callback never fires"),
        }
    }

    /// Run to completion, polling `should_abort` periodically. The callback
    /// is also consulted once up front so an already-spent budget stops the
    /// run before any event is processed.
    pub fn run_with_abort(
        &mut self,
        should_abort: &mut dyn FnMut() -> bool,
    ) -> Result<RunSummary, EngineError> {
        if should_abort() {
            return Err(EngineError::Aborted { at: self.clock });
        }
        if let Some(probe) = &mut self.mobility_probe {
            probe(self.clock, self.fleet.vehicles());
        }
        while let Some(at) = self.queue.next_time() {
            if at > self.cfg.duration {
                break;
            }
            if !self.step() {
                break;
            }
            if self.events_processed % ABORT_CHECK_EVERY == 0 && should_abort() {
                return Err(EngineError::Aborted { at: self.clock });
            }
        }
        self.clock = self.cfg.duration;
        Ok(RunSummary {
            events_processed: self.events_processed,
            end: self.clock,
        })
    }

    /// Advance the clock to `t`, processing everything due on the way.
    pub fn run_until(&mut self, t: SimTime) {
        let limit = t.min(self.cfg.duration);
        while let Some(at) = self.queue.next_time() {
            if at > limit {
                break;
            }
            if !self.step() {
                break;
            }
        }
        if limit > self.clock {
            self.clock = limit;
        }
    }

    /// Process one event. Returns false when nothing due remains.
    pub fn step(&mut self) -> bool {
        let (at, kind) = match self.queue.next_time() {
            Some(at) if at <= self.cfg.duration => self.queue.pop().expect("peeked event exists"),
            _ => return false,
        };
        debug_assert!(at >= self.clock, "clock must not run backwards");
        self.clock = at;
        self.events_processed += 1;
        self.dispatch(kind);
        true
    }

    fn dispatch(&mut self, kind: EventKind) {
        match kind {
            EventKind::MobilityTick => {
                let dt = self.cfg.mobility.tick.as_secs_f64();
                self.fleet.advance_all(dt);
                if let Some(probe) = &mut self.mobility_probe {
                    probe(self.clock, self.fleet.vehicles());
                }
                let next = self.clock + self.cfg.mobility.tick;
                if next <= self.cfg.duration {
                    self.schedule(next, EventKind::MobilityTick);
                }
            }
            EventKind::TrafficEmit => {
                let (packet, gap) = self.vbr.emit(
                    self.source,
                    self.cfg.tuning.group,
                    self.clock,
                    &self.cfg.traffic,
                    &mut self.streams.traffic,
                );
                let outputs = self.agents[self.source.index()].originate(
                    &packet,
                    self.clock,
                    &self.cfg.tuning,
                    &mut self.streams.protocol,
                );
                self.apply(self.source, outputs);
                let next = self.clock + gap;
                if next <= self.cfg.duration {
                    self.schedule(next, EventKind::TrafficEmit);
                }
            }
            EventKind::SessionJoin { node } => {
                self.record_session(node, TraceKind::Join);
                let outputs = self.agents[node.index()].join(
                    self.clock,
                    &self.cfg.tuning,
                    &mut self.streams.protocol,
                );
                self.apply(node, outputs);
            }
            EventKind::SessionLeave { node } => {
                self.record_session(node, TraceKind::Leave);
                let outputs = self.agents[node.index()].leave(
                    self.clock,
                    &self.cfg.tuning,
                    &mut self.streams.protocol,
                );
                self.apply(node, outputs);
            }
            EventKind::Transmit { from, packet } => self.transmit(from, packet),
            EventKind::RadioDeliver { from, to, packet } => {
                if let Some(w) = &mut self.busy[to.index()] {
                    if w.end <= self.clock {
                        self.busy[to.index()] = None;
                    } else {
                        w.live = None;
                    }
                }
                let outputs = self.agents[to.index()].on_packet(
                    from,
                    &packet,
                    self.clock,
                    &self.cfg.tuning,
                    &mut self.streams.protocol,
                );
                self.apply(to, outputs);
            }
            EventKind::Timer { node, timer } => {
                let outputs = self.agents[node.index()].on_timer(
                    timer,
                    self.clock,
                    &self.cfg.tuning,
                    &mut self.streams.protocol,
                );
                self.apply(node, outputs);
            }
        }
    }

    /// Broadcast: trace the send, then schedule delivery at every in-range
    /// neighbour after serialisation plus propagation delay.
    fn transmit(&mut self, from: NodeId, packet: Packet) {
        self.sink.record(&TraceRecord {
            time: self.clock,
            op: TraceOp::Send,
            node: from,
            packet: Some(packet.id),
            proto: packet.payload.trace_proto(),
            kind: packet.payload.trace_kind(),
            size: packet.size,
            group: packet.group,
        });
        let origin = self.fleet.position(from);
        let loss = self.cfg.radio.loss_probability;
        for i in 0..self.fleet.len() {
            let to = NodeId(i as u32);
            if to == from {
                continue;
            }
            let pos = self.fleet.position(to);
            if !self.cfg.radio.in_range(&origin, &pos) {
                continue;
            }
            if loss > 0.0 && self.streams.radio.random::<f64>() < loss {
                continue;
            }
            let deliver_at = self.clock + self.cfg.radio.delivery_delay(packet.size, origin.distance_to(&pos));
            if self.cfg.radio.collisions {
                match &mut self.busy[to.index()] {
                    Some(w) if self.clock < w.end => {
                        // Overlaps an ongoing reception: both frames die.
                        if let Some(h) = w.live.take() {
                            self.queue.cancel(h);
                        }
                        if deliver_at > w.end {
                            w.end = deliver_at;
                        }
                    }
                    slot => {
                        let h = self
                            .queue
                            .schedule(
                                self.clock,
                                deliver_at,
                                EventKind::RadioDeliver {
                                    from,
                                    to,
                                    packet: packet.clone(),
                                },
                            )
                            .expect("delivery is in the future");
                        *slot = Some(BusyWindow {
                            end: deliver_at,
                            live: Some(h),
                        });
                    }
                }
            } else {
                self.schedule(
                    deliver_at,
                    EventKind::RadioDeliver {
                        from,
                        to,
                        packet: packet.clone(),
                    },
                );
            }
        }
    }

    fn apply(&mut self, node: NodeId, outputs: Vec<Output>) {
        for out in outputs {
            match out {
                Output::Send { packet, delay } => {
                    self.schedule(
                        self.clock + delay,
                        EventKind::Transmit { from: node, packet },
                    );
                }
                Output::SetTimer { delay, timer } => {
                    self.schedule(self.clock + delay, EventKind::Timer { node, timer });
                }
                Output::Deliver { id, size, group } => {
                    self.sink.record(&TraceRecord {
                        time: self.clock,
                        op: TraceOp::Recv,
                        node,
                        packet: Some(id),
                        proto: TraceProto::Data,
                        kind: TraceKind::Data,
                        size,
                        group,
                    });
                }
                Output::Drop {
                    id,
                    size,
                    group,
                    reason,
                } => {
                    let proto = match self.cfg.protocol {
                        ProtocolKind::Maodv => TraceProto::Maodv,
                        ProtocolKind::Puma => TraceProto::Puma,
                    };
                    let kind = match reason {
                        DropReason::Stale => TraceKind::Stale,
                    };
                    self.sink.record(&TraceRecord {
                        time: self.clock,
                        op: TraceOp::Drop,
                        node,
                        packet: Some(id),
                        proto,
                        kind,
                        size,
                        group,
                    });
                }
            }
        }
    }

    fn record_session(&mut self, node: NodeId, kind: TraceKind) {
        self.sink.record(&TraceRecord {
            time: self.clock,
            op: TraceOp::Sess,
            node,
            packet: None,
            proto: TraceProto::Sess,
            kind,
            size: 0,
            group: self.cfg.tuning.group,
        });
    }

    /// Emit one data packet from `origin` immediately (test hook).
    pub fn emit_data_now(&mut self, origin: NodeId) -> PacketId {
        let (packet, _) = self.vbr.emit(
            origin,
            self.cfg.tuning.group,
            self.clock,
            &self.cfg.traffic,
            &mut self.streams.traffic,
        );
        let id = packet.id;
        let outputs = self.agents[origin.index()].originate(
            &packet,
            self.clock,
            &self.cfg.tuning,
            &mut self.streams.protocol,
        );
        self.apply(origin, outputs);
        id
    }
}

/// The vehicle nearest the strip centre at t=0; ties go to the lowest id.
fn source_node(fleet: &Fleet, cfg: &ScenarioConfig) -> NodeId {
    if fleet.is_empty() {
        return NodeId(0);
    }
    fleet.nearest(Position {
        x: cfg.mobility.strip_length_m / 2.0,
        y: cfg.mobility.strip_width_m / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::VecSink;
    use crate::traffic::Session;
    use alloc::string::ToString;
    use alloc::vec;

    fn small_cfg(protocol: ProtocolKind) -> ScenarioConfig {
        ScenarioConfig {
            protocol,
            seed: 42,
            node_count: 20,
            duration: SimTime::from_secs(30),
            listeners: 4,
            sessions_per_listener: 1,
            ..ScenarioConfig::default()
        }
    }

    fn trace_text(sink: &VecSink) -> String {
        let mut out = String::new();
        for r in &sink.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }

    #[test]
    fn same_seed_produces_byte_identical_traces() {
        let run = || {
            let mut e = Engine::new(small_cfg(ProtocolKind::Puma), VecSink::new()).unwrap();
            e.run();
            trace_text(e.sink())
        };
        let a = run();
        let b = run();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn protocols_share_the_same_session_timeline() {
        let sess_lines = |p| {
            let mut e = Engine::new(small_cfg(p), VecSink::new()).unwrap();
            e.run();
            e.sink()
                .records
                .iter()
                .filter(|r| r.op == TraceOp::Sess)
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
        };
        let maodv = sess_lines(ProtocolKind::Maodv);
        let puma = sess_lines(ProtocolKind::Puma);
        assert!(!maodv.is_empty());
        assert_eq!(maodv, puma, "session draws must not depend on the protocol");
    }

    #[test]
    fn session_records_appear_at_their_planned_times() {
        let cfg = ScenarioConfig {
            protocol: ProtocolKind::Puma,
            node_count: 3,
            duration: SimTime::from_secs(30),
            traffic: crate::traffic::VbrConfig {
                enabled: false,
                ..Default::default()
            },
            ..ScenarioConfig::default()
        };
        let fleet = Fleet::init(3, &cfg.mobility, &mut Streams::new(1).mobility);
        let plan = SessionPlan::from_sessions(vec![Session {
            node: NodeId(2),
            join: SimTime::from_micros(12_300_000),
            leave: SimTime::from_secs(20),
        }]);
        let mut e = Engine::with_parts(cfg, fleet, plan, VecSink::new());
        e.run();
        let sess: Vec<String> = e
            .sink()
            .records
            .iter()
            .filter(|r| r.op == TraceOp::Sess)
            .map(|r| r.to_string())
            .collect();
        assert_eq!(
            sess,
            vec![
                "12.300000 sess 2 - sess join 0 1".to_string(),
                "20.000000 sess 2 - sess leave 0 1".to_string(),
            ]
        );
    }

    #[test]
    fn zero_duration_yields_an_empty_trace() {
        let cfg = ScenarioConfig {
            duration: SimTime(0),
            ..small_cfg(ProtocolKind::Maodv)
        };
        let mut e = Engine::new(cfg, VecSink::new()).unwrap();
        let summary = e.run();
        assert_eq!(summary.events_processed, 0);
        assert!(e.sink().records.is_empty());
    }

    #[test]
    fn disabled_traffic_leaves_only_control_and_session_records() {
        let mut cfg = small_cfg(ProtocolKind::Maodv);
        cfg.traffic.enabled = false;
        let mut e = Engine::new(cfg, VecSink::new()).unwrap();
        e.run();
        assert!(
            !e.sink().records.is_empty(),
            "maintenance traffic must still flow"
        );
        assert!(
            e.sink()
                .records
                .iter()
                .all(|r| r.proto != TraceProto::Data),
            "no data records without a source"
        );
    }

    #[test]
    fn every_record_lies_within_the_run_window() {
        let mut e = Engine::new(small_cfg(ProtocolKind::Puma), VecSink::new()).unwrap();
        e.run();
        let duration = SimTime::from_secs(30);
        assert!(e
            .sink()
            .records
            .iter()
            .all(|r| r.time <= duration));
    }

    #[test]
    fn aborting_interrupts_a_run() {
        let cfg = ScenarioConfig {
            seed: 7,
            ..small_cfg(ProtocolKind::Puma)
        };
        let mut e = Engine::new(cfg, VecSink::new()).unwrap();
        let mut calls = 0u64;
        let result = e.run_with_abort(&mut || {
            calls += 1;
            true
        });
        // The callback is consulted before the first event, so an
        // always-true predicate stops the run immediately.
        match result {
            Ok(_) => panic!("an always-true abort predicate must stop the run"),
            Err(EngineError::Aborted { at }) => assert_eq!(at, SimTime::ZERO),
        }
        assert_eq!(calls, 1);
        assert_eq!(e.sink().records.len(), 0);
    }

    #[test]
    fn run_until_stops_at_the_requested_instant() {
        let mut e = Engine::new(small_cfg(ProtocolKind::Puma), VecSink::new()).unwrap();
        e.run_until(SimTime::from_secs(5));
        assert_eq!(e.clock(), SimTime::from_secs(5));
        assert!(e
            .sink()
            .records
            .iter()
            .all(|r| r.time <= SimTime::from_secs(5)));
        e.run_until(SimTime::from_secs(10));
        assert_eq!(e.clock(), SimTime::from_secs(10));
    }

    #[test]
    fn mobility_probe_sees_the_initial_layout_and_every_tick() {
        let mut cfg = small_cfg(ProtocolKind::Puma);
        cfg.duration = SimTime::from_secs(2);
        cfg.traffic.enabled = false;
        let mut e = Engine::new(cfg, VecSink::new()).unwrap();
        let seen = alloc::rc::Rc::new(core::cell::RefCell::new(Vec::new()));
        let probe_seen = seen.clone();
        e.set_mobility_probe(Box::new(move |t, vehicles| {
            probe_seen.borrow_mut().push((t, vehicles.len()));
        }));
        e.run();
        let seen = seen.borrow();
        // t=0 plus 4 half-second ticks.
        assert_eq!(seen.len(), 5);
        assert_eq!(seen[0].0, SimTime::ZERO);
        assert!(seen.iter().all(|(_, n)| *n == 20));
    }
}
