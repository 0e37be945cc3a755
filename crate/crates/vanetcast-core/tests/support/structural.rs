//! Structural invariant checks over randomized small topologies, shared
//! between test targets via `#[path]` includes.
//!
//! Three families of claims that must hold regardless of geometry or
//! churn: the MAODV upstream graph never contains a cycle (checked after
//! every single engine event), PUMA receivers sharing a network component
//! converge on exactly one core whose announcements nobody else ever
//! originates, and no node records the same data packet twice however
//! redundant the delivery paths are.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use std::collections::BTreeMap;

use vanetcast_core::engine::Engine;
use vanetcast_core::mobility::{Fleet, Position, Vehicle};
use vanetcast_core::packet::{NodeId, PacketId};
use vanetcast_core::protocol::ProtocolAgent;
use vanetcast_core::scenario::{ProtocolKind, ScenarioConfig};
use vanetcast_core::time::SimTime;
use vanetcast_core::trace::{TraceOp, TraceProto, TraceRecord, VecSink};
use vanetcast_core::traffic::{Session, SessionPlan};

const STRIP: f64 = 10_000.0;
const NODES: usize = 10;

fn cfg(protocol: ProtocolKind, duration_s: u64, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        protocol,
        seed,
        duration: SimTime::from_secs(duration_s),
        ..ScenarioConfig::default()
    };
    cfg.traffic.enabled = false;
    cfg
}

fn maodv(agent: &ProtocolAgent) -> &vanetcast_core::maodv::MaodvNode {
    match agent {
        ProtocolAgent::Maodv(n) => n,
        ProtocolAgent::Puma(_) => panic!("expected a MAODV agent"),
    }
}

fn puma(agent: &ProtocolAgent) -> &vanetcast_core::puma::PumaNode {
    match agent {
        ProtocolAgent::Puma(n) => n,
        ProtocolAgent::Maodv(_) => panic!("expected a PUMA agent"),
    }
}

fn fleet_from(positions: &[(f64, f64)]) -> Fleet {
    let vehicles = positions
        .iter()
        .enumerate()
        .map(|(i, &(x, v))| Vehicle {
            id: NodeId(i as u32),
            pos: Position { x, y: 500.0 },
            velocity_ms: v,
        })
        .collect();
    Fleet::from_vehicles(vehicles, STRIP)
}

/// Ten stationary nodes scattered over a random span of the strip.
fn random_static_fleet(rng: &mut ChaCha8Rng) -> Fleet {
    let positions: Vec<(f64, f64)> = (0..NODES)
        .map(|_| (rng.random_range(2_500.0..7_500.0), 0.0))
        .collect();
    fleet_from(&positions)
}

/// One to three disjoint sessions per node, all inside the run and with
/// no joins so late that the protocol has no time left to converge.
fn random_churn(rng: &mut ChaCha8Rng, duration_s: u64) -> SessionPlan {
    let last_join = duration_s - 14;
    let mut sessions = Vec::new();
    for node in 1..NODES as u32 {
        let count = rng.random_range(1..=3);
        let mut cursor = rng.random_range(1..=5) as f64;
        for _ in 0..count {
            let join = cursor + rng.random_range(0.0..6.0);
            let leave = join + rng.random_range(2.0..15.0);
            if join >= last_join as f64 {
                break;
            }
            sessions.push(Session {
                node: NodeId(node),
                join: SimTime::from_secs_f64(join),
                leave: SimTime::from_secs_f64(leave.min((duration_s - 2) as f64)),
            });
            cursor = leave + rng.random_range(1.0..5.0);
        }
    }
    SessionPlan::from_sessions(sessions)
}

/// Connected components of the current unit-disk graph.
fn components(e: &Engine<VecSink>, range_m: f64) -> Vec<usize> {
    let vehicles = e.fleet().vehicles();
    let n = vehicles.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = next;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if label[j] != usize::MAX {
                    continue;
                }
                let dx = (vehicles[i].pos.x - vehicles[j].pos.x).abs();
                let dx = dx.min(STRIP - dx);
                let dy = vehicles[i].pos.y - vehicles[j].pos.y;
                if (dx * dx + dy * dy).sqrt() <= range_m {
                    label[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    label
}

/// Every upstream walk terminates without revisiting a node, leaders sit
/// at roots, and tree membership implies a consistent upstream pointer.
fn assert_forest(e: &Engine<VecSink>, seed: u64) {
    let n = e.fleet().len();
    for i in 0..n {
        let a = maodv(e.agent(NodeId(i as u32)));
        if a.is_leader() {
            assert!(
                a.upstream().is_none(),
                "graph {seed}: leader {i} has an upstream at {}",
                e.clock()
            );
            assert!(a.is_on_tree(), "graph {seed}: leader {i} off the tree");
        } else if a.is_on_tree() {
            assert!(
                a.upstream().is_some(),
                "graph {seed}: tree node {i} lacks an upstream at {}",
                e.clock()
            );
        }
        if !a.is_on_tree() {
            continue;
        }
        let mut visited = vec![false; n];
        let mut cur = NodeId(i as u32);
        loop {
            assert!(
                !visited[cur.index()],
                "graph {seed}: upstream cycle through node {} at {}",
                cur.index(),
                e.clock()
            );
            visited[cur.index()] = true;
            match maodv(e.agent(cur)).upstream() {
                Some(up) => cur = up,
                None => break,
            }
        }
    }
}

/// Run `graphs` randomized MAODV scenarios and check the upstream forest
/// after every single event.
pub fn check_maodv_forest_per_event(graphs: u64) {
    for graph in 0..graphs {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA0_0000 + graph);
        let fleet = random_static_fleet(&mut rng);
        let plan = random_churn(&mut rng, 60);
        let mut e = Engine::with_parts(
            cfg(ProtocolKind::Maodv, 60, 1_000 + graph),
            fleet,
            plan,
            VecSink::new(),
        );
        let mut events = 0u64;
        while e.step() {
            events += 1;
            assert_forest(&e, graph);
        }
        assert!(events > 500, "graph {graph} processed only {events} events");
    }
}

/// Within each connected component, live receivers agree on exactly one
/// core, and that core is one of them.
fn assert_single_core_per_component(e: &Engine<VecSink>, range_m: f64, tag: &str) {
    let labels = components(e, range_m);
    let mut receivers: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    let mut cores: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    for i in 0..e.fleet().len() {
        let a = puma(e.agent(NodeId(i as u32)));
        if a.is_receiver() {
            receivers.entry(labels[i]).or_default().push(i as u32);
        }
        if a.is_core() {
            cores.entry(labels[i]).or_default().push(i as u32);
        }
        assert!(
            !a.is_core() || a.is_receiver(),
            "{tag}: node {i} is a core without being a receiver"
        );
    }
    for (comp, members) in &receivers {
        let elected = cores.get(comp).cloned().unwrap_or_default();
        assert_eq!(
            elected.len(),
            1,
            "{tag}: component {comp} with receivers {members:?} has cores {elected:?}"
        );
        let core = NodeId(elected[0]);
        for &m in members {
            assert_eq!(
                puma(e.agent(NodeId(m))).core(),
                Some(core),
                "{tag}: receiver {m} disagrees about the core"
            );
        }
    }
    for (comp, elected) in &cores {
        assert!(
            receivers.contains_key(comp),
            "{tag}: component {comp} has cores {elected:?} but no receivers"
        );
    }
}

/// The first transmission of every announcement round comes from the
/// core that owns the sequence number.
fn assert_core_only_origination(records: &[TraceRecord], tag: &str) {
    let mut first: BTreeMap<PacketId, &TraceRecord> = BTreeMap::new();
    for r in records {
        if r.op != TraceOp::Send || r.proto != TraceProto::Puma {
            continue;
        }
        let id = r.packet.expect("control sends carry a packet id");
        first
            .entry(id)
            .and_modify(|cur| {
                if r.time < cur.time {
                    *cur = r;
                }
            })
            .or_insert(r);
    }
    assert!(!first.is_empty(), "{tag}: no announcements were sent at all");
    for (id, rec) in first {
        assert_eq!(
            rec.node, id.origin,
            "{tag}: round {id:?} first sent by node {:?} at {}",
            rec.node, rec.time
        );
    }
}

/// Two initially partitioned clusters elect independent cores, then merge
/// mid-run and settle on a single one.
pub fn check_puma_partition_merge(scripts: u64) {
    for script in 0..scripts {
        let mut rng = ChaCha8Rng::seed_from_u64(0xB0_0000 + script);
        // Two clusters, initially far out of range; the left one drifts
        // right and bridges the gap mid-run.
        let speed = rng.random_range(28.0..34.0);
        let left_base = rng.random_range(2_000.0..2_400.0);
        let right_base = rng.random_range(6_300.0..6_700.0);
        let mut positions = Vec::new();
        for i in 0..5 {
            positions.push((left_base + i as f64 * rng.random_range(180.0..300.0), speed));
        }
        for i in 0..5 {
            positions.push((right_base + i as f64 * rng.random_range(180.0..300.0), 0.0));
        }
        let mut sessions = Vec::new();
        for cluster in [0u32, 5u32] {
            let count = rng.random_range(2..=4);
            for k in 0..count {
                sessions.push(Session {
                    node: NodeId(cluster + k),
                    join: SimTime::from_secs_f64(rng.random_range(2.0..8.0)),
                    leave: SimTime::from_secs(118),
                });
            }
        }
        let mut config = cfg(ProtocolKind::Puma, 120, 2_000 + script);
        // A lossless radio keeps elections deterministic; the point here
        // is structure, not robustness to noise.
        config.radio.loss_probability = 0.0;
        let range = config.radio.range_m;
        let mut e = Engine::with_parts(
            config,
            fleet_from(&positions),
            SessionPlan::from_sessions(sessions),
            VecSink::new(),
        );

        e.run_until(SimTime::from_secs(35));
        let labels = components(&e, range);
        assert!(
            labels[0] != labels[9],
            "script {script}: clusters must start partitioned"
        );
        assert_single_core_per_component(&e, range, &format!("script {script} @35s"));

        e.run_until(SimTime::from_secs(115));
        let labels = components(&e, range);
        assert!(
            labels.iter().all(|&l| l == labels[0]),
            "script {script}: clusters must have merged by 115s"
        );
        assert_single_core_per_component(&e, range, &format!("script {script} @115s"));

        e.run_until(SimTime::from_secs(120));
        assert_core_only_origination(&e.sink().records, &format!("script {script}"));
    }
}

/// Random static graphs with churny first halves converge per component.
pub fn check_puma_static_convergence(graphs: u64) {
    for graph in 0..graphs {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0_0000 + graph);
        // Churny first half, then a stable tail: half the nodes hold a
        // session to near the end so the convergence check has subjects.
        let fleet = random_static_fleet(&mut rng);
        let mut plan = random_churn(&mut rng, 60).sessions().to_vec();
        for node in (1..NODES as u32).step_by(2) {
            plan.push(Session {
                node: NodeId(node),
                join: SimTime::from_secs_f64(rng.random_range(30.0..44.0)),
                leave: SimTime::from_secs(58),
            });
        }
        let plan = SessionPlan::from_sessions(plan);
        let mut config = cfg(ProtocolKind::Puma, 60, 3_000 + graph);
        config.radio.loss_probability = 0.0;
        let range = config.radio.range_m;
        let mut e = Engine::with_parts(config, fleet, plan, VecSink::new());
        e.run_until(SimTime::from_secs(55));
        assert_single_core_per_component(&e, range, &format!("graph {graph} @55s"));
        e.run_until(SimTime::from_secs(60));
        assert_core_only_origination(&e.sink().records, &format!("graph {graph}"));
    }
}

/// Dense and chain topologies where every packet arrives along several
/// paths; no node may record the same packet twice.
pub fn check_duplicate_suppression() {
    let blob: Vec<(f64, f64)> = (0..NODES).map(|i| (4_700.0 + i as f64 * 70.0, 0.0)).collect();
    let chain: Vec<(f64, f64)> = (0..NODES).map(|i| (3_500.0 + i as f64 * 330.0, 0.0)).collect();
    for protocol in [ProtocolKind::Maodv, ProtocolKind::Puma] {
        for (name, positions) in [("blob", &blob), ("chain", &chain)] {
            let mut config = cfg(protocol, 30, 77);
            config.traffic.enabled = true;
            let sessions: Vec<Session> = (1..NODES as u32)
                .map(|node| Session {
                    node: NodeId(node),
                    join: SimTime::from_secs(2),
                    leave: SimTime::from_secs(28),
                })
                .collect();
            let mut e = Engine::with_parts(
                config,
                fleet_from(positions),
                SessionPlan::from_sessions(sessions),
                VecSink::new(),
            );
            e.run();
            let mut seen: BTreeMap<(NodeId, PacketId), u32> = BTreeMap::new();
            let mut receptions = 0u64;
            for r in &e.sink().records {
                if r.op != TraceOp::Recv {
                    continue;
                }
                let id = r.packet.expect("receptions carry a packet id");
                *seen.entry((r.node, id)).or_insert(0) += 1;
                receptions += 1;
            }
            assert!(
                receptions > 500,
                "{protocol:?}/{name}: only {receptions} receptions, delivery never got going"
            );
            for ((node, id), count) in seen {
                assert_eq!(
                    count, 1,
                    "{protocol:?}/{name}: node {node:?} recorded packet {id:?} {count} times"
                );
            }
        }
    }
}
