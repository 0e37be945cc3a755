//! Sequential batch runner: simulate, write the trace, analyse the trace
//! file, collect report rows. Metrics are always computed from the trace
//! file on disk, never from in-memory simulator state, so anything that
//! can produce the trace format can be analysed the same way.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use vanetcast_core::engine::Engine;
use vanetcast_core::metrics::{analyze, MetricsOptions, MetricsReport};
use vanetcast_core::scenario::{ProtocolKind, ScenarioConfig};
use vanetcast_core::trace::parse_trace;

use crate::report::ReportRow;
use crate::sink::FileSink;

/// One batch: which scenarios, where the artifacts go, how long one
/// scenario may take.
#[derive(Debug, Clone)]
pub struct BatchSpec {
    pub scenarios: Vec<ScenarioConfig>,
    pub out_dir: PathBuf,
    /// Wall-clock budget per scenario; a run past it is aborted and
    /// recorded as failed.
    pub budget: Duration,
    /// Delete each trace after analysis. The report survives either way.
    pub keep_traces: bool,
    pub metrics: MetricsOptions,
}

impl BatchSpec {
    pub fn new(scenarios: Vec<ScenarioConfig>, out_dir: PathBuf) -> BatchSpec {
        BatchSpec {
            scenarios,
            out_dir,
            budget: Duration::from_secs(600),
            keep_traces: true,
            metrics: MetricsOptions::default(),
        }
    }

    /// Scenario ids must be unique or the runs would overwrite each
    /// other's traces.
    pub fn check_ids(&self) -> Result<(), String> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.scenarios {
            let id = s.scenario_id();
            if !seen.insert(id.clone()) {
                return Err(format!("duplicate scenario id `{id}`"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioFailure {
    pub id: String,
    pub reason: String,
}

impl fmt::Display for ScenarioFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.id, self.reason)
    }
}

#[derive(Debug, Default)]
pub struct BatchOutcome {
    /// In scenario order, failed runs omitted.
    pub rows: Vec<ReportRow>,
    pub failures: Vec<ScenarioFailure>,
}

/// The reference comparison matrix: both protocols over every
/// (listeners, sessions) cell, sharing the cell's seed so the pair sees
/// identical mobility and session churn. `reps` adds further seeds
/// (base, base+1, ...).
pub fn paper_matrix(base: &ScenarioConfig, base_seed: u64, reps: u32) -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for &listeners in &[10u32, 20, 40, 60] {
        for &sessions in &[5u32, 10, 20] {
            for rep in 0..reps.max(1) as u64 {
                for protocol in [ProtocolKind::Maodv, ProtocolKind::Puma] {
                    out.push(ScenarioConfig {
                        protocol,
                        seed: base_seed + rep,
                        listeners,
                        sessions_per_listener: sessions,
                        ..base.clone()
                    });
                }
            }
        }
    }
    out
}

/// Simulate one scenario, write `<id>.tr`, analyse the file.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    trace_path: &Path,
    budget: Duration,
    metrics: MetricsOptions,
) -> Result<MetricsReport, String> {
    cfg.validate()
        .map_err(|errors| format!("invalid scenario: {}", errors.join("; ")))?;
    let sink = FileSink::create(trace_path)
        .map_err(|e| format!("cannot create {}: {e}", trace_path.display()))?;
    let mut engine =
        Engine::new(cfg.clone(), sink).map_err(|e| format!("engine setup failed: {e}"))?;
    let started = Instant::now();
    engine
        .run_with_abort(&mut || started.elapsed() > budget)
        .map_err(|e| format!("aborted: {e}"))?;
    engine
        .into_sink()
        .finish()
        .map_err(|e| format!("trace write failed: {e}"))?;
    let text = fs::read_to_string(trace_path)
        .map_err(|e| format!("cannot read trace back: {e}"))?;
    let records = parse_trace(&text).map_err(|e| format!("emitted trace unreadable: {e}"))?;
    analyze(&records, metrics).map_err(|e| format!("analysis failed: {e}"))
}

/// Run every scenario in order. Scenario failures are recorded and the
/// batch continues; only output-directory problems abort the whole run.
pub fn run_matrix(spec: &BatchSpec) -> io::Result<BatchOutcome> {
    fs::create_dir_all(&spec.out_dir)?;
    let mut outcome = BatchOutcome::default();
    for cfg in &spec.scenarios {
        let id = cfg.scenario_id();
        let trace_path = spec.out_dir.join(format!("{id}.tr"));
        match run_scenario(cfg, &trace_path, spec.budget, spec.metrics) {
            Ok(report) => outcome.rows.push(ReportRow::new(cfg, &report)),
            Err(reason) => outcome.failures.push(ScenarioFailure { id, reason }),
        }
        if !spec.keep_traces {
            // Best effort; an already-missing file is fine.
            let _ = fs::remove_file(&trace_path);
        }
    }
    Ok(outcome)
}
