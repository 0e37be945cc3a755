//! The per-scenario metrics report, one CSV row per run.

use std::fmt;

use vanetcast_core::metrics::MetricsReport;
use vanetcast_core::scenario::{ProtocolKind, ScenarioConfig};

pub const CSV_HEADER: &str =
    "scenario,protocol,listeners,sessions,pdr,avg_eed_s,throughput_kbps,nrl";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub protocol: ProtocolKind,
    pub listeners: u32,
    pub sessions: u32,
    pub pdr: f64,
    pub avg_eed_s: f64,
    pub throughput_kbps: f64,
    pub nrl: f64,
}

impl ReportRow {
    pub fn new(cfg: &ScenarioConfig, metrics: &MetricsReport) -> ReportRow {
        ReportRow {
            scenario: cfg.scenario_id(),
            protocol: cfg.protocol,
            listeners: cfg.listeners,
            sessions: cfg.sessions_per_listener,
            pdr: metrics.pdr,
            avg_eed_s: metrics.avg_eed_s,
            throughput_kbps: metrics.throughput_kbps,
            nrl: metrics.nrl,
        }
    }

    /// Seed encoded in the scenario id (`...-r<seed>`), when present.
    pub fn seed(&self) -> Option<u64> {
        self.scenario.rsplit('-').next()?.strip_prefix('r')?.parse().ok()
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.3},{:.6}",
            self.scenario,
            self.protocol,
            self.listeners,
            self.sessions,
            self.pdr,
            self.avg_eed_s,
            self.throughput_kbps,
            self.nrl
        )
    }
}

/// Render a whole report; fixed decimal formatting keeps repeated runs
/// byte-identical.
pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportError {
    /// 1-based line in the CSV text.
    pub line: usize,
    pub what: String,
}

impl fmt::Display for ReportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bad report line {}: {}", self.line, self.what)
    }
}

impl std::error::Error for ReportError {}

pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>, ReportError> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line == CSV_HEADER) {
            continue;
        }
        let err = |what: &str| ReportError {
            line: idx + 1,
            what: what.to_string(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(err("expected 8 comma-separated fields"));
        }
        rows.push(ReportRow {
            scenario: fields[0].to_string(),
            protocol: fields[1].parse().map_err(|_| err("bad protocol"))?,
            listeners: fields[2].parse().map_err(|_| err("bad listener count"))?,
            sessions: fields[3].parse().map_err(|_| err("bad session count"))?,
            pdr: fields[4].parse().map_err(|_| err("bad pdr"))?,
            avg_eed_s: fields[5].parse().map_err(|_| err("bad avg_eed_s"))?,
            throughput_kbps: fields[6].parse().map_err(|_| err("bad throughput"))?,
            nrl: fields[7].parse().map_err(|_| err("bad nrl"))?,
        });
    }
    Ok(rows)
}
