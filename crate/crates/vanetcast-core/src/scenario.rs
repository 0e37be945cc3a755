//! Scenario configuration: everything one simulation run depends on.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::mobility::MobilityConfig;
use crate::protocol::ProtocolConfig;
use crate::radio::RadioConfig;
use crate::time::SimTime;
use crate::traffic::VbrConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProtocolKind {
    Maodv,
    Puma,
}

impl ProtocolKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProtocolKind::Maodv => "maodv",
            ProtocolKind::Puma => "puma",
        }
    }

    /// Single-letter tag used in scenario ids.
    pub fn tag(&self) -> char {
        match self {
            ProtocolKind::Maodv => 'm',
            ProtocolKind::Puma => 'p',
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "maodv" => Ok(ProtocolKind::Maodv),
            "puma" => Ok(ProtocolKind::Puma),
            other => Err(format!("unknown protocol `{other}` (expected maodv or puma)")),
        }
    }
}

/// Full description of one run. The defaults are the reference setup:
/// 100 vehicles on a 10 km strip for 600 s, one VBR source, one group.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub protocol: ProtocolKind,
    pub seed: u64,
    pub node_count: u32,
    pub duration: SimTime,
    /// Listener pool size (the source is never a listener).
    pub listeners: u32,
    /// Join/leave sessions each listener performs over the run.
    pub sessions_per_listener: u32,
    pub mobility: MobilityConfig,
    pub radio: RadioConfig,
    pub traffic: VbrConfig,
    pub tuning: ProtocolConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            protocol: ProtocolKind::Maodv,
            seed: 1,
            node_count: 100,
            duration: SimTime::from_secs(600),
            listeners: 10,
            sessions_per_listener: 5,
            mobility: MobilityConfig::default(),
            radio: RadioConfig::default(),
            traffic: VbrConfig::default(),
            tuning: ProtocolConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// Compact run identifier, e.g. `p-l10-s5-r42`.
    pub fn scenario_id(&self) -> String {
        format!(
            "{}-l{}-s{}-r{}",
            self.protocol.tag(),
            self.listeners,
            self.sessions_per_listener,
            self.seed
        )
    }

    /// Check every field, collecting all problems instead of stopping at
    /// the first.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        if self.duration.0 == 0 {
            errors.push(String::from("duration must be positive"));
        }
        if self.node_count == 0 {
            errors.push(String::from("node count must be at least 1"));
        }
        if self.listeners == 0 {
            errors.push(String::from("listener count must be at least 1"));
        }
        // The source vehicle never listens, so the pool is one smaller.
        if self.node_count > 0 && self.listeners > self.node_count - 1 {
            errors.push(format!(
                "listeners exceed nodes: {} requested but only {} candidates ({} vehicles minus the source)",
                self.listeners,
                self.node_count - 1,
                self.node_count
            ));
        }
        if self.sessions_per_listener == 0 {
            errors.push(String::from("session count must be at least 1"));
        }
        if !(self.mobility.strip_length_m > 0.0) {
            errors.push(String::from("strip length must be positive"));
        }
        if !(self.mobility.strip_width_m > 0.0) {
            errors.push(String::from("strip width must be positive"));
        }
        if self.mobility.speed_min_kmh > self.mobility.speed_max_kmh {
            errors.push(format!(
                "speed range is inverted: {} > {} km/h",
                self.mobility.speed_min_kmh, self.mobility.speed_max_kmh
            ));
        }
        if !(self.mobility.speed_min_kmh >= 0.0) {
            errors.push(String::from("speeds must be non-negative"));
        }
        if self.mobility.tick.0 == 0 {
            errors.push(String::from("mobility tick must be positive"));
        }
        if !(self.radio.range_m > 0.0) {
            errors.push(String::from("radio range must be positive"));
        }
        if self.radio.bitrate_bps == 0 {
            errors.push(String::from("radio bitrate must be positive"));
        }
        if !(self.radio.propagation_m_per_us > 0.0) {
            errors.push(String::from("propagation speed must be positive"));
        }
        if !(0.0..=1.0).contains(&self.radio.loss_probability) {
            errors.push(format!(
                "loss probability {} outside [0, 1]",
                self.radio.loss_probability
            ));
        }
        if self.traffic.size_min_bytes == 0 || self.traffic.size_min_bytes > self.traffic.size_max_bytes
        {
            errors.push(format!(
                "packet size range [{}, {}] is invalid",
                self.traffic.size_min_bytes, self.traffic.size_max_bytes
            ));
        }
        if self.traffic.mean_bitrate_bps == 0 {
            errors.push(String::from("traffic bitrate must be positive"));
        }
        if self.traffic.gap_jitter_pct > 99 {
            errors.push(format!(
                "gap jitter of {}% allows zero-length gaps",
                self.traffic.gap_jitter_pct
            ));
        }
        if self.tuning.hello_interval.0 == 0 || self.tuning.announce_interval.0 == 0 {
            errors.push(String::from("protocol beacon intervals must be positive"));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}
