//! TOML scenario files.
//!
//! Every field carries the reference-setup default, so an empty file is
//! already a valid scenario and a file only needs to name what it
//! changes. Command-line overrides are applied on top of the file; flags
//! win.

use std::fmt;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vanetcast_core::mobility::MobilityConfig;
use vanetcast_core::protocol::ProtocolConfig;
use vanetcast_core::radio::RadioConfig;
use vanetcast_core::scenario::{ProtocolKind, ScenarioConfig};
use vanetcast_core::time::SimTime;
use vanetcast_core::traffic::VbrConfig;

#[derive(Debug)]
pub enum ConfigError {
    Io(io::Error),
    Parse(toml::de::Error),
    /// All invariant violations at once, not just the first.
    Invalid(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read scenario file: {e}"),
            ConfigError::Parse(e) => write!(f, "scenario file is not valid TOML: {e}"),
            ConfigError::Invalid(errors) => {
                write!(f, "invalid scenario:")?;
                for e in errors {
                    write!(f, "\n  - {e}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn ms(t: SimTime) -> f64 {
    t.as_micros() as f64 / 1_000.0
}

fn from_ms(v: f64) -> SimTime {
    SimTime::from_micros((v * 1_000.0).round() as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilitySection {
    pub strip_length_m: f64,
    pub strip_width_m: f64,
    pub lane_offsets_m: [f64; 4],
    pub speed_min_kmh: f64,
    pub speed_max_kmh: f64,
    pub tick_s: f64,
}

impl Default for MobilitySection {
    fn default() -> Self {
        (&MobilityConfig::default()).into()
    }
}

impl From<&MobilityConfig> for MobilitySection {
    fn from(m: &MobilityConfig) -> Self {
        MobilitySection {
            strip_length_m: m.strip_length_m,
            strip_width_m: m.strip_width_m,
            lane_offsets_m: m.lane_offsets_m,
            speed_min_kmh: m.speed_min_kmh,
            speed_max_kmh: m.speed_max_kmh,
            tick_s: m.tick.as_secs_f64(),
        }
    }
}

impl From<&MobilitySection> for MobilityConfig {
    fn from(s: &MobilitySection) -> Self {
        MobilityConfig {
            strip_length_m: s.strip_length_m,
            strip_width_m: s.strip_width_m,
            lane_offsets_m: s.lane_offsets_m,
            speed_min_kmh: s.speed_min_kmh,
            speed_max_kmh: s.speed_max_kmh,
            tick: SimTime::from_secs_f64(s.tick_s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSection {
    pub range_m: f64,
    pub bitrate_bps: u64,
    pub propagation_m_per_us: f64,
    pub loss_probability: f64,
    pub collisions: bool,
}

impl Default for RadioSection {
    fn default() -> Self {
        (&RadioConfig::default()).into()
    }
}

impl From<&RadioConfig> for RadioSection {
    fn from(r: &RadioConfig) -> Self {
        RadioSection {
            range_m: r.range_m,
            bitrate_bps: r.bitrate_bps,
            propagation_m_per_us: r.propagation_m_per_us,
            loss_probability: r.loss_probability,
            collisions: r.collisions,
        }
    }
}

impl From<&RadioSection> for RadioConfig {
    fn from(s: &RadioSection) -> Self {
        RadioConfig {
            range_m: s.range_m,
            bitrate_bps: s.bitrate_bps,
            propagation_m_per_us: s.propagation_m_per_us,
            loss_probability: s.loss_probability,
            collisions: s.collisions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficSection {
    pub enabled: bool,
    pub mean_bitrate_bps: u64,
    pub frame_rate_hz: u32,
    pub size_min_bytes: u32,
    pub size_max_bytes: u32,
    pub gap_jitter_pct: u32,
}

impl Default for TrafficSection {
    fn default() -> Self {
        (&VbrConfig::default()).into()
    }
}

impl From<&VbrConfig> for TrafficSection {
    fn from(v: &VbrConfig) -> Self {
        TrafficSection {
            enabled: v.enabled,
            mean_bitrate_bps: v.mean_bitrate_bps,
            frame_rate_hz: v.frame_rate_hz,
            size_min_bytes: v.size_min_bytes,
            size_max_bytes: v.size_max_bytes,
            gap_jitter_pct: v.gap_jitter_pct,
        }
    }
}

impl From<&TrafficSection> for VbrConfig {
    fn from(s: &TrafficSection) -> Self {
        VbrConfig {
            enabled: s.enabled,
            mean_bitrate_bps: s.mean_bitrate_bps,
            frame_rate_hz: s.frame_rate_hz,
            size_min_bytes: s.size_min_bytes,
            size_max_bytes: s.size_max_bytes,
            gap_jitter_pct: s.gap_jitter_pct,
        }
    }
}

/// Protocol timer overrides. The multicast group id is fixed; one run
/// simulates one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningSection {
    pub data_latency_ms: f64,
    pub data_jitter_ms: f64,
    pub ctl_jitter_ms: f64,
    pub flood_ttl: u8,
    pub hello_interval_s: f64,
    pub hello_miss_limit: u32,
    pub join_retries: u8,
    pub join_backoff_ms: f64,
    pub rejoin_delay_s: f64,
    pub announce_interval_s: f64,
    pub connectivity_expiry_periods: u32,
    pub core_silence_periods: u32,
}

impl Default for TuningSection {
    fn default() -> Self {
        (&ProtocolConfig::default()).into()
    }
}

impl From<&ProtocolConfig> for TuningSection {
    fn from(p: &ProtocolConfig) -> Self {
        TuningSection {
            data_latency_ms: ms(p.data_latency),
            data_jitter_ms: ms(p.data_jitter),
            ctl_jitter_ms: ms(p.ctl_jitter),
            flood_ttl: p.flood_ttl,
            hello_interval_s: p.hello_interval.as_secs_f64(),
            hello_miss_limit: p.hello_miss_limit,
            join_retries: p.join_retries,
            join_backoff_ms: ms(p.join_backoff),
            rejoin_delay_s: p.rejoin_delay.as_secs_f64(),
            announce_interval_s: p.announce_interval.as_secs_f64(),
            connectivity_expiry_periods: p.connectivity_expiry_periods,
            core_silence_periods: p.core_silence_periods,
        }
    }
}

impl From<&TuningSection> for ProtocolConfig {
    fn from(s: &TuningSection) -> Self {
        ProtocolConfig {
            data_latency: from_ms(s.data_latency_ms),
            data_jitter: from_ms(s.data_jitter_ms),
            ctl_jitter: from_ms(s.ctl_jitter_ms),
            flood_ttl: s.flood_ttl,
            hello_interval: SimTime::from_secs_f64(s.hello_interval_s),
            hello_miss_limit: s.hello_miss_limit,
            join_retries: s.join_retries,
            join_backoff: from_ms(s.join_backoff_ms),
            rejoin_delay: SimTime::from_secs_f64(s.rejoin_delay_s),
            announce_interval: SimTime::from_secs_f64(s.announce_interval_s),
            connectivity_expiry_periods: s.connectivity_expiry_periods,
            core_silence_periods: s.core_silence_periods,
            ..ProtocolConfig::default()
        }
    }
}

/// The on-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    /// `maodv` or `puma`.
    pub protocol: String,
    pub seed: u64,
    pub nodes: u32,
    pub duration_s: f64,
    pub listeners: u32,
    pub sessions: u32,
    pub mobility: MobilitySection,
    pub radio: RadioSection,
    pub traffic: TrafficSection,
    pub tuning: TuningSection,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioFile::from_config(&ScenarioConfig::default())
    }
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<ScenarioFile, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        text.parse()
    }

    pub fn from_config(cfg: &ScenarioConfig) -> ScenarioFile {
        ScenarioFile {
            protocol: cfg.protocol.as_str().to_string(),
            seed: cfg.seed,
            nodes: cfg.node_count,
            duration_s: cfg.duration.as_secs_f64(),
            listeners: cfg.listeners,
            sessions: cfg.sessions_per_listener,
            mobility: (&cfg.mobility).into(),
            radio: (&cfg.radio).into(),
            traffic: (&cfg.traffic).into(),
            tuning: (&cfg.tuning).into(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario files have no unserializable values")
    }

    /// Build and validate the runnable configuration, reporting every
    /// problem at once.
    pub fn to_config(&self) -> Result<ScenarioConfig, ConfigError> {
        let mut errors = Vec::new();
        let protocol = match self.protocol.parse::<ProtocolKind>() {
            Ok(p) => p,
            Err(e) => {
                errors.push(e);
                ProtocolKind::Maodv
            }
        };
        let cfg = ScenarioConfig {
            protocol,
            seed: self.seed,
            node_count: self.nodes,
            duration: SimTime::from_secs_f64(self.duration_s.max(0.0)),
            listeners: self.listeners,
            sessions_per_listener: self.sessions,
            mobility: (&self.mobility).into(),
            radio: (&self.radio).into(),
            traffic: (&self.traffic).into(),
            tuning: (&self.tuning).into(),
        };
        if self.duration_s <= 0.0 {
            errors.push(String::from("duration must be positive"));
        }
        if let Err(more) = cfg.validate() {
            // The duration check above already covers a zero SimTime.
            errors.extend(more.into_iter().filter(|e| !e.starts_with("duration")));
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }
}

impl std::str::FromStr for ScenarioFile {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        toml::from_str(s).map_err(ConfigError::Parse)
    }
}

/// Command-line overrides; `None` keeps the file's value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub protocol: Option<ProtocolKind>,
    pub seed: Option<u64>,
    pub nodes: Option<u32>,
    pub duration_s: Option<f64>,
    pub listeners: Option<u32>,
    pub sessions: Option<u32>,
}

impl Overrides {
    pub fn apply(&self, file: &mut ScenarioFile) {
        if let Some(p) = self.protocol {
            file.protocol = p.as_str().to_string();
        }
        if let Some(v) = self.seed {
            file.seed = v;
        }
        if let Some(v) = self.nodes {
            file.nodes = v;
        }
        if let Some(v) = self.duration_s {
            file.duration_s = v;
        }
        if let Some(v) = self.listeners {
            file.listeners = v;
        }
        if let Some(v) = self.sessions {
            file.sessions = v;
        }
    }
}
