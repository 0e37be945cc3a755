//! File formats, batch running and trend evaluation on top of
//! `vanetcast-core`. The core crate simulates and analyses in memory;
//! everything here touches the filesystem: TOML scenario files, trace
//! files on disk, CSV reports and the pass/fail trend summary.

pub mod batch;
pub mod config;
pub mod report;
pub mod sink;
pub mod trends;
