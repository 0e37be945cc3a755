//! Trace sink that streams records to a file as the simulation runs.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use vanetcast_core::trace::{TraceRecord, TraceSink};

/// Buffered line-per-record writer. `TraceSink::record` cannot return an
/// error, so the first write failure is remembered and surfaced by
/// [`FileSink::finish`]; later records are dropped.
pub struct FileSink {
    writer: BufWriter<File>,
    error: Option<io::Error>,
}

impl FileSink {
    pub fn create(path: &Path) -> io::Result<FileSink> {
        Ok(FileSink {
            writer: BufWriter::new(File::create(path)?),
            error: None,
        })
    }

    /// Flush and report any write error encountered along the way.
    pub fn finish(mut self) -> io::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.writer.flush()
    }
}

impl TraceSink for FileSink {
    fn record(&mut self, rec: &TraceRecord) {
        if self.error.is_some() {
            return;
        }
        if let Err(e) = writeln!(self.writer, "{rec}") {
            self.error = Some(e);
        }
    }
}
