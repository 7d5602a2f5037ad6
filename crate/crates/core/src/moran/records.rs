//! Record files: `proportions.txt`, `origin_<γ>.txt` and the event log.
//!
//! Proportion rows are `time global deme_0 … deme_{β-1}` (β + 2 columns);
//! origin rows are `time deme_0 … deme_{β-1}` (β + 1 columns), the share of
//! each deme whose ancestral origin is γ. Values are single-space separated.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::clock::ClockEvent;
use super::Population;

pub const PROPORTIONS_FILE: &str = "proportions.txt";
pub const EVENTS_FILE: &str = "events.txt";

pub fn origin_file_name(gamma: usize) -> String {
    format!("origin_{gamma}.txt")
}

/// Destinations of the record rows.
#[derive(Debug)]
pub struct RecordWriters<W: Write> {
    proportions: (PathBuf, W),
    origins: Vec<(PathBuf, W)>,
    events: Option<(PathBuf, W)>,
}

impl RecordWriters<BufWriter<File>> {
    /// Creates `proportions.txt`, one origin file per deme, and `events.txt`
    /// when `log_events` is set.
    pub fn create(dir: &Path, demes: usize, log_events: bool) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let open = |name: String| -> Result<(PathBuf, BufWriter<File>)> {
            let path = dir.join(name);
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            Ok((path, BufWriter::new(file)))
        };
        Ok(Self {
            proportions: open(PROPORTIONS_FILE.into())?,
            origins: (0..demes).map(|g| open(origin_file_name(g))).collect::<Result<_>>()?,
            events: if log_events {
                Some(open(EVENTS_FILE.into())?)
            } else {
                None
            },
        })
    }
}

impl RecordWriters<Vec<u8>> {
    pub fn in_memory(demes: usize, log_events: bool) -> Self {
        let named = |name: String| (PathBuf::from(name), Vec::new());
        Self {
            proportions: named(PROPORTIONS_FILE.into()),
            origins: (0..demes).map(|g| named(origin_file_name(g))).collect(),
            events: log_events.then(|| named(EVENTS_FILE.into())),
        }
    }

    pub fn proportions(&self) -> &[u8] {
        &self.proportions.1
    }

    pub fn origin(&self, gamma: usize) -> &[u8] {
        &self.origins[gamma].1
    }

    pub fn events(&self) -> Option<&[u8]> {
        self.events.as_ref().map(|e| e.1.as_slice())
    }
}

impl<W: Write> RecordWriters<W> {
    pub fn logs_events(&self) -> bool {
        self.events.is_some()
    }

    pub(crate) fn log_event(&mut self, event: &ClockEvent) -> Result<()> {
        if let Some((path, w)) = self.events.as_mut() {
            writeln!(w, "{:?} {} {}", event.time, event.slot.kind.label(), event.slot.site)
                .map_err(|e| Error::io(path.as_path(), e))?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        let (path, w) = &mut self.proportions;
        w.flush().map_err(|e| Error::io(path.as_path(), e))?;
        for (path, w) in self.origins.iter_mut().chain(self.events.iter_mut()) {
            w.flush().map_err(|e| Error::io(path.as_path(), e))?;
        }
        Ok(())
    }
}

/// Appends one row to every record file.
pub fn write_records<W: Write>(pop: &Population, time: f64, writers: &mut RecordWriters<W>) -> Result<()> {
    let beta = pop.demes();
    if writers.origins.len() != beta {
        return Err(Error::State(format!(
            "{} origin files for {beta} demes",
            writers.origins.len()
        )));
    }
    let size = pop.deme_size() as f64;
    let mut row = format!("{time:?} {:?}", pop.global_proportion());
    for d in 0..beta {
        row.push_str(&format!(" {:?}", pop.lower_count(d) as f64 / size));
    }
    row.push('\n');
    let (path, w) = &mut writers.proportions;
    w.write_all(row.as_bytes()).map_err(|e| Error::io(path.as_path(), e))?;
    for (gamma, (path, w)) in writers.origins.iter_mut().enumerate() {
        let mut row = format!("{time:?}");
        for d in 0..beta {
            row.push_str(&format!(" {:?}", pop.origin_count(d, gamma) as f64 / size));
        }
        row.push('\n');
        w.write_all(row.as_bytes()).map_err(|e| Error::io(path.as_path(), e))?;
    }
    Ok(())
}

/// Parses a whitespace-separated record file into rows.
pub fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            line.split(' ')
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))
                })
                .collect()
        })
        .collect()
}
