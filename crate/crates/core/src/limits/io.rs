//! Field snapshot formats.
//!
//! CSV: a header `t,cell_0,...,cell_{K-1}` and one row per record time.
//!
//! Binary grid dump: the magic bytes `FSL1`, then little-endian `u32`
//! dimension, `u32` cells per side, `f64` time and the `f64` values in
//! row-major order.

use std::io::{Read, Write};

use crate::domain::SpatialDomain;
use crate::error::{Error, Result};
use crate::field::FrequencyField;

pub const GRID_MAGIC: &[u8; 4] = b"FSL1";

/// A field at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn of(time: f64, field: &FrequencyField) -> Self {
        Self {
            time,
            values: field.values().to_vec(),
        }
    }
}

pub fn write_csv_header<W: Write>(out: &mut W, cells: usize) -> std::io::Result<()> {
    write!(out, "t")?;
    for c in 0..cells {
        write!(out, ",cell_{c}")?;
    }
    writeln!(out)
}

pub fn write_csv_row<W: Write>(out: &mut W, snapshot: &Snapshot) -> std::io::Result<()> {
    write!(out, "{:?}", snapshot.time)?;
    for v in &snapshot.values {
        write!(out, ",{v:?}")?;
    }
    writeln!(out)
}

/// Header plus one row per snapshot.
pub fn write_snapshots_csv<W: Write>(out: &mut W, snapshots: &[Snapshot]) -> std::io::Result<()> {
    let cells = snapshots.first().map_or(0, |s| s.values.len());
    write_csv_header(out, cells)?;
    for s in snapshots {
        write_csv_row(out, s)?;
    }
    Ok(())
}

/// Parses the CSV written by [`write_snapshots_csv`].
pub fn read_snapshots_csv<R: Read>(mut input: R) -> Result<Vec<Snapshot>> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| Error::Format(format!("unreadable CSV: {e}")))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))?;
    let columns = header.split(',').count();
    if !header.starts_with('t') {
        return Err(Error::Format(format!("unexpected header {header:?}")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let parsed: std::result::Result<Vec<f64>, _> =
                line.split(',').map(str::parse::<f64>).collect();
            let parsed = parsed.map_err(|e| Error::Format(format!("row {}: {e}", i + 1)))?;
            if parsed.len() != columns {
                return Err(Error::Format(format!(
                    "row {} has {} columns, header has {columns}",
                    i + 1,
                    parsed.len()
                )));
            }
            Ok(Snapshot {
                time: parsed[0],
                values: parsed[1..].to_vec(),
            })
        })
        .collect()
}

pub fn write_grid_dump<W: Write>(
    out: &mut W,
    domain: &SpatialDomain,
    time: f64,
    values: &[f64],
) -> Result<()> {
    if values.len() != domain.cell_count() {
        return Err(Error::Format(format!(
            "{} values for a grid of {} cells",
            values.len(),
            domain.cell_count()
        )));
    }
    let mut buf = Vec::with_capacity(20 + 8 * values.len());
    buf.extend_from_slice(GRID_MAGIC);
    buf.extend_from_slice(&(domain.dimension() as u32).to_le_bytes());
    buf.extend_from_slice(&(domain.cells_per_side() as u32).to_le_bytes());
    buf.extend_from_slice(&time.to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)
        .map_err(|e| Error::Format(format!("write failed: {e}")))
}

/// Contents of a binary grid dump.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDump {
    pub dimension: u32,
    pub cells_per_side: u32,
    pub time: f64,
    pub values: Vec<f64>,
}

pub fn read_grid_dump<R: Read>(mut input: R) -> Result<GridDump> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Format(format!("unreadable dump: {e}")))?;
    if bytes.len() < 20 || &bytes[..4] != GRID_MAGIC {
        return Err(Error::Format("missing FSL1 header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let dimension = u32_at(4);
    let cells_per_side = u32_at(8);
    if !(1..=2).contains(&dimension) {
        return Err(Error::Format(format!("unsupported dimension {dimension}")));
    }
    let cells = (cells_per_side as usize).pow(dimension);
    if bytes.len() != 20 + 8 * cells {
        return Err(Error::Format(format!(
            "expected {} bytes for {cells} cells, found {}",
            20 + 8 * cells,
            bytes.len()
        )));
    }
    Ok(GridDump {
        dimension,
        cells_per_side,
        time: f64_at(12),
        values: (0..cells).map(|c| f64_at(20 + 8 * c)).collect(),
    })
}
