//! Result files: `summary.json`, `timeseries.csv`, `delays.csv`, and sweep tables.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::actual_plane::DelaySample;
use crate::error::Result;
use crate::harness::metrics::{FrameRecord, MetricsReport};
use crate::harness::sim::SimOutput;
use crate::harness::sweep::SweepRow;

pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const DELAYS_FILE: &str = "delays.csv";

#[derive(Serialize)]
struct DelayRow {
    user: usize,
    object: usize,
    chunk: u32,
    created_slot: u64,
    fulfilled_slot: u64,
    delay_slots: u64,
    comp: bool,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    write_csv_to(fs::File::create(path)?, rows)
}

pub fn write_csv_to<W: Write, T: Serialize>(out: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_json(report: &MetricsReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

pub fn write_timeseries(path: &Path, frames: &[FrameRecord]) -> Result<()> {
    write_csv(path, frames)
}

pub fn write_delays(path: &Path, delays: &[DelaySample]) -> Result<()> {
    write_csv(
        path,
        delays.iter().map(|d| DelayRow {
            user: d.user,
            object: d.object,
            chunk: d.chunk,
            created_slot: d.created,
            fulfilled_slot: d.fulfilled,
            delay_slots: d.delay(),
            comp: d.comp,
        }),
    )
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_csv(path, rows)
}

/// Writes the three run files into `dir`, creating it if needed.
pub fn write_run(dir: &Path, out: &SimOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(SUMMARY_FILE), summary_json(&out.report)?)?;
    write_timeseries(&dir.join(TIMESERIES_FILE), &out.frames)?;
    write_delays(&dir.join(DELAYS_FILE), &out.delays)?;
    Ok(())
}
