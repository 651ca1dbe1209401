//! Signal files: a CSV body with `t_seconds,re,im` rows next to a JSON header
//! holding the [`TimeGrid`] (`sample_rate`, `n_samples`, `t0`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{Signal, TimeGrid};

#[derive(Serialize, Deserialize)]
struct Row {
    t_seconds: f64,
    re: f64,
    im: f64,
}

pub fn write_csv<W: Write>(sig: &Signal, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (t, x) in sig.grid().times().zip(sig.samples()) {
        w.serialize(Row {
            t_seconds: t,
            re: x.re,
            im: x.im,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV body against its header grid. The time column is checked
/// against the grid rather than trusted.
pub fn read_csv<R: Read>(grid: TimeGrid, reader: R) -> Result<Signal> {
    let mut r = csv::Reader::from_reader(reader);
    let mut samples = Vec::with_capacity(grid.n_samples);
    for (i, row) in r.deserialize::<Row>().enumerate() {
        let row = row?;
        let expect = grid.time(i);
        if (row.t_seconds - expect).abs() > 1e-6 * grid.dt() + 1e-12 * expect.abs() {
            return Err(invalid(
                "t_seconds",
                format!("row {i} has t = {:e}, grid expects {:e}", row.t_seconds, expect),
            ));
        }
        samples.push(Complex64::new(row.re, row.im));
    }
    Signal::new(grid, samples)
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("csv"), stem.with_extension("json"))
}

/// Writes `<stem>.csv` and `<stem>.json`.
pub fn save(sig: &Signal, stem: impl AsRef<Path>) -> Result<()> {
    let (csv_path, json_path) = paths(stem.as_ref());
    let header = serde_json::to_string_pretty(sig.grid())?;
    std::fs::write(json_path, header + "\n")?;
    write_csv(sig, BufWriter::new(File::create(csv_path)?))
}

pub fn load(stem: impl AsRef<Path>) -> Result<Signal> {
    let (csv_path, json_path) = paths(stem.as_ref());
    let grid: TimeGrid = serde_json::from_reader(BufReader::new(File::open(json_path)?))?;
    let grid = TimeGrid::new(grid.sample_rate, grid.n_samples, grid.t0)?;
    let sig = read_csv(grid, BufReader::new(File::open(csv_path)?))?;
    if sig.len() != grid.n_samples {
        return Err(Error::LengthMismatch {
            expected: grid.n_samples,
            actual: sig.len(),
        });
    }
    Ok(sig)
}
