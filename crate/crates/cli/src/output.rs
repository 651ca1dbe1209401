//! Report files. Everything written here is a pure function of the bundle,
//! so identical runs give byte-identical files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use otdm_core::Spectrum;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::runner::ReportBundle;
use crate::scenario::Mode;

/// Floor for empty spectral bins.
const FLOOR_DBM: f64 = -300.0;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(otdm_core::Error::from)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

fn write_text(text: &str, path: &Path) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<BufWriter<File>>> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header)?;
    Ok(w)
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Columns `f_Hz, power_dBm`; frequency is the offset from the carrier.
pub fn write_spectrum(sp: &Spectrum, path: &Path) -> Result<()> {
    let mut w = csv_writer(path, &["f_Hz", "power_dBm"])?;
    for (f, p) in sp.frequencies().zip(sp.power_dbm()) {
        w.serialize((f, p.max(FLOOR_DBM)))?;
    }
    finish(w, path)
}

/// Writes the bundle into `dir` and returns the paths written.
pub fn write_bundle(bundle: &ReportBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    let mut out = |name: String| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    let s = &bundle.scenario;
    write_json(s, &out("scenario.json".into()))?;
    write_json(bundle, &out("report.json".into()))?;

    if s.mode == Mode::Comb {
        if let Some(comb) = &bundle.comb {
            let text = format!("{}rmse_percent           {:.4}\n", comb.calibration.table(), comb.rmse_percent);
            write_text(&text, &out("comb_table.txt".into()))?;
        }
        if let Some(sp) = &bundle.traces.comb_spectrum {
            write_spectrum(sp, &out("comb_spectrum.csv".into()))?;
        }
        if let Some((measured, ideal)) = &bundle.traces.comb_waveform {
            let path = out("comb_waveform.csv".into());
            let mut w = csv_writer(&path, &["t_seconds", "re", "im", "ideal"])?;
            let g = measured.grid();
            for (i, (a, b)) in measured.samples().iter().zip(ideal.samples()).enumerate() {
                w.serialize((g.time(i), a.re, a.im, b.re))?;
            }
            finish(w, &path)?;
        }
        return Ok(written);
    }

    if s.outputs.metrics {
        write_text(&bundle.metrics_table(), &out("metrics.txt".into()))?;
    }
    if let Some(sp) = &bundle.traces.spectrum_before {
        write_spectrum(sp, &out("spectrum_mux.csv".into()))?;
    }
    for (i, t) in bundle.traces.branches.iter().enumerate() {
        let l = i + 1;
        if let Some(sp) = &t.spectrum_after {
            write_spectrum(sp, &out(format!("spectrum_branch{l}.csv")))?;
        }
        if !t.constellation.is_empty() {
            let path = out(format!("constellation_branch{l}.csv"));
            let mut w = csv_writer(&path, &["re", "im", "decided_symbol"])?;
            for (v, d) in &t.constellation {
                w.serialize((v.re, v.im, d))?;
            }
            finish(w, &path)?;
        }
        if !t.eye.is_empty() {
            let path = out(format!("eye_branch{l}.csv"));
            let mut w = csv_writer(&path, &["t_mod_2symbols", "amplitude"])?;
            for (tau, a) in &t.eye {
                w.serialize((tau, a))?;
            }
            finish(w, &path)?;
        }
    }
    Ok(written)
}
