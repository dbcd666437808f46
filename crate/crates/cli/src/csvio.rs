//! Signal (`t_s,volts`) and spectrum (`freq_hz,mag_db`) CSV files.
//!
//! Numbers are written with 17 significant digits, so a value read back is
//! the value that was written.

use std::io::{Read, Write};
use std::path::Path;

use usf_radar_core::{SamplingGrid, Signal, Spectrum};

use crate::error::{CliError, Result};

pub const SIGNAL_HEADER: [&str; 2] = ["t_s", "volts"];
pub const SPECTRUM_HEADER: [&str; 2] = ["freq_hz", "mag_db"];

pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_pairs<W: Write>(out: W, header: [&str; 2], rows: impl Iterator<Item = (f64, f64)>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for (a, b) in rows {
        w.write_record([format_number(a), format_number(b)])?;
    }
    w.flush()?;
    Ok(())
}

fn csv_to_cli(context: &str, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(context, io),
        other => CliError::config(format!("{context}: {other:?}")),
    }
}

pub fn write_signal<W: Write>(out: W, signal: &Signal) -> Result<()> {
    let grid = signal.grid();
    let rows = signal.values().iter().enumerate().map(|(n, &v)| (grid.time(n), v));
    write_pairs(out, SIGNAL_HEADER, rows).map_err(|e| csv_to_cli("signal csv", e))
}

pub fn write_spectrum<W: Write>(out: W, spectrum: &Spectrum) -> Result<()> {
    let rows = spectrum.frequencies().iter().copied().zip(spectrum.magnitudes_db().iter().copied());
    write_pairs(out, SPECTRUM_HEADER, rows).map_err(|e| csv_to_cli("spectrum csv", e))
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            let file = std::fs::File::create(p).map_err(|e| CliError::io(p, e))?;
            let mut buf = std::io::BufWriter::new(file);
            write(&mut buf).map_err(|e| relabel(e, p))?;
            buf.flush().map_err(|e| CliError::io(p, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush().map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn relabel(e: CliError, path: &Path) -> CliError {
    match e {
        CliError::Io { source, .. } => CliError::io(path, source),
        other => other,
    }
}

/// Sampling rate implied by uniformly spaced times; snapped to an integer
/// when within 1e-6 relative of one.
fn infer_rate(times: &[f64]) -> std::result::Result<f64, String> {
    if times.len() < 2 {
        return Err("need at least two samples to infer the sampling rate".into());
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err("time column must be strictly increasing".into());
    }
    let mut rate = (times.len() - 1) as f64 / span;
    if (rate - rate.round()).abs() <= 1e-6 * rate {
        rate = rate.round();
    }
    let t0 = times[0];
    let slack = 1e-6 / rate;
    if let Some(n) = (0..times.len()).find(|&n| (times[n] - (t0 + n as f64 / rate)).abs() > slack) {
        return Err(format!("time column is not uniformly sampled (row {})", n + 1));
    }
    Ok(rate)
}

/// Parses a `t_s,volts` CSV; the grid is recovered from the time column.
pub fn read_signal<R: Read>(input: R, context: &str) -> Result<Signal> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(|e| csv_to_cli(context, e))?.clone();
    if header.len() != 2 || header.get(0) != Some(SIGNAL_HEADER[0]) || header.get(1) != Some(SIGNAL_HEADER[1]) {
        return Err(CliError::config(format!(
            "{context}: expected header `t_s,volts`, found `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_to_cli(context, e))?;
        let parse = |k: usize| -> Result<f64> {
            let field = record.get(k).unwrap_or("");
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::config(format!("{context}: row {}: `{field}` is not a finite number", i + 2)))
        };
        times.push(parse(0)?);
        values.push(parse(1)?);
    }
    let rate = infer_rate(&times).map_err(|m| CliError::config(format!("{context}: {m}")))?;
    let grid = SamplingGrid::with_start(rate, values.len(), times[0])
        .map_err(|e| CliError::config(format!("{context}: {e}")))?;
    Signal::new(grid, values).map_err(|e| CliError::config(format!("{context}: {e}")))
}

pub fn read_signal_file(path: &Path) -> Result<Signal> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_signal(std::io::BufReader::new(file), &path.display().to_string())
}
