//! CSV output. Floats use Rust's shortest round-trip formatting, so equal
//! results give byte-identical files.

use std::io;
use std::path::{Path, PathBuf};

use shsm_core::tass::FlopsRow;

use crate::experiment::{CdfCurve, ResultRecord};

pub const HEADER: [&str; 9] = [
    "snr_db",
    "precoder",
    "tass",
    "mean_asr",
    "mean_sr_mc",
    "std_err",
    "n_draws",
    "n_failed",
    "wall_time_seconds",
];

pub const DRAWS_HEADER: [&str; 8] = ["snr_db", "precoder", "tass", "draw", "asr", "sr_mc", "std_err", "error"];

/// `out.csv` -> `out.<suffix>.csv`; any other name gets `.<suffix>.csv`
/// appended.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_suffix(".csv").unwrap_or(&name);
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

pub fn draws_path(path: &Path) -> PathBuf {
    sibling(path, "draws")
}

fn to_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// Writes the summary file and its `.draws.csv` sibling. Wall times are
/// written as zero unless `timing` is set.
pub fn write_records(path: &Path, records: &[ResultRecord], timing: bool) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    w.write_record(HEADER).map_err(to_io)?;
    for r in records {
        let wall = if timing { r.wall_time_seconds } else { 0.0 };
        w.write_record([
            r.snr_db.to_string(),
            r.precoder.name().to_string(),
            r.tass.name().to_string(),
            r.mean_asr.to_string(),
            r.mean_sr_mc.to_string(),
            r.std_err.to_string(),
            r.n_draws.to_string(),
            r.n_failed.to_string(),
            wall.to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush()?;

    let mut d = csv::Writer::from_path(draws_path(path)).map_err(to_io)?;
    d.write_record(DRAWS_HEADER).map_err(to_io)?;
    for r in records {
        for v in &r.draws {
            let (asr, sr, se, err) = match &v.outcome {
                Ok(m) => (m.asr.to_string(), m.sr_mc.to_string(), m.std_err.to_string(), String::new()),
                Err(e) => (String::new(), String::new(), String::new(), e.clone()),
            };
            d.write_record([
                r.snr_db.to_string(),
                r.precoder.name().to_string(),
                r.tass.name().to_string(),
                v.draw.to_string(),
                asr,
                sr,
                se,
                err,
            ])
            .map_err(to_io)?;
        }
    }
    d.flush()
}

/// Writes `grid,cdf` rows to the `.cdf.csv` sibling of `path`.
pub fn write_cdf(path: &Path, curve: &CdfCurve) -> io::Result<PathBuf> {
    let out = sibling(path, "cdf");
    let mut w = csv::Writer::from_path(&out).map_err(to_io)?;
    w.write_record(["sr", "cdf"]).map_err(to_io)?;
    for (x, f) in curve.grid.iter().zip(&curve.cdf) {
        w.write_record([x.to_string(), f.to_string()]).map_err(to_io)?;
    }
    w.flush()?;
    Ok(out)
}

pub fn write_flops(path: &Path, rows: &[FlopsRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    w.write_record(["method", "flops"]).map_err(to_io)?;
    for r in rows {
        w.write_record([r.method.clone(), r.flops.to_string()]).map_err(to_io)?;
    }
    w.flush()
}
