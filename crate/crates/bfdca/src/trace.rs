//! Trace CSV files: one row per outer iteration or per trial.

use std::path::Path;

use crate::error::{CliError, Result};
use crate::methods::TraceRow;

pub const HEADER: [&str; 11] = [
    "k_or_trial",
    "time_s",
    "rlne",
    "psnr",
    "val_err",
    "eta",
    "delta",
    "alpha",
    "rho",
    "lambda1_or_r1",
    "lambda2_or_r2",
];

/// Shortest round-trip decimal form; `inf` for infinities.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(HEADER).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        let rec = [
            r.k.to_string(),
            fmt_f64(r.time_s),
            opt(r.rlne),
            opt(r.psnr),
            fmt_f64(r.val_err),
            opt(r.eta),
            opt(r.delta),
            opt(r.alpha),
            opt(r.rho),
            fmt_f64(r.param[0]),
            fmt_f64(r.param[1]),
        ];
        w.write_record(&rec).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header = r.headers().map_err(|e| CliError::io(path, e))?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(CliError::io(path, "not a trace file (unexpected header)"));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let bad = |field: &str| CliError::io(path, format!("row {}: malformed `{field}`", line + 1));
        let num = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| bad(HEADER[i])) };
        let opt = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        rows.push(TraceRow {
            k: rec[0].parse().map_err(|_| bad(HEADER[0]))?,
            time_s: num(1)?,
            rlne: opt(2)?,
            psnr: opt(3)?,
            val_err: num(4)?,
            eta: opt(5)?,
            delta: opt(6)?,
            alpha: opt(7)?,
            rho: opt(8)?,
            param: [num(9)?, num(10)?],
        });
    }
    Ok(rows)
}
