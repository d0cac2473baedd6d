//! Long-format curve data from traces, for external plotting.
//!
//! Each trace contributes `2 axes × 2 metrics × rows` lines of
//! `method,axis,x,metric,y`. Curves show the best value reached so far:
//! running minimum of RLNE and running maximum of PSNR.

use std::fs;
use std::path::{Path, PathBuf};

use crate::data::read_json;
use crate::error::{CliError, Result};
use crate::methods::TraceRow;
use crate::trace::{fmt_f64, read_trace};

/// A trace argument: `name=path`, or a bare path whose method is read from
/// the neighbouring `summary.json` (falling back to the file stem).
pub fn parse_trace_arg(arg: &str) -> (String, PathBuf) {
    if let Some((name, path)) = arg.split_once('=') {
        if !name.is_empty() && !name.contains(['/', '\\']) {
            return (name.to_string(), PathBuf::from(path));
        }
    }
    let path = PathBuf::from(arg);
    let from_summary = path
        .parent()
        .map(|d| d.join("summary.json"))
        .filter(|p| p.exists())
        .and_then(|p| read_json(&p).ok())
        .and_then(|v| v["method"].as_str().map(str::to_string));
    let name = from_summary.unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "trace".into())
    });
    (name, path)
}

/// Long-format rows for one method's trace.
pub fn curve_rows(method: &str, rows: &[TraceRow]) -> Vec<String> {
    let mut out = Vec::with_capacity(4 * rows.len());
    for axis in ["time", "iteration"] {
        for metric in ["psnr", "rlne"] {
            let mut best: Option<f64> = None;
            for r in rows {
                let x = if axis == "time" { r.time_s } else { r.k as f64 };
                let v = if metric == "psnr" { r.psnr } else { r.rlne };
                if let Some(v) = v {
                    best = Some(match best {
                        None => v,
                        Some(b) if metric == "psnr" => b.max(v),
                        Some(b) => b.min(v),
                    });
                }
                let y = best.map(fmt_f64).unwrap_or_default();
                out.push(format!("{method},{axis},{},{metric},{y}", fmt_f64(x)));
            }
        }
    }
    out
}

/// Merges traces into `output`. Nothing is written if any trace is empty or
/// malformed.
pub fn curves(traces: &[(String, PathBuf)], output: &Path) -> Result<usize> {
    if traces.is_empty() {
        return Err(CliError::usage("no traces given"));
    }
    let mut text = String::from("method,axis,x,metric,y\n");
    let mut count = 0;
    for (name, path) in traces {
        let rows = read_trace(path)?;
        if rows.is_empty() {
            return Err(CliError::io(path, "trace has no rows"));
        }
        for line in curve_rows(name, &rows) {
            text.push_str(&line);
            text.push('\n');
            count += 1;
        }
    }
    fs::write(output, text).map_err(|e| CliError::io(output, e))?;
    Ok(count)
}
