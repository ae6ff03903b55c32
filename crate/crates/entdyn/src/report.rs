//! CSV output. Headers and column orders are frozen interface; numbers are
//! written with Rust's shortest round-trip float formatting, so parsing a
//! column back yields the exact f64 that was computed.
//!
//! Files are written to a temporary sibling and atomically renamed into
//! place: a failed run never leaves a partial CSV behind.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

pub const SIMULATE_HEADER: &str =
    "t,mean_C,se_C,var_C,mean_EoF,oracle_C,oracle_CA,bound_value,trace_dist";
pub const BOUNDS_HEADER: &str = "t,label,value";
pub const STUDY_HEADER: &str = "t,C0,exact,bound,ratio";
pub const ORACLE_HEADER: &str = "t,wootters_C,appC_C,appC_CA";
pub const HISTOGRAM_HEADER: &str = "t,bin,count";

/// One `simulate` output row. Columns without a defined value for the
/// scenario (e.g. no closed-form oracle) carry NaN.
#[derive(Debug, Clone, Copy)]
pub struct SimulateRow {
    pub t: f64,
    pub mean_c: f64,
    pub se_c: f64,
    pub var_c: f64,
    pub mean_eof: f64,
    pub oracle_c: f64,
    pub oracle_ca: f64,
    pub bound_value: f64,
    pub trace_dist: f64,
}

#[derive(Debug, Clone)]
pub struct BoundsRow {
    pub t: f64,
    pub label: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleRow {
    pub t: f64,
    pub wootters_c: f64,
    pub app_c_c: f64,
    pub app_c_ca: f64,
}

fn render<T>(header: &str, rows: &[T], mut line: impl FnMut(&T, &mut String)) -> String {
    let mut out = String::with_capacity(rows.len() * 64 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        line(row, &mut out);
        out.push('\n');
    }
    out
}

pub fn render_simulate(rows: &[SimulateRow]) -> String {
    render(SIMULATE_HEADER, rows, |r, out| {
        write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            r.mean_c,
            r.se_c,
            r.var_c,
            r.mean_eof,
            r.oracle_c,
            r.oracle_ca,
            r.bound_value,
            r.trace_dist
        )
        .unwrap();
    })
}

pub fn render_bounds(rows: &[BoundsRow]) -> String {
    render(BOUNDS_HEADER, rows, |r, out| {
        write!(out, "{},{},{}", r.t, r.label, r.value).unwrap();
    })
}

pub fn render_study(rows: &[crate::ensemble::StudyRow]) -> String {
    render(STUDY_HEADER, rows, |r, out| {
        write!(out, "{},{},{},{},{}", r.t, r.c0, r.exact, r.bound, r.ratio).unwrap();
    })
}

pub fn render_oracle(rows: &[OracleRow]) -> String {
    render(ORACLE_HEADER, rows, |r, out| {
        write!(out, "{},{},{},{}", r.t, r.wootters_c, r.app_c_c, r.app_c_ca).unwrap();
    })
}

/// Per-checkpoint concurrence histograms, one row per (time, bin).
pub fn render_histogram(checkpoints: &[(f64, &[u64])]) -> String {
    let mut out = String::from(HISTOGRAM_HEADER);
    out.push('\n');
    for (t, bins) in checkpoints {
        for (bin, count) in bins.iter().enumerate() {
            writeln!(out, "{t},{bin},{count}").unwrap();
        }
    }
    out
}

/// Write `content` to `path` via a temporary file in the same directory
/// and an atomic rename.
pub fn write_atomic(path: &Path, content: &str) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let mut tmp = file_name.to_os_string();
    tmp.push(".tmp");
    let tmp_path = match dir {
        Some(d) => d.join(&tmp),
        None => tmp.into(),
    };
    std::fs::write(&tmp_path, content)?;
    match std::fs::rename(&tmp_path, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp_path);
            Err(e)
        }
    }
}
