//! Report assembly and file output: a JSON document with a schema-version
//! field, CSV tables with fixed per-mode columns, and atomic writes.
//!
//! Rationals are carried as numerator/denominator string pairs so nothing is
//! rounded; floats are written in shortest round-trip form in both encodings.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use num::BigRational;
use serde::Serialize;
use time::format_description::FormatItem;
use time::macros::format_description;
use time::OffsetDateTime;

pub const SCHEMA_VERSION: &str = "1";

/// Numerator/denominator pair, stringly to keep arbitrary precision intact.
#[derive(Serialize, Clone)]
pub struct RatParts {
    pub num: String,
    pub den: String,
}

pub fn rat_parts(r: &BigRational) -> RatParts {
    RatParts {
        num: r.numer().to_string(),
        den: r.denom().to_string(),
    }
}

/// CSV cell for an exact rational.
pub fn rat_cell(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Shortest round-trip decimal for a float, identical in CSV and JSON use.
pub fn f64_cell(v: f64) -> String {
    let mut s = serde_json::to_string(&v).expect("finite float");
    if s == "null" {
        s = "nan".into();
    }
    s
}

pub fn opt_f64_cell(v: Option<f64>) -> String {
    v.map(f64_cell).unwrap_or_default()
}

#[derive(Serialize)]
pub struct RunReport<C: Serialize> {
    pub schema_version: &'static str,
    pub config: C,
    pub verdict: &'static str,
    pub wall_s: f64,
    pub peak_mem_bytes_estimate: u64,
    pub results: serde_json::Value,
}

/// Second-resolution UTC stamp for filenames.
pub fn utc_stamp() -> String {
    const FMT: &[FormatItem<'_>] =
        format_description!("[year][month][day]T[hour][minute][second]Z");
    OffsetDateTime::now_utc()
        .format(FMT)
        .expect("utc formatting")
}

/// Write-temp-then-rename so partial files never land under the final name.
pub fn write_atomic(path: &Path, content: &str) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// `<dir>/<stem>[-<timestamp>].<ext>`
pub fn output_path(dir: &Path, stem: &str, stamp: Option<&str>, ext: &str) -> PathBuf {
    match stamp {
        Some(ts) => dir.join(format!("{stem}-{ts}.{ext}")),
        None => dir.join(format!("{stem}.{ext}")),
    }
}

/// Assemble a CSV document from a header row and preformatted lines.
pub fn csv_document(header: &str, rows: &[String]) -> String {
    let mut out = String::with_capacity(header.len() + rows.iter().map(|r| r.len() + 1).sum::<usize>() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    out
}
