//! Line-delimited JSON for series and event sequences.
//!
//! A file may start with a header line `{"format": ..., "version": 1}`;
//! every other non-blank line is one record. Parsing keeps going after a bad
//! line so the first [`MAX_REPORTED_VIOLATIONS`] problems are reported
//! together.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{EventSequence, IrregularSeries};
use crate::error::{GruweError, Result, Violation};
use crate::numerics::DenseMatrix;

pub const SERIES_FORMAT: &str = "gruwe-series";
pub const EVENTS_FORMAT: &str = "gruwe-events";
pub const JSONL_VERSION: u32 = 1;
pub const MAX_REPORTED_VIOLATIONS: usize = 10;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesRecord {
    times: Vec<f64>,
    values: Vec<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    times: Vec<f64>,
    types: Vec<usize>,
    t_max: f64,
}

struct Collector {
    violations: Vec<Violation>,
}

impl Collector {
    fn push(&mut self, line: usize, message: impl Into<String>) {
        if self.violations.len() < MAX_REPORTED_VIOLATIONS {
            self.violations.push(Violation {
                line,
                message: message.into(),
            });
        }
    }
}

/// Splits `text` into `(line number, record value)` pairs, consuming an
/// optional header of the expected format.
fn records<'t>(text: &'t str, format: &str, errs: &mut Collector) -> Vec<(usize, &'t str)> {
    let mut out = Vec::new();
    let mut seen_record = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let is_header = serde_json::from_str::<Value>(line)
            .ok()
            .and_then(|v| v.as_object().map(|o| o.contains_key("format")))
            .unwrap_or(false);
        if is_header {
            if seen_record {
                errs.push(line_no, "header line must come before any record");
                continue;
            }
            seen_record = true;
            match serde_json::from_str::<Header>(line) {
                Ok(h) if h.format != format => {
                    errs.push(line_no, format!("file format is {:?}, expected {format:?}", h.format))
                }
                Ok(h) if h.version != JSONL_VERSION => errs.push(
                    line_no,
                    format!("unsupported format version {} (expected {JSONL_VERSION})", h.version),
                ),
                Ok(_) => {}
                Err(e) => errs.push(line_no, format!("malformed header: {e}")),
            }
            continue;
        }
        seen_record = true;
        out.push((line_no, line));
    }
    out
}

fn finish<T>(path: &Path, items: Vec<T>, errs: Collector) -> Result<Vec<T>> {
    if errs.violations.is_empty() {
        Ok(items)
    } else {
        Err(GruweError::Records {
            path: path.to_path_buf(),
            violations: errs.violations,
        })
    }
}

fn series_from_record(rec: SeriesRecord, expected_dim: Option<usize>) -> std::result::Result<IrregularSeries, String> {
    let n = rec.times.len();
    if n == 0 {
        return Err("series has no observations".into());
    }
    if rec.values.len() != n {
        return Err(format!("{n} timestamps but {} value rows", rec.values.len()));
    }
    let dim = rec.values[0].len();
    if dim == 0 {
        return Err("value rows are empty".into());
    }
    if let Some(d) = expected_dim {
        if d != dim {
            return Err(format!("series has {dim} variables, earlier records have {d}"));
        }
    }
    if let Some(r) = rec.values.iter().position(|row| row.len() != dim) {
        return Err(format!("ragged values: row {r} has {} entries, expected {dim}", rec.values[r].len()));
    }
    let mask: Vec<Vec<f64>> = match rec.mask {
        Some(m) => {
            if m.len() != n {
                return Err(format!("{n} timestamps but {} mask rows", m.len()));
            }
            if let Some(r) = m.iter().position(|row| row.len() != dim) {
                return Err(format!("ragged mask: row {r} has {} entries, expected {dim}", m[r].len()));
            }
            m
        }
        None => vec![vec![1.0; dim]; n],
    };
    let mut flat_v = Vec::with_capacity(n * dim);
    let mut flat_m = Vec::with_capacity(n * dim);
    for r in 0..n {
        for c in 0..dim {
            let m = mask[r][c];
            if m != 0.0 && m != 1.0 {
                return Err(format!("mask entry [{r}][{c}] is {m}, expected 0 or 1"));
            }
            let v = match (rec.values[r][c], m == 1.0) {
                (Some(v), true) if v.is_finite() => v,
                (Some(v), true) => return Err(format!("observed value [{r}][{c}] is not finite ({v})")),
                (None, true) => return Err(format!("observed value [{r}][{c}] is null")),
                (_, false) => 0.0,
            };
            flat_v.push(v);
            flat_m.push(m);
        }
    }
    let values = DenseMatrix::checked(n, dim, flat_v).map_err(|e| e.to_string())?;
    let mask = DenseMatrix::checked(n, dim, flat_m).map_err(|e| e.to_string())?;
    IrregularSeries::new(rec.times, values, mask).map_err(|e| e.to_string())
}

pub fn parse_series_jsonl(text: &str, path: &Path) -> Result<Vec<IrregularSeries>> {
    let mut errs = Collector { violations: vec![] };
    let mut out = Vec::new();
    let mut dim = None;
    for (line_no, line) in records(text, SERIES_FORMAT, &mut errs) {
        let rec: SeriesRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                errs.push(line_no, e.to_string());
                continue;
            }
        };
        match series_from_record(rec, dim) {
            Ok(s) => {
                dim.get_or_insert(s.dim());
                out.push(s);
            }
            Err(msg) => errs.push(line_no, msg),
        }
    }
    finish(path, out, errs)
}

pub fn parse_events_jsonl(text: &str, path: &Path) -> Result<Vec<EventSequence>> {
    let mut errs = Collector { violations: vec![] };
    let mut out = Vec::new();
    for (line_no, line) in records(text, EVENTS_FORMAT, &mut errs) {
        match serde_json::from_str::<EventRecord>(line) {
            Ok(r) => match EventSequence::new(r.times, r.types, r.t_max) {
                Ok(s) => out.push(s),
                Err(e) => errs.push(line_no, e.to_string()),
            },
            Err(e) => errs.push(line_no, e.to_string()),
        }
    }
    finish(path, out, errs)
}

fn read(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| GruweError::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| GruweError::Records {
        path: path.to_path_buf(),
        violations: vec![Violation {
            line: 0,
            message: format!("file is not valid UTF-8: {e}"),
        }],
    })
}

pub fn load_series_jsonl(path: impl AsRef<Path>) -> Result<Vec<IrregularSeries>> {
    let path = path.as_ref();
    parse_series_jsonl(&read(path)?, path)
}

pub fn load_events_jsonl(path: impl AsRef<Path>) -> Result<Vec<EventSequence>> {
    let path = path.as_ref();
    parse_events_jsonl(&read(path)?, path)
}

fn write_lines<T: Serialize>(path: &Path, format: &str, records: impl Iterator<Item = T>) -> Result<()> {
    let mut buf = Vec::new();
    let header = Header {
        format: format.to_string(),
        version: JSONL_VERSION,
    };
    let to_io = |e: serde_json::Error| GruweError::Internal(format!("serializing record: {e}"));
    serde_json::to_writer(&mut buf, &header).map_err(to_io)?;
    buf.push(b'\n');
    for r in records {
        serde_json::to_writer(&mut buf, &r).map_err(to_io)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| GruweError::io(path, e))?;
    f.write_all(&buf).map_err(|e| GruweError::io(path, e))
}

pub fn write_series_jsonl(path: impl AsRef<Path>, series: &[IrregularSeries]) -> Result<()> {
    write_lines(
        path.as_ref(),
        SERIES_FORMAT,
        series.iter().map(|s| SeriesRecord {
            times: s.times().to_vec(),
            values: (0..s.len())
                .map(|r| s.values().row(r).iter().map(|&v| Some(v)).collect())
                .collect(),
            mask: Some((0..s.len()).map(|r| s.mask().row(r).to_vec()).collect()),
        }),
    )
}

pub fn write_events_jsonl(path: impl AsRef<Path>, seqs: &[EventSequence]) -> Result<()> {
    write_lines(
        path.as_ref(),
        EVENTS_FORMAT,
        seqs.iter().map(|s| EventRecord {
            times: s.times().to_vec(),
            types: s.types().to_vec(),
            t_max: s.t_max(),
        }),
    )
}
