//! CSV trace rows and telemetry files.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anomaly::Verdict;
use crate::error::{Error, Result};

/// One row of the standard trace. Quantities a scenario does not simulate
/// are left empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TraceRow {
    pub time_s: f64,
    pub f_cmd: Option<f64>,
    pub f_true: Option<f64>,
    pub f_obs: Option<f64>,
    pub c1_true: Option<f64>,
    pub c2_true: Option<f64>,
    pub c2_obs: Option<f64>,
    pub c1_est: Option<f64>,
    pub f_limit: Option<f64>,
    pub dl: Option<f64>,
    pub g: Option<f64>,
    pub verdict: Option<Verdict>,
}

pub const TRACE_HEADER: [&str; 12] = [
    "time_s", "f_cmd", "f_true", "f_obs", "c1_true", "c2_true", "c2_obs", "c1_est", "f_limit", "dl", "g", "verdict",
];

/// Serializes any slice of serde rows as CSV with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn trace_csv(rows: &[TraceRow]) -> Result<Vec<u8>> {
    if rows.is_empty() {
        let mut out = TRACE_HEADER.join(",").into_bytes();
        out.push(b'\n');
        return Ok(out);
    }
    to_csv(rows)
}

/// One telemetry sample: time (s), housing temperature (°C), tension (N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub t: f64,
    pub c2: f64,
    pub f: f64,
}

pub fn write_telemetry<W: Write>(out: W, records: &[TelemetryRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["t", "c2", "f"])?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a telemetry CSV (`t,c2,f` header). `origin` names the source in
/// error messages.
pub fn read_telemetry<R: Read>(input: R, origin: &Path) -> Result<Vec<TelemetryRecord>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = Vec::new();
    let mut header_seen = false;
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 1;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let line = rec.position().map_or(line, |p| p.line() as usize);
        if !header_seen {
            let fields: Vec<&str> = rec.iter().collect();
            if fields != ["t", "c2", "f"] {
                return Err(parse_err(
                    line,
                    format!("expected header `t,c2,f`, got `{}`", fields.join(",")),
                ));
            }
            header_seen = true;
            continue;
        }
        if rec.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, got {}", rec.len())));
        }
        let field = |i: usize, name: &str| -> Result<f64> {
            let v: f64 = rec[i]
                .parse()
                .map_err(|_| parse_err(line, format!("{name} is not a number: `{}`", &rec[i])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("{name} is not finite")));
            }
            Ok(v)
        };
        let r = TelemetryRecord {
            t: field(0, "t")?,
            c2: field(1, "c2")?,
            f: field(2, "f")?,
        };
        if let Some(prev) = records.last().map(|p: &TelemetryRecord| p.t) {
            if !(r.t > prev) {
                return Err(parse_err(
                    line,
                    format!("timestamp {} does not increase (previous {prev})", r.t),
                ));
            }
        }
        records.push(r);
    }
    if !header_seen {
        return Err(parse_err(1, "empty telemetry file".into()));
    }
    if records.is_empty() {
        return Err(parse_err(2, "telemetry file has no records".into()));
    }
    Ok(records)
}

pub fn read_telemetry_file(path: &Path) -> Result<Vec<TelemetryRecord>> {
    let file = std::fs::File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    read_telemetry(std::io::BufReader::new(file), path)
}
