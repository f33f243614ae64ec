//! Line-delimited JSON trace file.
//!
//! ```text
//! {"format":"dinekit-trace","version":1,"meta":{...}}
//! {"timestep":0,...}
//! ...
//! {"end":{"records":N}}
//! ```
//!
//! The trailer makes truncation detectable. Numbers are written with the
//! shortest representation that parses back to the same `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Trace, TraceMeta, TraceRecord};
use crate::{Error, Result};

pub const TRACE_FORMAT: &str = "dinekit-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    meta: TraceMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Trailer {
    end: End,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct End {
    records: usize,
}

impl Trace {
    pub fn write_to<W: Write>(&self, records: &[TraceRecord], mut out: W) -> Result<()> {
        let header = Header {
            format: TRACE_FORMAT.into(),
            version: TRACE_VERSION,
            meta: self.meta.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        for r in records {
            writeln!(out, "{}", serde_json::to_string(r)?)?;
        }
        let trailer = Trailer {
            end: End {
                records: records.len(),
            },
        };
        writeln!(out, "{}", serde_json::to_string(&trailer)?)?;
        out.flush()?;
        Ok(())
    }

    pub fn export(&self, path: &Path) -> Result<()> {
        self.export_window(path, None, None)
    }

    pub fn export_window(&self, path: &Path, from: Option<u64>, to: Option<u64>) -> Result<()> {
        let records = self.window(from, to)?;
        self.write_to(records, BufWriter::new(File::create(path)?))
    }

    pub fn import(path: &Path) -> Result<Trace> {
        let file = File::open(path)?;
        Trace::read_from(BufReader::new(file), path)
    }

    /// `origin` only labels diagnostics.
    pub fn read_from<R: BufRead>(input: R, origin: &Path) -> Result<Trace> {
        let err = |line: usize, message: String| Error::TraceFile {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, first) = lines.next().ok_or_else(|| err(1, "empty file, missing header".into()))?;
        let first = first?;
        let probe: serde_json::Value =
            serde_json::from_str(&first).map_err(|e| err(1, format!("header: {e}")))?;
        if probe.get("format").and_then(|v| v.as_str()) != Some(TRACE_FORMAT) {
            return Err(err(1, format!("not a {TRACE_FORMAT} file")));
        }
        match probe.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(TRACE_VERSION) => {}
            Some(v) => {
                return Err(err(
                    1,
                    format!("unsupported schema version {v}, expected {TRACE_VERSION}"),
                ))
            }
            None => return Err(err(1, "header lacks a schema version".into())),
        }
        let header: Header =
            serde_json::from_str(&first).map_err(|e| err(1, format!("header: {e}")))?;
        let mut trace = Trace::new(header.meta).map_err(|e| err(1, e.to_string()))?;

        let mut last_line = 1;
        for (n, line) in lines {
            let line = line?;
            last_line = n;
            if line.starts_with("{\"end\"") {
                let trailer: Trailer =
                    serde_json::from_str(&line).map_err(|e| err(n, format!("trailer: {e}")))?;
                if trailer.end.records != trace.len() {
                    return Err(err(
                        n,
                        format!(
                            "trailer announces {} records, file holds {}",
                            trailer.end.records,
                            trace.len()
                        ),
                    ));
                }
                return Ok(trace);
            }
            let record: TraceRecord =
                serde_json::from_str(&line).map_err(|e| err(n, format!("record: {e}")))?;
            trace.append(record).map_err(|e| err(n, e.to_string()))?;
        }
        Err(err(
            last_line + 1,
            format!("truncated after {} records, trailer missing", trace.len()),
        ))
    }
}

#[cfg(test)]
mod tests {
    use std::io::Cursor;
    use std::path::PathBuf;

    use super::*;
    use crate::trace::tests::{meta, sample_trace};

    fn bytes(trace: &Trace) -> Vec<u8> {
        let mut buf = Vec::new();
        trace.write_to(trace.records(), &mut buf).unwrap();
        buf
    }

    fn read(buf: &[u8]) -> Result<Trace> {
        Trace::read_from(Cursor::new(buf), &PathBuf::from("mem"))
    }

    #[test]
    fn round_trip_is_identity() {
        let trace = sample_trace(25);
        let back = read(&bytes(&trace)).unwrap();
        assert_eq!(back, trace);
        assert_eq!(bytes(&back), bytes(&trace));
    }

    #[test]
    fn empty_trace_round_trips() {
        let trace = Trace::new(meta()).unwrap();
        assert_eq!(read(&bytes(&trace)).unwrap(), trace);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let trace = sample_trace(10);
        trace.export(&path).unwrap();
        assert_eq!(Trace::import(&path).unwrap(), trace);
        trace.export_window(&path, Some(3), Some(5)).unwrap();
        let part = Trace::import(&path).unwrap();
        assert_eq!(part.records(), trace.window(Some(3), Some(5)).unwrap());
    }

    #[test]
    fn truncation_is_reported_with_position() {
        let buf = bytes(&sample_trace(5));
        let text = String::from_utf8(buf).unwrap();
        let cut: Vec<&str> = text.lines().take(4).collect();
        let e = read(cut.join("\n").as_bytes()).unwrap_err();
        assert!(matches!(e, Error::TraceFile { line: 5, .. }), "{e}");
    }

    #[test]
    fn corrupted_record_is_reported_with_line() {
        let text = String::from_utf8(bytes(&sample_trace(5))).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[3] = lines[3].replacen("\"timestep\":2", "\"timestep\":\"two\"", 1);
        let e = read(lines.join("\n").as_bytes()).unwrap_err();
        assert!(matches!(e, Error::TraceFile { line: 4, .. }), "{e}");
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = String::from_utf8(bytes(&sample_trace(2))).unwrap();
        let bumped = text.replacen("\"version\":1", "\"version\":99", 1);
        let e = read(bumped.as_bytes()).unwrap_err();
        assert!(e.to_string().contains("version 99"), "{e}");
    }

    #[test]
    fn trailer_count_mismatch_is_rejected() {
        let text = String::from_utf8(bytes(&sample_trace(3))).unwrap();
        let bad = text.replace("{\"end\":{\"records\":3}}", "{\"end\":{\"records\":4}}");
        assert!(read(bad.as_bytes()).is_err());
    }
}
