//! CSV trace: one row per path per sample tick.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::analytics::TraceSample;
use crate::error::RunError;

pub const TRACE_HEADER: [&str; 6] = ["t_s", "path_id", "up", "throughput_mbps", "active", "redundant_mbps"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_s: f64,
    pub path_id: String,
    pub up: u8,
    pub throughput_mbps: f64,
    pub active: u8,
    pub redundant_mbps: f64,
}

pub trait TraceSink {
    fn write_sample(&mut self, sample: &TraceSample) -> Result<(), RunError>;

    fn finish(&mut self) -> Result<(), RunError> {
        Ok(())
    }
}

/// Discards samples.
#[derive(Debug, Default)]
pub struct NullSink;

impl TraceSink for NullSink {
    fn write_sample(&mut self, _: &TraceSample) -> Result<(), RunError> {
        Ok(())
    }
}

/// Keeps every sample in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub samples: Vec<TraceSample>,
}

impl TraceSink for MemorySink {
    fn write_sample(&mut self, sample: &TraceSample) -> Result<(), RunError> {
        self.samples.push(sample.clone());
        Ok(())
    }
}

pub struct CsvTraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CsvTraceWriter<W> {
    pub fn new(out: W) -> Result<Self, RunError> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(TRACE_HEADER)?;
        Ok(Self { inner })
    }

    pub fn into_inner(self) -> Result<W, RunError> {
        self.inner.into_inner().map_err(|e| RunError::Trace(csv::Error::from(e.into_error())))
    }
}

impl<W: Write> TraceSink for CsvTraceWriter<W> {
    fn write_sample(&mut self, s: &TraceSample) -> Result<(), RunError> {
        let t = format!("{:.6}", s.t.as_secs_f64());
        for p in &s.paths {
            self.inner.write_record([
                t.as_str(),
                p.path_id.as_str(),
                if p.up { "1" } else { "0" },
                &format!("{:.6}", p.throughput_mbps),
                if p.active { "1" } else { "0" },
                &format!("{:.6}", p.redundant_mbps),
            ])?;
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<(), RunError> {
        self.inner.flush().map_err(|e| RunError::Trace(e.into()))
    }
}

/// Renders samples to the CSV text a [`CsvTraceWriter`] would produce.
pub fn render_csv(samples: &[TraceSample]) -> String {
    let mut w = CsvTraceWriter::new(Vec::new()).expect("in-memory write");
    for s in samples {
        w.write_sample(s).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii")
}

/// Parses a trace, checking the header and value ranges.
pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, csv::Error> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(bad_data(format!("unexpected trace header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let row: TraceRow = rec?;
        let finite = [row.t_s, row.throughput_mbps, row.redundant_mbps].iter().all(|v| v.is_finite() && *v >= 0.0);
        if !finite || row.up > 1 || row.active > 1 {
            return Err(bad_data(format!("row {} out of range", rows.len() + 1)));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn bad_data(msg: String) -> csv::Error {
    csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, msg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::PathSample;
    use crate::sim::SimTime;

    fn sample() -> TraceSample {
        TraceSample {
            t: SimTime::from_millis(1500),
            paths: vec![
                PathSample {
                    path_id: "lte".into(),
                    up: true,
                    active: true,
                    useful_bytes: 3_000,
                    redundant_bytes: 0,
                    throughput_mbps: 0.048,
                    redundant_mbps: 0.0,
                },
                PathSample {
                    path_id: "wifi".into(),
                    up: false,
                    active: false,
                    useful_bytes: 0,
                    redundant_bytes: 1_500,
                    throughput_mbps: 0.0,
                    redundant_mbps: 0.024,
                },
            ],
        }
    }

    #[test]
    fn writes_fixed_format() {
        let text = render_csv(&[sample()]);
        assert_eq!(
            text,
            "t_s,path_id,up,throughput_mbps,active,redundant_mbps\n\
             1.500000,lte,1,0.048000,1,0.000000\n\
             1.500000,wifi,0,0.000000,0,0.024000\n"
        );
    }

    #[test]
    fn round_trips_through_reader() {
        let rows = read_trace(render_csv(&[sample()]).as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].path_id, "wifi");
        assert_eq!(rows[1].redundant_mbps, 0.024);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_trace("a,b\n1,2\n".as_bytes()).is_err());
        let bad = "t_s,path_id,up,throughput_mbps,active,redundant_mbps\n0.5,x,2,0,0,0\n";
        assert!(read_trace(bad.as_bytes()).is_err());
        let neg = "t_s,path_id,up,throughput_mbps,active,redundant_mbps\n0.5,x,1,-1,0,0\n";
        assert!(read_trace(neg.as_bytes()).is_err());
    }
}
