//! Click-stream and histogram files.
//!
//! Clicks are CSV (`detector,timestamp_seconds`) or NDJSON (one
//! `{"detector":..,"timestamp":..}` object per line). Histograms are CSV
//! (`pair,m,count`). Lines starting with `#` are comments in every CSV.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{ClickEvent, CoincidenceHistogram, Detector, SimError};
use crate::outcome::{Channel, DetectionOutcome};

fn csv_reader<R: std::io::Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader)
}

fn parse_err(e: impl std::fmt::Display) -> SimError {
    SimError::Parse(e.to_string())
}

fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<(), SimError> {
    if headers.iter().ne(expected.iter().copied()) {
        return Err(SimError::Parse(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

pub fn write_clicks_csv<W: Write>(mut out: W, clicks: &[ClickEvent]) -> Result<(), SimError> {
    writeln!(out, "detector,timestamp_seconds")?;
    for c in clicks {
        writeln!(out, "{},{:e}", c.detector, c.timestamp)?;
    }
    Ok(())
}

pub fn read_clicks_csv<R: std::io::Read>(reader: R) -> Result<Vec<ClickEvent>, SimError> {
    let mut rdr = csv_reader(reader);
    check_header(rdr.headers().map_err(parse_err)?, &["detector", "timestamp_seconds"])?;
    let mut clicks = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(parse_err)?;
        let at = |what: String| SimError::Parse(format!("record {}: {what}", line + 1));
        if record.len() != 2 {
            return Err(at(format!("expected 2 fields, found {}", record.len())));
        }
        let detector: Detector = record[0].parse().map_err(at)?;
        let timestamp: f64 = record[1].parse().map_err(|e| at(format!("timestamp: {e}")))?;
        if !timestamp.is_finite() {
            return Err(at(format!("non-finite timestamp {timestamp}")));
        }
        clicks.push(ClickEvent { detector, timestamp });
    }
    Ok(clicks)
}

pub fn write_clicks_ndjson<W: Write>(mut out: W, clicks: &[ClickEvent]) -> Result<(), SimError> {
    for c in clicks {
        serde_json::to_writer(&mut out, c).map_err(parse_err)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_clicks_ndjson<R: BufRead>(reader: R) -> Result<Vec<ClickEvent>, SimError> {
    let mut clicks = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let c: ClickEvent =
            serde_json::from_str(&line).map_err(|e| SimError::Parse(format!("line {}: {e}", n + 1)))?;
        clicks.push(c);
    }
    Ok(clicks)
}

pub fn write_histogram_csv<W: Write>(mut out: W, hist: &CoincidenceHistogram) -> Result<(), SimError> {
    writeln!(out, "pair,m,count")?;
    for (o, count) in &hist.bins {
        writeln!(out, "{},{},{}", o.channel.detector_pair(), o.offset_m, count)?;
    }
    Ok(())
}

/// Reads bins written by [`write_histogram_csv`]. Repeated rows are summed.
pub fn read_histogram_csv<R: std::io::Read>(reader: R) -> Result<BTreeMap<DetectionOutcome, u64>, SimError> {
    let mut rdr = csv_reader(reader);
    check_header(rdr.headers().map_err(parse_err)?, &["pair", "m", "count"])?;
    let mut bins = BTreeMap::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(parse_err)?;
        let at = |what: String| SimError::Parse(format!("record {}: {what}", line + 1));
        if record.len() != 3 {
            return Err(at(format!("expected 3 fields, found {}", record.len())));
        }
        let channel = Channel::from_detector_pair(&record[0])
            .ok_or_else(|| at(format!("unknown detector pair `{}`", &record[0])))?;
        let m: i64 = record[1].parse().map_err(|e| at(format!("m: {e}")))?;
        let count: u64 = record[2].parse().map_err(|e| at(format!("count: {e}")))?;
        *bins.entry(DetectionOutcome::new(channel, m)).or_insert(0) += count;
    }
    Ok(bins)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<ClickEvent> {
        vec![
            ClickEvent { detector: Detector::L1, timestamp: 0.0 },
            ClickEvent { detector: Detector::R2, timestamp: 1.234_567_890_123e-7 },
            ClickEvent { detector: Detector::L2, timestamp: 3.0e-3 },
        ]
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut buf = Vec::new();
        write_clicks_csv(&mut buf, &sample()).unwrap();
        assert_eq!(read_clicks_csv(buf.as_slice()).unwrap(), sample());
    }

    #[test]
    fn ndjson_round_trip() {
        let mut buf = Vec::new();
        write_clicks_ndjson(&mut buf, &sample()).unwrap();
        assert_eq!(read_clicks_ndjson(buf.as_slice()).unwrap(), sample());
    }

    #[test]
    fn csv_comments_and_errors() {
        let text = "# run 1\ndetector,timestamp_seconds\nL1,1e-9\n";
        assert_eq!(read_clicks_csv(text.as_bytes()).unwrap().len(), 1);
        assert!(read_clicks_csv("det,t\nL1,0\n".as_bytes()).is_err());
        assert!(read_clicks_csv("detector,timestamp_seconds\nX9,0\n".as_bytes()).is_err());
        assert!(read_clicks_csv("detector,timestamp_seconds\nL1,inf\n".as_bytes()).is_err());
    }

    #[test]
    fn histogram_round_trip() {
        let mut bins = BTreeMap::new();
        bins.insert(DetectionOutcome::new(Channel::TT, 0), 10);
        bins.insert(DetectionOutcome::new(Channel::TR, -2), 3);
        let hist = CoincidenceHistogram {
            bin_width: 1e-9,
            bins: bins.clone(),
            total_pairs_emitted: 13,
            unmatched_left: 0,
            unmatched_right: 0,
        };
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &hist).unwrap();
        assert_eq!(read_histogram_csv(buf.as_slice()).unwrap(), bins);
    }
}
