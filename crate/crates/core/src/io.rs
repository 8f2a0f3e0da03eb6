//! Text file formats: event streams, series CSVs, labels, and score records.

use crate::detect::{AnomalyScore, Stage};
use crate::error::{Error, Result};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// One raw monitoring event: `metric_id, timestamp, value`. Timestamps are
/// integer epoch seconds or RFC3339.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub metric_id: String,
    pub timestamp: i64,
    pub value: f64,
}

fn parse_timestamp(s: &str, line: usize) -> Result<i64> {
    if let Ok(t) = s.parse::<i64>() {
        return Ok(t);
    }
    chrono::DateTime::parse_from_rfc3339(s)
        .map(|dt| dt.timestamp())
        .map_err(|_| parse_err(line, format!("bad timestamp `{s}`")))
}

pub fn read_events<R: Read>(reader: R) -> Result<Vec<EventRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = t.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(parse_err(lineno, "expected `metric_id, timestamp, value`"));
        }
        let timestamp = parse_timestamp(parts[1], lineno)?;
        let value: f64 = parts[2]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad value `{}`", parts[2])))?;
        out.push(EventRecord {
            metric_id: parts[0].to_string(),
            timestamp,
            value,
        });
    }
    Ok(out)
}

pub fn read_events_path(path: &Path) -> Result<Vec<EventRecord>> {
    read_events(fs::File::open(path)?)
}

pub fn write_events<W: Write>(mut w: W, events: &[EventRecord]) -> Result<()> {
    for e in events {
        writeln!(w, "{},{},{}", e.metric_id, e.timestamp, e.value)?;
    }
    Ok(())
}

/// A parsed series file: scalar rows (`timestamp,value`) or pre-computed
/// quantile vectors (`timestamp,q1..qK`).
#[derive(Debug, Clone, PartialEq)]
pub enum SeriesData {
    Scalar(Vec<(i64, f64)>),
    Quantile {
        points: usize,
        rows: Vec<(i64, Vec<f64>)>,
    },
}

pub fn read_series<R: Read>(reader: R) -> Result<SeriesData> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let header = loop {
        match lines.next() {
            None => return Err(parse_err(0, "empty series file")),
            Some((i, line)) => {
                let line = line?;
                let t = line.trim().to_string();
                if !t.is_empty() && !t.starts_with('#') {
                    break (i + 1, t);
                }
            }
        }
    };
    let cols: Vec<&str> = header.1.split(',').map(str::trim).collect();
    if cols.first() != Some(&"timestamp") {
        return Err(parse_err(header.0, "series header must start with `timestamp`"));
    }
    let scalar = cols.len() == 2 && cols[1] == "value";
    if !scalar {
        for (k, c) in cols[1..].iter().enumerate() {
            if *c != format!("q{}", k + 1) {
                return Err(parse_err(
                    header.0,
                    "series header must be `timestamp,value` or `timestamp,q1..qK`",
                ));
            }
        }
    }
    let width = cols.len() - 1;
    let mut scalar_rows = Vec::new();
    let mut quantile_rows = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = t.split(',').map(str::trim).collect();
        if parts.len() != width + 1 {
            return Err(parse_err(
                lineno,
                format!("expected {} columns, found {}", width + 1, parts.len()),
            ));
        }
        let ts = parse_timestamp(parts[0], lineno)?;
        if scalar {
            let v: f64 = parts[1]
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad value `{}`", parts[1])))?;
            scalar_rows.push((ts, v));
        } else {
            let vals = parts[1..]
                .iter()
                .map(|p| {
                    p.parse::<f64>()
                        .map_err(|_| parse_err(lineno, format!("bad quantile `{p}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            quantile_rows.push((ts, vals));
        }
    }
    if scalar {
        Ok(SeriesData::Scalar(scalar_rows))
    } else {
        Ok(SeriesData::Quantile {
            points: width,
            rows: quantile_rows,
        })
    }
}

pub fn read_series_path(path: &Path) -> Result<SeriesData> {
    read_series(fs::File::open(path)?)
}

pub fn write_scalar_series<W: Write>(mut w: W, rows: &[(i64, f64)]) -> Result<()> {
    writeln!(w, "timestamp,value")?;
    for (ts, v) in rows {
        writeln!(w, "{ts},{v}")?;
    }
    Ok(())
}

pub fn write_quantile_series<W: Write>(mut w: W, points: usize, rows: &[(i64, Vec<f64>)]) -> Result<()> {
    let mut header = String::from("timestamp");
    for k in 1..=points {
        header.push_str(&format!(",q{k}"));
    }
    writeln!(w, "{header}")?;
    for (ts, vals) in rows {
        if vals.len() != points {
            return Err(Error::invalid("quantile row width mismatch"));
        }
        let mut line = ts.to_string();
        for v in vals {
            line.push(',');
            line.push_str(&format!("{v}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Ground-truth labels: `interval_index,label` with label in
/// {normal, malfunction}.
pub fn write_labels<W: Write>(mut w: W, labels: &[bool]) -> Result<()> {
    writeln!(w, "interval_index,label")?;
    for (t, l) in labels.iter().enumerate() {
        writeln!(w, "{t},{}", if *l { "malfunction" } else { "normal" })?;
    }
    Ok(())
}

pub fn read_labels<R: Read>(reader: R) -> Result<Vec<(u64, bool)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("interval_index") {
            continue;
        }
        let parts: Vec<&str> = t.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(parse_err(lineno, "expected `interval_index,label`"));
        }
        let idx: u64 = parts[0]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad interval index `{}`", parts[0])))?;
        let label = match parts[1] {
            "normal" => false,
            "malfunction" => true,
            other => return Err(parse_err(lineno, format!("bad label `{other}`"))),
        };
        out.push((idx, label));
    }
    Ok(out)
}

pub fn read_labels_path(path: &Path) -> Result<Vec<(u64, bool)>> {
    read_labels(fs::File::open(path)?)
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Point => "point",
            Stage::Window => "window",
            Stage::Combined => "combined",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        match s {
            "point" => Some(Stage::Point),
            "window" => Some(Stage::Window),
            "combined" => Some(Stage::Combined),
            _ => None,
        }
    }
}

/// One score line: `metric_id, interval_index, stage, log_p, flagged`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub metric_id: String,
    pub interval_index: u64,
    pub stage: Stage,
    pub log_p: f64,
    pub flagged: bool,
}

/// Expand an emitted score into file records. Stage records are written for
/// each stage that fired here; a combined record is written whenever the
/// emission carries a complete interval decision (both stages at a window
/// close, or the sole stage of single-stage modes).
pub fn score_to_records(metric_id: &str, score: &AnomalyScore, emit_combined: bool) -> Vec<ScoreRecord> {
    let mut out = Vec::new();
    if let Some(p) = score.point {
        out.push(ScoreRecord {
            metric_id: metric_id.to_string(),
            interval_index: score.interval_index,
            stage: Stage::Point,
            log_p: p.log_p,
            flagged: p.flagged,
        });
    }
    if let Some(w) = score.window {
        out.push(ScoreRecord {
            metric_id: metric_id.to_string(),
            interval_index: score.interval_index,
            stage: Stage::Window,
            log_p: w.log_p,
            flagged: w.flagged,
        });
    }
    if emit_combined {
        out.push(ScoreRecord {
            metric_id: metric_id.to_string(),
            interval_index: score.interval_index,
            stage: Stage::Combined,
            log_p: score.combined,
            flagged: score.is_anomaly,
        });
    }
    out
}

pub fn write_scores<W: Write>(mut w: W, records: &[ScoreRecord]) -> Result<()> {
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.metric_id,
            r.interval_index,
            r.stage.as_str(),
            r.log_p,
            r.flagged
        )?;
    }
    Ok(())
}

pub fn read_scores<R: Read>(reader: R) -> Result<Vec<ScoreRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = t.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(parse_err(
                lineno,
                "expected `metric_id,interval_index,stage,log_p,flagged`",
            ));
        }
        let stage = Stage::parse(parts[2])
            .ok_or_else(|| parse_err(lineno, format!("bad stage `{}`", parts[2])))?;
        out.push(ScoreRecord {
            metric_id: parts[0].to_string(),
            interval_index: parts[1]
                .parse()
                .map_err(|_| parse_err(lineno, "bad interval index"))?,
            stage,
            log_p: parts[3]
                .parse()
                .map_err(|_| parse_err(lineno, "bad log_p"))?,
            flagged: match parts[4] {
                "true" => true,
                "false" => false,
                other => return Err(parse_err(lineno, format!("bad flag `{other}`"))),
            },
        });
    }
    Ok(out)
}

pub fn read_scores_path(path: &Path) -> Result<Vec<ScoreRecord>> {
    read_scores(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_roundtrip_and_rfc3339() {
        let text = "cpu, 1700000000, 0.5\nlat,2023-11-14T22:13:20Z,1.25\n\n# comment\n";
        let events = read_events(text.as_bytes()).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].metric_id, "cpu");
        assert_eq!(events[0].timestamp, 1_700_000_000);
        assert_eq!(events[1].timestamp, 1_700_000_000);
        assert_eq!(events[1].value, 1.25);

        let mut buf = Vec::new();
        write_events(&mut buf, &events).unwrap();
        let back = read_events(buf.as_slice()).unwrap();
        assert_eq!(events, back);
    }

    #[test]
    fn events_errors_carry_line_numbers() {
        let text = "cpu,1,0.5\ncpu,notatime,1.0\n";
        match read_events(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn scalar_series_roundtrip() {
        let rows = vec![(0i64, 1.5), (3600, -2.25), (7200, 0.0)];
        let mut buf = Vec::new();
        write_scalar_series(&mut buf, &rows).unwrap();
        match read_series(buf.as_slice()).unwrap() {
            SeriesData::Scalar(back) => assert_eq!(rows, back),
            other => panic!("expected scalar series, got {other:?}"),
        }
    }

    #[test]
    fn quantile_series_roundtrip() {
        let rows = vec![
            (0i64, vec![0.1, 0.2, 0.3]),
            (3600, vec![-1.0, 0.0, 1.0]),
        ];
        let mut buf = Vec::new();
        write_quantile_series(&mut buf, 3, &rows).unwrap();
        match read_series(buf.as_slice()).unwrap() {
            SeriesData::Quantile { points, rows: back } => {
                assert_eq!(points, 3);
                assert_eq!(rows, back);
            }
            other => panic!("expected quantile series, got {other:?}"),
        }
    }

    #[test]
    fn series_header_validation() {
        assert!(read_series("time,value\n1,2\n".as_bytes()).is_err());
        assert!(read_series("timestamp,q1,q3\n1,2,3\n".as_bytes()).is_err());
        assert!(read_series("".as_bytes()).is_err());
    }

    #[test]
    fn labels_roundtrip() {
        let labels = vec![false, true, false];
        let mut buf = Vec::new();
        write_labels(&mut buf, &labels).unwrap();
        let back = read_labels(buf.as_slice()).unwrap();
        assert_eq!(back, vec![(0, false), (1, true), (2, false)]);
    }

    #[test]
    fn scores_roundtrip_exact_floats() {
        let records = vec![
            ScoreRecord {
                metric_id: "m".into(),
                interval_index: 1501,
                stage: Stage::Window,
                log_p: -6.908754778648553,
                flagged: true,
            },
            ScoreRecord {
                metric_id: "m".into(),
                interval_index: 1501,
                stage: Stage::Combined,
                log_p: -0.1234567890123456789,
                flagged: false,
            },
        ];
        let mut buf = Vec::new();
        write_scores(&mut buf, &records).unwrap();
        let back = read_scores(buf.as_slice()).unwrap();
        assert_eq!(records, back);
        // Float round-trip must be bit exact.
        assert_eq!(back[0].log_p.to_bits(), records[0].log_p.to_bits());
    }
}
