//! Telecom Italia call-data-record ingestion.
//!
//! Raw files hold one tab-separated record per line:
//! `grid, timestamp_ms, country_code, sms_in, sms_out, call_in, call_out, internet`.
//! Empty fields are missing values and become `0.0`. Several records may share
//! a grid and slot (one per country code); they are summed into a single
//! activity value per 10-minute slot.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numfmt::sig17;

/// Length of one aggregation slot in milliseconds.
pub const SLOT_MS: i64 = 600_000;
pub const SLOTS_PER_DAY: usize = 144;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    SmsIn,
    SmsOut,
    CallIn,
    CallOut,
    Internet,
}

impl Channel {
    pub const ALL: [Channel; 5] =
        [Channel::SmsIn, Channel::SmsOut, Channel::CallIn, Channel::CallOut, Channel::Internet];

    pub fn name(self) -> &'static str {
        match self {
            Channel::SmsIn => "sms_in",
            Channel::SmsOut => "sms_out",
            Channel::CallIn => "call_in",
            Channel::CallOut => "call_out",
            Channel::Internet => "internet",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown channel {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdrRecord {
    pub grid_id: u32,
    pub timestamp_ms: i64,
    pub country_code: u32,
    pub sms_in: f64,
    pub sms_out: f64,
    pub call_in: f64,
    pub call_out: f64,
    pub internet: f64,
}

impl CdrRecord {
    pub fn channel(&self, c: Channel) -> f64 {
        match c {
            Channel::SmsIn => self.sms_in,
            Channel::SmsOut => self.sms_out,
            Channel::CallIn => self.call_in,
            Channel::CallOut => self.call_out,
            Channel::Internet => self.internet,
        }
    }
}

/// Where a series came from, when known. Series read back from CSV or
/// generated synthetically carry no origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesOrigin {
    pub grid_id: u32,
    pub channel: Channel,
}

/// Gap-free series of one activity channel: `values[i]` covers
/// `[t0_ms + i * SLOT_MS, t0_ms + (i + 1) * SLOT_MS)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivitySeries {
    pub origin: Option<SeriesOrigin>,
    pub t0_ms: i64,
    pub slot_ms: i64,
    pub values: Vec<f64>,
}

impl ActivitySeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp_of(&self, slot: usize) -> i64 {
        self.t0_ms + slot as i64 * self.slot_ms
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "slot,timestamp_ms,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{},{}", self.timestamp_of(i), sig17(*v))?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }

    /// Reads a series CSV (`slot,timestamp_ms,value`). Slots must be
    /// consecutive from 0 and timestamps evenly spaced by one slot.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut t0 = None;
        let mut values = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::Parse { line: line_no, msg: e.to_string() })?;
            let line = line.trim();
            if line_no == 1 {
                if line != "slot,timestamp_ms,value" {
                    return Err(Error::Parse { line: 1, msg: format!("unexpected header {line:?}") });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Parse { line: line_no, msg };
            let mut parts = line.split(',');
            let (Some(slot), Some(ts), Some(val), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected 3 columns".into()));
            };
            let slot: usize = slot.parse().map_err(|_| bad(format!("bad slot {slot:?}")))?;
            let ts: i64 = ts.parse().map_err(|_| bad(format!("bad timestamp {ts:?}")))?;
            let val: f64 = val.parse().map_err(|_| bad(format!("bad value {val:?}")))?;
            if slot != values.len() {
                return Err(bad(format!("slot {slot} out of order, expected {}", values.len())));
            }
            let t0 = *t0.get_or_insert(ts);
            if ts != t0 + slot as i64 * SLOT_MS {
                return Err(bad(format!("timestamp {ts} is not slot-aligned")));
            }
            if !val.is_finite() || val < 0.0 {
                return Err(bad(format!("value {val} must be finite and nonnegative")));
            }
            values.push(val);
        }
        let t0_ms = t0.ok_or_else(|| Error::Parse { line: 1, msg: "series is empty".into() })?;
        Ok(Self { origin: None, t0_ms, slot_ms: SLOT_MS, values })
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(BufReader::new(f)).map_err(|e| match e {
            Error::Parse { line, msg } => Error::FileParse { path: path.to_path_buf(), line, msg },
            other => other,
        })
    }
}

fn parse_activity(field: Option<&str>, name: &str, line_no: usize) -> Result<f64> {
    match field.map(str::trim) {
        None | Some("") => Ok(0.0),
        Some(s) => {
            let v: f64 = s.parse().map_err(|_| Error::Parse { line: line_no, msg: format!("bad {name} {s:?}") })?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("{name} must be finite and nonnegative, got {s}"),
                });
            }
            Ok(v)
        }
    }
}

/// Parses one raw line. Blank lines yield `Ok(None)`.
pub fn parse_line(line: &str, line_no: usize) -> Result<Option<CdrRecord>> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() {
        return Ok(None);
    }
    let mut fields = line.split('\t');
    let grid = fields.next().unwrap_or_default().trim();
    let grid_id: u32 =
        grid.parse().map_err(|_| Error::Parse { line: line_no, msg: format!("bad grid id {grid:?}") })?;
    let ts = fields.next().unwrap_or_default().trim();
    let timestamp_ms: i64 =
        ts.parse().map_err(|_| Error::Parse { line: line_no, msg: format!("bad timestamp {ts:?}") })?;
    let country_code = match fields.next().map(str::trim) {
        None | Some("") => 0,
        Some(s) => s.parse().map_err(|_| Error::Parse { line: line_no, msg: format!("bad country code {s:?}") })?,
    };
    Ok(Some(CdrRecord {
        grid_id,
        timestamp_ms,
        country_code,
        sms_in: parse_activity(fields.next(), "sms_in", line_no)?,
        sms_out: parse_activity(fields.next(), "sms_out", line_no)?,
        call_in: parse_activity(fields.next(), "call_in", line_no)?,
        call_out: parse_activity(fields.next(), "call_out", line_no)?,
        internet: parse_activity(fields.next(), "internet", line_no)?,
    }))
}

pub fn ms_to_slot(timestamp_ms: i64, t0_ms: i64) -> Result<usize> {
    if timestamp_ms < t0_ms {
        return Err(Error::InvalidArgument(format!("timestamp {timestamp_ms} precedes series start {t0_ms}")));
    }
    Ok(((timestamp_ms - t0_ms) / SLOT_MS) as usize)
}

/// Floors an epoch timestamp to its slot boundary.
pub fn slot_floor(timestamp_ms: i64) -> i64 {
    timestamp_ms.div_euclid(SLOT_MS) * SLOT_MS
}

/// Sums one channel of `grid_id`'s records into `n_slots` slots starting at
/// `t0_ms`. Records of other grids, or outside the window, are ignored.
/// Summation follows the input order.
pub fn aggregate(
    records: &[CdrRecord],
    grid_id: u32,
    channel: Channel,
    t0_ms: i64,
    n_slots: usize,
) -> Result<ActivitySeries> {
    if n_slots == 0 {
        return Err(Error::InvalidArgument("n_slots must be positive".into()));
    }
    let mut values = vec![0.0; n_slots];
    for r in records.iter().filter(|r| r.grid_id == grid_id && r.timestamp_ms >= t0_ms) {
        let slot = ms_to_slot(r.timestamp_ms, t0_ms)?;
        if let Some(v) = values.get_mut(slot) {
            *v += r.channel(channel);
        }
    }
    Ok(ActivitySeries { origin: Some(SeriesOrigin { grid_id, channel }), t0_ms, slot_ms: SLOT_MS, values })
}

/// Regular files of `dir`, sorted by file name.
fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if path.is_file() && !hidden {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Ingests every file of `dir` in file-name order and returns the series of
/// `grid_id`/`channel` spanning the earliest to the latest slot seen in any
/// record of the directory.
pub fn ingest_dir(dir: &Path, grid_id: u32, channel: Channel) -> Result<ActivitySeries> {
    let files = sorted_files(dir)?;
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!("{}: no input files", dir.display())));
    }
    let mut kept = Vec::new();
    let mut span: Option<(i64, i64)> = None;
    for path in &files {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        for (idx, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let record = parse_line(&line, idx + 1).map_err(|e| match e {
                Error::Parse { line, msg } => Error::FileParse { path: path.clone(), line, msg },
                other => other,
            })?;
            let Some(record) = record else { continue };
            let ts = record.timestamp_ms;
            span = Some(span.map_or((ts, ts), |(lo, hi)| (lo.min(ts), hi.max(ts))));
            if record.grid_id == grid_id {
                kept.push(record);
            }
        }
    }
    let (lo, hi) = span.ok_or_else(|| Error::InvalidArgument(format!("{}: no records found", dir.display())))?;
    let t0 = slot_floor(lo);
    let n_slots = ms_to_slot(hi, t0)? + 1;
    aggregate(&kept, grid_id, channel, t0, n_slots)
}

#[cfg(test)]
mod tests {
    use super::*;

    const T0: i64 = 1_383_260_400_000;

    fn rec(grid_id: u32, ts: i64, internet: f64) -> CdrRecord {
        CdrRecord {
            grid_id,
            timestamp_ms: ts,
            country_code: 39,
            sms_in: 0.0,
            sms_out: 0.0,
            call_in: 0.0,
            call_out: 0.0,
            internet,
        }
    }

    #[test]
    fn parses_full_line() {
        let r = parse_line("1\t1383260400000\t39\t0.2\t0.1\t0.05\t0.07\t10.5\n", 1).unwrap().unwrap();
        assert_eq!(r.grid_id, 1);
        assert_eq!(r.timestamp_ms, T0);
        assert_eq!(r.country_code, 39);
        assert_eq!((r.sms_in, r.sms_out, r.call_in, r.call_out, r.internet), (0.2, 0.1, 0.05, 0.07, 10.5));
    }

    #[test]
    fn missing_fields_are_zero() {
        let r = parse_line("1\t1383260400000\t39\t\t\t\t\t10.5", 1).unwrap().unwrap();
        assert_eq!((r.sms_in, r.sms_out, r.call_in, r.call_out), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.internet, 10.5);
        let short = parse_line("7\t1383260400000\t0\t0.3", 1).unwrap().unwrap();
        assert_eq!(short.sms_in, 0.3);
        assert_eq!(short.internet, 0.0);
    }

    #[test]
    fn blank_and_malformed_lines() {
        assert!(parse_line("   \r\n", 3).unwrap().is_none());
        match parse_line("abc\t1383260400000\t39", 12) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 12),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_line("1\tnoon\t39", 1).is_err());
    }

    #[test]
    fn slot_mapping() {
        assert_eq!(ms_to_slot(T0, T0).unwrap(), 0);
        assert_eq!(ms_to_slot(T0 + SLOT_MS, T0).unwrap(), 1);
        assert_eq!(ms_to_slot(T0 + SLOT_MS - 1, T0).unwrap(), 0);
        assert_eq!(ms_to_slot(T0 + 8927 * SLOT_MS, T0).unwrap(), 8927);
        assert!(ms_to_slot(T0 - 1, T0).is_err());
    }

    #[test]
    fn aggregate_sums_and_zero_fills() {
        let records = vec![rec(1, T0, 1.0), rec(1, T0 + 5, 2.0), rec(2, T0, 100.0), rec(1, T0 + 2 * SLOT_MS, 4.0)];
        let s = aggregate(&records, 1, Channel::Internet, T0, 3).unwrap();
        assert_eq!(s.values, vec![3.0, 0.0, 4.0]);
        assert!(aggregate(&records, 1, Channel::Internet, T0, 0).is_err());
    }

    #[test]
    fn channel_names_round_trip() {
        for c in Channel::ALL {
            assert_eq!(c.name().parse::<Channel>().unwrap(), c);
        }
        assert!("mms".parse::<Channel>().is_err());
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let s = ActivitySeries { origin: None, t0_ms: T0, slot_ms: SLOT_MS, values: vec![0.1, 2.5, 0.0] };
        let text = s.to_csv_string();
        assert!(text.starts_with("slot,timestamp_ms,value\n0,1383260400000,"));
        assert_eq!(ActivitySeries::read_csv(text.as_bytes()).unwrap(), s);
        let gap = "slot,timestamp_ms,value\n0,0,1\n2,1200000,1\n";
        assert!(ActivitySeries::read_csv(gap.as_bytes()).is_err());
    }
}
