//! Control-channel trace ingestion.
//!
//! A trace is a CSV of decoded downlink control messages, one row per grant.
//! Grants are filtered by DCI format, summed per millisecond across RNTIs and
//! then averaged over fixed windows to produce a demand series.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{DemandSample, DemandSeries, Side, Trace};
use crate::error::{Error, Result};

pub const DCI_HEADER: [&str; 7] = ["sfn", "subframe", "rnti", "prb_count", "mcs", "dci_format", "timestamp"];

/// DCI format carrying downlink data grants.
pub const DATA_FORMAT: &str = "2B";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DciRecord {
    pub sfn: u16,
    pub subframe: u8,
    pub rnti: u32,
    pub prb_count: u32,
    pub mcs: u8,
    pub dci_format: String,
    /// Milliseconds since the epoch.
    pub timestamp: i64,
}

pub fn parse_dci_csv(path: &Path) -> Result<Vec<DciRecord>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    parse_dci_reader(std::fs::File::open(path)?)
}

pub fn parse_dci_reader<R: std::io::Read>(reader: R) -> Result<Vec<DciRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(DCI_HEADER.iter().copied()) {
        return Err(Error::SchemaMismatch {
            expected: DCI_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::MalformedRow { row, reason: e.to_string() })?;
        out.push(parse_row(row, &rec)?);
    }
    Ok(out)
}

fn parse_row(row: usize, rec: &csv::StringRecord) -> Result<DciRecord> {
    let bad = |reason: String| Error::MalformedRow { row, reason };
    if rec.len() != DCI_HEADER.len() {
        return Err(bad(format!("expected {} fields, found {}", DCI_HEADER.len(), rec.len())));
    }
    fn num<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> std::result::Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        rec[i].trim().parse::<T>().map_err(|e| format!("{}: {e}", DCI_HEADER[i]))
    }
    let sfn: u16 = num(rec, 0).map_err(bad)?;
    let subframe: u8 = num(rec, 1).map_err(bad)?;
    let rnti: u32 = num(rec, 2).map_err(bad)?;
    let prb_count: u32 = num(rec, 3).map_err(bad)?;
    let mcs: u8 = num(rec, 4).map_err(bad)?;
    let dci_format = rec[5].trim().to_string();
    let timestamp: i64 = num(rec, 6).map_err(bad)?;
    if sfn > 1023 {
        return Err(bad(format!("sfn {sfn} outside 0..=1023")));
    }
    if subframe > 9 {
        return Err(bad(format!("subframe {subframe} outside 0..=9")));
    }
    if dci_format.is_empty() {
        return Err(bad("empty dci_format".into()));
    }
    Ok(DciRecord { sfn, subframe, rnti, prb_count, mcs, dci_format, timestamp })
}

pub fn filter_data_transmissions(records: &[DciRecord], format: &str) -> Vec<DciRecord> {
    records.iter().filter(|r| r.dci_format == format).cloned().collect()
}

/// Mean of the per-millisecond PRB totals inside one resampling window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStat {
    /// Window start, seconds since the epoch.
    pub start: i64,
    pub mean: f64,
    /// Number of distinct milliseconds with at least one grant.
    pub count: usize,
}

/// Sums `prb_count` over records sharing a millisecond timestamp.
pub fn per_ms_totals(records: &[DciRecord]) -> BTreeMap<i64, u64> {
    let mut totals = BTreeMap::new();
    for r in records {
        *totals.entry(r.timestamp).or_insert(0u64) += u64::from(r.prb_count);
    }
    totals
}

/// Windows are aligned to multiples of `granularity_s` since the epoch and
/// cover every window from the first to the last populated one.
pub fn resample_windows(records: &[DciRecord], granularity_s: u64) -> Result<Vec<WindowStat>> {
    if granularity_s == 0 {
        return Err(Error::config("granularity must be positive"));
    }
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let totals = per_ms_totals(records);
    let width_ms = granularity_s as i64 * 1000;
    let window_of = |ms: i64| ms.div_euclid(width_ms);
    let first = window_of(*totals.keys().next().expect("nonempty"));
    let last = window_of(*totals.keys().next_back().expect("nonempty"));

    let n = (last - first + 1) as usize;
    let mut sums = vec![0u64; n];
    let mut counts = vec![0usize; n];
    for (&ms, &total) in &totals {
        let k = (window_of(ms) - first) as usize;
        sums[k] += total;
        counts[k] += 1;
    }
    Ok((0..n)
        .map(|k| WindowStat {
            start: (first + k as i64) * granularity_s as i64,
            mean: if counts[k] == 0 { 0.0 } else { sums[k] as f64 / counts[k] as f64 },
            count: counts[k],
        })
        .collect())
}

/// Resamples a trace to `granularity_s` and places the means on `side`; the
/// other column is zero.
pub fn resample_mean(records: &[DciRecord], granularity_s: u64, side: Side) -> Result<DemandSeries> {
    let windows = resample_windows(records, granularity_s)?;
    let samples = windows
        .iter()
        .map(|w| {
            let (d_a, d_b) = match side {
                Side::A => (w.mean, 0.0),
                Side::B => (0.0, w.mean),
            };
            DemandSample { timestamp: w.start, d_a, d_b }
        })
        .collect();
    DemandSeries::new(samples, granularity_s)
}

/// Pairs two single-network traces into one demand series.
pub fn merge_series(a: &Trace, b: &Trace) -> Result<DemandSeries> {
    if a.granularity != b.granularity {
        return Err(Error::AlignmentMismatch(format!(
            "granularity {} vs {}",
            a.granularity, b.granularity
        )));
    }
    if a.len() != b.len() {
        return Err(Error::AlignmentMismatch(format!("length {} vs {}", a.len(), b.len())));
    }
    if a.start != b.start {
        return Err(Error::AlignmentMismatch(format!("start {} vs {}", a.start, b.start)));
    }
    let pairs: Vec<(f64, f64)> = a.values.iter().copied().zip(b.values.iter().copied()).collect();
    DemandSeries::from_pairs(a.start, a.granularity, &pairs)
}
