//! CSV files for experiment records and summaries.
//!
//! Reals are written with 17 significant digits, so reading a file back
//! reproduces every value exactly. An undefined relative error is an empty
//! cell.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{ExperimentRecord, SummaryRow};
use crate::error::{invalid, Result};

pub const RECORD_HEADER: [&str; 9] = [
    "d",
    "epsilon",
    "n",
    "rep",
    "estimate",
    "ground_truth",
    "abs_error",
    "rel_error",
    "expected_bound",
];

pub const SUMMARY_HEADER: [&str; 8] = [
    "d",
    "epsilon",
    "n",
    "mean_abs",
    "std_abs",
    "mean_rel",
    "std_rel",
    "expected_bound",
];

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

pub fn write_records<W: Write>(w: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RECORD_HEADER)?;
    for r in records {
        out.write_record([
            r.d.to_string(),
            real(r.epsilon),
            r.n.to_string(),
            r.rep.to_string(),
            real(r.estimate),
            real(r.ground_truth),
            real(r.abs_error),
            opt_real(r.rel_error),
            real(r.expected_bound),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summaries<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for r in rows {
        out.write_record([
            r.d.to_string(),
            real(r.epsilon),
            r.n.to_string(),
            real(r.mean_abs),
            real(r.std_abs),
            opt_real(r.mean_rel),
            opt_real(r.std_rel),
            real(r.expected_bound),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[ExperimentRecord], path: impl AsRef<Path>) -> Result<()> {
    write_records(BufWriter::new(File::create(path)?), records)
}

pub fn emit_summary_csv(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    write_summaries(BufWriter::new(File::create(path)?), rows)
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(invalid(format!("unexpected CSV header {header:?}")));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec
        .get(i)
        .ok_or_else(|| invalid(format!("missing column {i}")))?;
    raw.parse()
        .map_err(|e| invalid(format!("column {i}: {raw:?}: {e}")))
}

fn opt_field(rec: &csv::StringRecord, i: usize) -> Result<Option<f64>> {
    match rec.get(i) {
        Some("") => Ok(None),
        _ => field(rec, i).map(Some),
    }
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::Reader::from_reader(r);
    check_header(&mut reader, &RECORD_HEADER)?;
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            Ok(ExperimentRecord {
                d: field(&rec, 0)?,
                epsilon: field(&rec, 1)?,
                n: field(&rec, 2)?,
                rep: field(&rec, 3)?,
                estimate: field(&rec, 4)?,
                ground_truth: field(&rec, 5)?,
                abs_error: field(&rec, 6)?,
                rel_error: opt_field(&rec, 7)?,
                expected_bound: field(&rec, 8)?,
            })
        })
        .collect()
}

/// Reads a summary CSV. The group size is not stored and comes back as 0.
pub fn read_summaries<R: Read>(r: R) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_reader(r);
    check_header(&mut reader, &SUMMARY_HEADER)?;
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            Ok(SummaryRow {
                d: field(&rec, 0)?,
                epsilon: field(&rec, 1)?,
                n: field(&rec, 2)?,
                count: 0,
                mean_abs: field(&rec, 3)?,
                std_abs: field(&rec, 4)?,
                mean_rel: opt_field(&rec, 5)?,
                std_rel: opt_field(&rec, 6)?,
                expected_bound: field(&rec, 7)?,
            })
        })
        .collect()
}
