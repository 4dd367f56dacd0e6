//! CSV tables. Headers are fixed; values are written unquoted with `.` decimals.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{phase_label, SlotRecord, Trace};
use crate::spectrum::Freq;
use crate::verifier::DeviationFinding;

pub const TRACE_HEADER: &str = "slot,operator,traffic,width_mhz,utility,balance_mhz,phase";
pub const SUMMARY_HEADER: &str = "operator,scheme,mean_revenue,std_err";
pub const FINDINGS_HEADER: &str = "state,deviation,gain,loss,profitable";

#[derive(Serialize, Deserialize)]
struct TraceRow {
    slot: u64,
    operator: usize,
    traffic: f64,
    width_mhz: f64,
    utility: f64,
    balance_mhz: f64,
    phase: String,
}

/// One operator's line in the summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// 1-based.
    pub operator: usize,
    pub scheme: String,
    pub mean_revenue: f64,
    pub std_err: f64,
}

#[derive(Serialize)]
struct FindingRow<'a> {
    state: &'a str,
    deviation: &'a str,
    gain: f64,
    loss: f64,
    profitable: bool,
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Never)
        .from_writer(w)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(r)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &str) -> Result<()> {
    let got = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{expected}`, got `{got}`"),
        });
    }
    Ok(())
}

/// Streams trace records as they are produced.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(w: W) -> Self {
        TraceWriter { inner: writer(w) }
    }

    pub fn write(&mut self, r: &SlotRecord) -> Result<()> {
        self.inner.serialize(TraceRow {
            slot: r.slot,
            operator: r.operator,
            traffic: r.traffic,
            width_mhz: r.width.mhz(),
            utility: r.utility,
            balance_mhz: r.balance.mhz(),
            phase: r.phase.to_string(),
        })?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_trace<W: Write>(w: W, trace: &Trace) -> Result<()> {
    let mut out = TraceWriter::new(w);
    if trace.records.is_empty() {
        out.inner.write_record(TRACE_HEADER.split(','))?;
    }
    for r in &trace.records {
        out.write(r)?;
    }
    out.finish()
}

pub fn read_trace<R: Read>(r: R) -> Result<Trace> {
    let mut rdr = reader(r);
    check_header(&mut rdr, TRACE_HEADER)?;
    let mut records = Vec::new();
    for (i, row) in rdr.deserialize::<TraceRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let phase = phase_label(&row.phase).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown phase `{}`", row.phase),
        })?;
        records.push(SlotRecord {
            slot: row.slot,
            operator: row.operator,
            traffic: row.traffic,
            width: Freq::from_mhz(row.width_mhz),
            utility: row.utility,
            balance: Freq::from_mhz(row.balance_mhz),
            phase,
        });
    }
    Ok(Trace { records })
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = writer(w);
    if rows.is_empty() {
        out.write_record(SUMMARY_HEADER.split(','))?;
    }
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(r: R) -> Result<Vec<SummaryRow>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, SUMMARY_HEADER)?;
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_findings<W: Write>(w: W, findings: &[DeviationFinding]) -> Result<()> {
    let mut out = writer(w);
    if findings.is_empty() {
        out.write_record(FINDINGS_HEADER.split(','))?;
    }
    for f in findings {
        out.serialize(FindingRow {
            state: &f.state,
            deviation: f.kind.label(),
            gain: f.gain,
            loss: f.loss,
            profitable: f.profitable,
        })?;
    }
    out.flush()?;
    Ok(())
}

/// A figure table: fixed header, numeric cells.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Contract(format!("row of {} cells for {} columns", row.len(), header.len())));
        }
        out.write_record(row.iter().map(|v| v.to_string()))?;
    }
    out.flush()?;
    Ok(())
}
