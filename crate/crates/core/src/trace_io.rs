//! CSV trace rows and per-run manifests.
//!
//! Channels are written 1-based.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::Trace;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub slot: u64,
    pub su_id: u32,
    pub policy: String,
    pub channel: usize,
    pub sensing: String,
    pub pu_busy: u8,
    pub su_present: u8,
    pub transmitted: u8,
    pub collided: u8,
    pub reward: u8,
}

pub fn rows(trace: &Trace) -> impl Iterator<Item = TraceRow> + '_ {
    trace.records.iter().map(|r| TraceRow {
        slot: r.slot,
        su_id: r.su_id,
        policy: trace.labels.get(&r.su_id).cloned().unwrap_or_default(),
        channel: r.action.channel + 1,
        sensing: r.action.sensing.as_str().to_string(),
        pu_busy: r.feedback.pu_busy.into(),
        su_present: r.feedback.su_present.into(),
        transmitted: r.feedback.transmitted.into(),
        collided: r.feedback.collided.into(),
        reward: r.feedback.reward,
    })
}

pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows(trace) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per slot; `vacant` lists channels in order as `0`/`1` digits.
pub fn write_vacancy_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slot", "vacant"])?;
    for (s, v) in trace.vacancy.iter().enumerate() {
        let bits: String = v.iter().map(|&b| if b { '1' } else { '0' }).collect();
        w.write_record([(s + 1).to_string(), bits])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: std::io::Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub policy: String,
    pub repetition: u32,
    pub seed: u64,
    pub config_digest: String,
    pub horizon: u64,
    pub durations: BTreeMap<String, f64>,
    pub trace_file: Option<String>,
    pub vacancy_file: Option<String>,
}
