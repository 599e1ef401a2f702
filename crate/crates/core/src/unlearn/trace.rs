use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Evaluation of the starting model.
    Start,
    Train,
    /// SCRUB phase on `D_f`.
    Max,
    /// SCRUB phase on `D_r`.
    Min,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Start => "start",
            Phase::Train => "train",
            Phase::Max => "max",
            Phase::Min => "min",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub phase: Phase,
    pub loss_f: Option<f64>,
    pub loss_r: f64,
    pub acc_test: f64,
    pub acc_f: Option<f64>,
    pub acc_r: f64,
    /// Cumulative FLOs consumed so far.
    pub flos: f64,
    /// Cumulative wall-clock training seconds (evaluation excluded).
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Trace {
    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss_f,loss_r,acc_test,acc_f,acc_r,flos,seconds,phase\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.epoch,
                opt(r.loss_f),
                r.loss_r,
                r.acc_test,
                opt(r.acc_f),
                r.acc_r,
                r.flos,
                r.seconds,
                r.phase.as_str()
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parses the output of [`Trace::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 9 {
                return Err(Error::Shape(format!("trace row has {} columns, expected 9", rec.len())));
            }
            let num = |i: usize| -> Result<f64> {
                rec[i].parse().map_err(|_| Error::Shape(format!("bad number '{}' in trace", &rec[i])))
            };
            let opt = |i: usize| -> Result<Option<f64>> {
                if rec[i].is_empty() {
                    Ok(None)
                } else {
                    num(i).map(Some)
                }
            };
            let phase = match &rec[8] {
                "start" => Phase::Start,
                "train" => Phase::Train,
                "max" => Phase::Max,
                "min" => Phase::Min,
                other => return Err(Error::Shape(format!("unknown phase '{other}' in trace"))),
            };
            rows.push(TraceRow {
                epoch: rec[0].parse().map_err(|_| Error::Shape("bad epoch in trace".into()))?,
                phase,
                loss_f: opt(1)?,
                loss_r: num(2)?,
                acc_test: num(3)?,
                acc_f: opt(4)?,
                acc_r: num(5)?,
                flos: num(6)?,
                seconds: num(7)?,
            });
        }
        Ok(Trace { rows })
    }
}
