//! Run metrics: the JSONL log format and its CSV rollup.
//!
//! A run writes one `metrics.jsonl`: a header line `{"v":1,
//! "config_hash":"…"}` followed by one line per logged step. Record
//! keys appear in a fixed order (`step`, `loss`, `lr`,
//! `global_grad_norm`, `params`, `skipped`) and floats use the shortest
//! decimal form that round-trips, so identical runs produce
//! byte-identical files.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One clipping unit's numbers for a logged step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamMetrics {
    /// Unit label: a parameter name, `"<param>.s<k>"` for shards, or
    /// `"model"` when clipping acts on the whole gradient at once.
    pub unit: String,
    pub pre_norm: f64,
    pub h: f64,
    pub post_norm: f64,
    /// Adaptive threshold after the step; `null` for stateless modes.
    pub gamma: Option<f64>,
}

/// One logged step of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRecord {
    /// Attempt ordinal within the run, starting at 1. Skipped attempts
    /// keep their slot, so the numbering never compacts.
    pub step: u64,
    /// `null` when no finite loss was available: open-loop gradient
    /// sources without a readout, or a skip caused by the loss itself.
    pub loss: Option<f64>,
    /// `null` on skipped steps — the schedule is never consulted.
    pub lr: Option<f64>,
    /// Norm of the whole pre-clip gradient; `null` on skipped steps.
    pub global_grad_norm: Option<f64>,
    /// Per-unit clipping numbers; empty on skipped steps.
    pub params: Vec<ParamMetrics>,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    v: u32,
    config_hash: String,
}

/// An in-memory metrics log: the config hash plus every logged record.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLog {
    pub config_hash: String,
    pub records: Vec<MetricsRecord>,
}

impl MetricsLog {
    pub fn new(config_hash: impl Into<String>) -> Self {
        MetricsLog {
            config_hash: config_hash.into(),
            records: Vec::new(),
        }
    }

    /// The header line, exactly as it appears in the file.
    pub fn header_line(&self) -> String {
        serde_json::to_string(&Header {
            v: 1,
            config_hash: self.config_hash.clone(),
        })
        .expect("header serializes")
    }

    /// Serialize the whole log: header line, then one line per record,
    /// each terminated by `\n`.
    pub fn to_jsonl(&self) -> String {
        let mut out = self.header_line();
        out.push('\n');
        for record in &self.records {
            out.push_str(&record_line(record));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    /// Parse a metrics JSONL file. Parse failures name the file and the
    /// 1-based line number.
    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<MetricsLog> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };

        let mut lines = text.lines().enumerate();
        let first = match lines.next() {
            Some((_, line)) if !line.trim().is_empty() => line,
            _ => return Err(parse_err(1, "missing header line".into())),
        };
        let header: Header =
            serde_json::from_str(first).map_err(|e| parse_err(1, format!("bad header: {e}")))?;
        if header.v != 1 {
            return Err(parse_err(
                1,
                format!("unsupported metrics version {}", header.v),
            ));
        }

        let mut log = MetricsLog::new(header.config_hash);
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let record: MetricsRecord =
                serde_json::from_str(line).map_err(|e| parse_err(idx + 1, e.to_string()))?;
            log.records.push(record);
        }
        Ok(log)
    }

    /// Read just the config hash from a log's header line.
    pub fn read_config_hash(path: impl AsRef<Path>) -> Result<String> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut first = String::new();
        BufReader::new(file)
            .read_line(&mut first)
            .map_err(|e| Error::io(path, e))?;
        let header: Header = serde_json::from_str(first.trim_end()).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: format!("bad header: {e}"),
        })?;
        Ok(header.config_hash)
    }

    /// Flatten to CSV: `step,loss,lr,global_grad_norm` plus, for each
    /// unit seen in the first non-skipped record, the columns
    /// `<unit>_pre,<unit>_h,<unit>_post,<unit>_gamma`. Cells with no
    /// value (skipped rows, absent thresholds) are left empty. Unit
    /// labels are taken verbatim, so keep commas out of parameter names
    /// if the CSV matters to you.
    pub fn to_csv_summary(&self) -> String {
        let units: Vec<&str> = self
            .records
            .iter()
            .find(|r| !r.params.is_empty())
            .map(|r| r.params.iter().map(|p| p.unit.as_str()).collect())
            .unwrap_or_default();

        let mut out = String::from("step,loss,lr,global_grad_norm");
        for unit in &units {
            out.push_str(&format!(",{unit}_pre,{unit}_h,{unit}_post,{unit}_gamma"));
        }
        out.push('\n');

        for record in &self.records {
            out.push_str(&record.step.to_string());
            push_cell(&mut out, record.loss);
            push_cell(&mut out, record.lr);
            push_cell(&mut out, record.global_grad_norm);
            for unit in &units {
                match record.params.iter().find(|p| p.unit == *unit) {
                    Some(p) => {
                        push_cell(&mut out, Some(p.pre_norm));
                        push_cell(&mut out, Some(p.h));
                        push_cell(&mut out, Some(p.post_norm));
                        push_cell(&mut out, p.gamma);
                    }
                    None => out.push_str(",,,,"),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn push_cell(out: &mut String, value: Option<f64>) {
    out.push(',');
    if let Some(v) = value {
        out.push_str(&format!("{v}"));
    }
}

/// One record as a JSONL line (no trailing newline).
pub(crate) fn record_line(record: &MetricsRecord) -> String {
    serde_json::to_string(record).expect("record serializes")
}
