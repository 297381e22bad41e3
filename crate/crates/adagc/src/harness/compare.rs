//! Cross-run comparison: spike counting and side-by-side summaries.

use crate::error::{Error, Result};
use crate::harness::metrics::MetricsLog;

/// Default sliding-window length for [`spike_count`].
pub const DEFAULT_SPIKE_WINDOW: usize = 25;
/// Default spike factor for [`spike_count`].
pub const DEFAULT_SPIKE_FACTOR: f64 = 2.0;

/// Count spike events in a series.
///
/// A value spikes when it strictly exceeds `k` times the median of the
/// `window` values before it; a run of consecutive spiking values
/// counts as one event. The first `window` values only seed medians, so
/// the series must hold at least `window + 1` values.
pub fn spike_count(series: &[f64], window: usize, k: f64) -> Result<usize> {
    if window == 0 {
        return Err(Error::InvalidArgument(
            "spike window must be at least 1".into(),
        ));
    }
    if !(k > 1.0) || !k.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "spike factor must be finite and greater than 1, got {k}"
        )));
    }
    if series.len() < window + 1 {
        return Err(Error::InvalidArgument(format!(
            "spike counting needs at least window + 1 = {} values, got {}",
            window + 1,
            series.len()
        )));
    }
    if let Some(bad) = series.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "series contains a non-finite value ({bad})"
        )));
    }

    let mut events = 0;
    let mut in_spike = false;
    let mut scratch = vec![0.0; window];
    for t in window..series.len() {
        scratch.copy_from_slice(&series[t - window..t]);
        scratch.sort_by(f64::total_cmp);
        let median = if window % 2 == 1 {
            scratch[window / 2]
        } else {
            (scratch[window / 2 - 1] + scratch[window / 2]) / 2.0
        };
        let spiking = series[t] > k * median;
        if spiking && !in_spike {
            events += 1;
        }
        in_spike = spiking;
    }
    Ok(events)
}

/// One run's row in a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub label: String,
    pub spike_count: usize,
    /// Loss of the last logged record (absent for loss-free runs).
    pub final_loss: Option<f64>,
    /// Mean over non-skipped records of the fraction of units clipped.
    pub mean_clipped_fraction: f64,
}

/// Side-by-side summaries of runs that logged the same step grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSummary {
    pub window: usize,
    pub k: f64,
    pub runs: Vec<RunSummary>,
}

impl ComparisonSummary {
    /// Aligned CSV: `label,spike_count,final_loss,mean_clipped_fraction`,
    /// one row per run in input order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,spike_count,final_loss,mean_clipped_fraction\n");
        for run in &self.runs {
            out.push_str(&run.label);
            out.push(',');
            out.push_str(&run.spike_count.to_string());
            out.push(',');
            if let Some(loss) = run.final_loss {
                out.push_str(&format!("{loss}"));
            }
            out.push_str(&format!(",{}\n", run.mean_clipped_fraction));
        }
        out
    }
}

/// The series spikes are counted on: the loss when the log has one,
/// otherwise the post-clip global norm (the concatenated norm of all
/// units after scaling), so loss-free gradient-stream runs can still be
/// compared. Skipped records contribute to neither.
fn comparison_series(log: &MetricsLog) -> Vec<f64> {
    if log.records.iter().any(|r| r.loss.is_some()) {
        log.records.iter().filter_map(|r| r.loss).collect()
    } else {
        log.records
            .iter()
            .filter(|r| !r.skipped && !r.params.is_empty())
            .map(|r| {
                r.params
                    .iter()
                    .map(|p| p.post_norm * p.post_norm)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }
}

/// Summarize runs side by side.
///
/// Every log must cover the same step grid (same `step` sequence) so
/// the rows describe the same schedule; anything else is an error. The
/// output keeps input order, and permuting the input permutes the rows
/// and nothing else.
pub fn compare_runs(
    runs: &[(String, MetricsLog)],
    window: usize,
    k: f64,
) -> Result<ComparisonSummary> {
    let Some(((first_label, first_log), rest)) = runs.split_first() else {
        return Err(Error::InvalidArgument(
            "comparison needs at least one run".into(),
        ));
    };
    let grid: Vec<u64> = first_log.records.iter().map(|r| r.step).collect();
    for (label, log) in rest {
        let steps: Vec<u64> = log.records.iter().map(|r| r.step).collect();
        if steps != grid {
            return Err(Error::InvalidArgument(format!(
                "run `{label}` logged a different step grid than `{first_label}`; \
                 comparisons need identical grids (log with the same cadence)"
            )));
        }
    }

    let mut summaries = Vec::with_capacity(runs.len());
    for (label, log) in runs {
        let series = comparison_series(log);
        let spikes = spike_count(&series, window, k).map_err(|e| {
            Error::InvalidArgument(format!("run `{label}`: {e}"))
        })?;
        let fractions: Vec<f64> = log
            .records
            .iter()
            .filter(|r| !r.skipped && !r.params.is_empty())
            .map(|r| {
                let clipped = r.params.iter().filter(|p| p.h < 1.0).count();
                clipped as f64 / r.params.len() as f64
            })
            .collect();
        let mean_clipped = if fractions.is_empty() {
            0.0
        } else {
            fractions.iter().sum::<f64>() / fractions.len() as f64
        };
        summaries.push(RunSummary {
            label: label.clone(),
            spike_count: spikes,
            final_loss: log.records.last().and_then(|r| r.loss),
            mean_clipped_fraction: mean_clipped,
        });
    }
    Ok(ComparisonSummary {
        window,
        k,
        runs: summaries,
    })
}
