//! The experiment harness: one config in, reproducible artifacts out.
//!
//! [`run_experiment`] builds a model and/or gradient source from an
//! [`ExperimentConfig`], drives the clip → optimizer pipeline for a
//! fixed number of steps, and writes everything observable into one
//! output directory:
//!
//! * `metrics.jsonl` — header with the config hash, then one record per
//!   logged step (written incrementally as the run goes),
//! * `summary.csv` — the same log flattened to columns,
//! * `trace.jsonl` and `reports.jsonl` — the exact gradients the
//!   clipper consumed and what it did to them, when `record_trace` is
//!   set, so a run can be replayed and checked bit for bit.
//!
//! Same config, same seed, same bytes: every random draw descends from
//! `seed`, floats serialize in shortest round-trip form, and record
//! keys have a fixed order.

mod compare;
mod gradcheck;
mod metrics;

pub use compare::{
    compare_runs, spike_count, ComparisonSummary, RunSummary, DEFAULT_SPIKE_FACTOR,
    DEFAULT_SPIKE_WINDOW,
};
pub use gradcheck::{gradcheck_model, GradCheckReport, DEFAULT_FD_STEP, DEFAULT_FD_TOL};
pub use metrics::{MetricsLog, MetricsRecord, ParamMetrics};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clip::{ClipConfig, ClipReport};
use crate::error::{Error, Result};
use crate::models::{Batch, Mlp, Model, QuadraticBowl, Rosenbrock2d, SyntheticData};
use crate::numerics::Rng;
use crate::optim::{
    run_step, run_step_open_loop, LrSchedule, OptimizerConfig, StepOutcome, TrainState,
};
use crate::stream::{gen_stream, GradStream, SpikeEvent, StreamConfig, TraceWriter};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const REPORTS_FILE: &str = "reports.jsonl";

/// Which test problem a run trains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    /// Random positive-definite quadratic bowl.
    Quadratic(QuadraticSpec),
    /// The classic banana-valley function in two dimensions.
    Rosenbrock,
    /// Tanh multilayer perceptron trained on synthetic regression data.
    Mlp(MlpSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    pub dim: usize,
    /// Eigenvalue range of the random Hessian.
    #[serde(default = "defaults::eig_min")]
    pub eig_min: f64,
    #[serde(default = "defaults::eig_max")]
    pub eig_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    /// Layer widths, input first, output last (at least two entries).
    pub layers: Vec<usize>,
}

impl ModelSpec {
    /// Build the model, drawing any random structure from `rng`.
    pub fn build(&self, rng: &mut Rng) -> Result<Box<dyn Model>> {
        match self {
            ModelSpec::Quadratic(s) => Ok(Box::new(QuadraticBowl::random(
                s.dim, s.eig_min, s.eig_max, rng,
            )?)),
            ModelSpec::Rosenbrock => Ok(Box::new(Rosenbrock2d::new())),
            ModelSpec::Mlp(s) => Ok(Box::new(Mlp::new(&s.layers, rng)?)),
        }
    }

    /// Whether the model consumes input batches (and therefore needs a
    /// data section).
    pub fn needs_batches(&self) -> bool {
        matches!(self, ModelSpec::Mlp(_))
    }

    /// Parse the compact command-line form: `quadratic:<dim>`,
    /// `rosenbrock`, or `mlp:<w0,w1,...>`.
    pub fn parse_dsl(text: &str) -> Result<ModelSpec> {
        let bad = |why: &str| {
            Error::InvalidArgument(format!(
                "cannot parse model `{text}` ({why}); expected quadratic:<dim>, \
                 rosenbrock, or mlp:<w0,w1,...>"
            ))
        };
        let (kind, rest) = match text.split_once(':') {
            Some((kind, rest)) => (kind, Some(rest)),
            None => (text, None),
        };
        match (kind, rest) {
            ("rosenbrock", None) => Ok(ModelSpec::Rosenbrock),
            ("rosenbrock", Some(_)) => Err(bad("rosenbrock takes no arguments")),
            ("quadratic", Some(dim)) => Ok(ModelSpec::Quadratic(QuadraticSpec {
                dim: dim.trim().parse().map_err(|_| bad("bad dimension"))?,
                eig_min: defaults::eig_min(),
                eig_max: defaults::eig_max(),
            })),
            ("quadratic", None) => Err(bad("missing dimension")),
            ("mlp", Some(widths)) => {
                let layers = widths
                    .split(',')
                    .map(|w| w.trim().parse::<usize>().map_err(|_| bad("bad layer width")))
                    .collect::<Result<Vec<usize>>>()?;
                Ok(ModelSpec::Mlp(MlpSpec { layers }))
            }
            ("mlp", None) => Err(bad("missing layer widths")),
            _ => Err(bad("unknown model kind")),
        }
    }
}

/// Where gradients come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSpec {
    /// No data: the model's own full gradient drives every step
    /// (deterministic descent).
    None,
    /// Random regression batches from a fixed synthetic teacher.
    Synthetic(SyntheticSpec),
    /// Open-loop synthetic gradient stream; the optional model only
    /// provides parameters and a loss readout.
    Stream(StreamSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub config: StreamConfig,
    #[serde(default)]
    pub spikes: Vec<SpikeEvent>,
}

/// Everything a run needs, in one serializable document.
///
/// The SHA-256 of the serialized config (the *config hash*) stamps every
/// metrics file, so artifacts can always be traced back to the exact
/// configuration — including the seed — that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Absent only for pure stream runs (parameters start at zero and
    /// no loss is recorded).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    pub data: DataSpec,
    #[serde(default)]
    pub clip: ClipConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub schedule: LrSchedule,
    pub steps: u64,
    pub seed: u64,
    /// Cadence of metrics records; steps where anything clipped and
    /// skipped steps are always recorded.
    #[serde(default = "defaults::log_every")]
    pub log_every: u64,
    /// Abort with a numeric failure once more than this many steps have
    /// been skipped for non-finite values.
    #[serde(default = "defaults::skip_budget")]
    pub skip_budget: u64,
    /// Also write `trace.jsonl` (every gradient the clipper consumed)
    /// and `reports.jsonl` (what it did), enabling bit-exact replay.
    #[serde(default)]
    pub record_trace: bool,
    /// Default output directory; callers may override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

/// A runnable starting point for building configs in code: a hundred
/// deterministic full-gradient steps with no model attached yet (set
/// `model` or `data` before use), default AdamW, no clipping.
impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: None,
            data: DataSpec::None,
            clip: ClipConfig::default(),
            optimizer: OptimizerConfig::default(),
            schedule: LrSchedule::default(),
            steps: 100,
            seed: 0,
            log_every: defaults::log_every(),
            skip_budget: defaults::skip_budget(),
            record_trace: false,
            out: None,
        }
    }
}

mod defaults {
    pub(super) fn log_every() -> u64 {
        1
    }

    pub(super) fn skip_budget() -> u64 {
        10
    }

    pub(super) fn eig_min() -> f64 {
        0.3
    }

    pub(super) fn eig_max() -> f64 {
        1.0
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be at least 1".into()));
        }
        self.clip.validate()?;
        self.optimizer.validate()?;
        self.schedule.validate()?;
        match &self.data {
            DataSpec::None => match &self.model {
                None => {
                    return Err(Error::Config(
                        "a run without a gradient stream needs a model".into(),
                    ))
                }
                Some(m) if m.needs_batches() => {
                    return Err(Error::Config(
                        "this model trains on batches; add a synthetic data section".into(),
                    ))
                }
                Some(_) => {}
            },
            DataSpec::Synthetic(s) => {
                if s.batch_size == 0 {
                    return Err(Error::Config("batch_size must be at least 1".into()));
                }
                match &self.model {
                    None => {
                        return Err(Error::Config("synthetic data needs a model".into()))
                    }
                    Some(m) if !m.needs_batches() => {
                        return Err(Error::Config(
                            "this model takes no input batches; drop the synthetic data \
                             section or switch to a gradient stream"
                                .into(),
                        ))
                    }
                    Some(_) => {}
                }
            }
            DataSpec::Stream(s) => {
                s.config.validate()?;
                if s.config.steps < self.steps {
                    return Err(Error::Config(format!(
                        "the gradient stream provides {} steps but the run needs {}",
                        s.config.steps, self.steps
                    )));
                }
                if let Some(m) = &self.model {
                    if m.needs_batches() {
                        return Err(Error::Config(
                            "stream runs read the loss from a batch-free model \
                             (quadratic or rosenbrock)"
                                .into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// SHA-256 (hex) of the serialized config. Identical configs — seed
/// included — hash identically; any material change produces a new hash.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// What [`run_experiment`] leaves behind, in memory.
#[derive(Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    /// Every logged record plus the config hash (mirrors `metrics.jsonl`).
    pub log: MetricsLog,
    /// Clip reports for every non-skipped step, in order.
    pub reports: Vec<ClipReport>,
    /// Final training state: parameters, thresholds, counters.
    pub state: TrainState,
}

/// Run one experiment into `out_dir`, creating it if needed.
///
/// If the directory already holds a `metrics.jsonl` for a *different*
/// config hash the run refuses to start rather than mix artifacts; a
/// matching hash is overwritten (same config, same bytes). Exceeding
/// `skip_budget` aborts with a numeric failure, leaving the records
/// written so far on disk.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<RunArtifacts> {
    let out_dir = out_dir.as_ref();
    cfg.validate()?;
    let hash = config_hash(cfg);

    let metrics_path = out_dir.join(METRICS_FILE);
    if metrics_path.exists() {
        let existing = MetricsLog::read_config_hash(&metrics_path)?;
        if existing != hash {
            return Err(Error::Config(format!(
                "{} holds results for config hash {}, not {}; refusing to overwrite — \
                 use a fresh output directory",
                metrics_path.display(),
                &existing[..existing.len().min(12)],
                &hash[..12]
            )));
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    // All randomness descends from the run seed: one draw for the model,
    // one for the data, so changing one leg never reshuffles the other.
    let mut root = Rng::new(cfg.seed);
    let model_seed = root.next_u64();
    let data_seed = root.next_u64();
    let mut model_rng = Rng::new(model_seed);
    let mut data_rng = Rng::new(data_seed);

    let model: Option<Box<dyn Model>> = match &cfg.model {
        Some(spec) => Some(spec.build(&mut model_rng)?),
        None => None,
    };

    enum Source {
        Batches {
            data: Option<SyntheticData>,
            batch_size: usize,
        },
        Stream(GradStream),
    }
    let source = match &cfg.data {
        DataSpec::None => Source::Batches {
            data: None,
            batch_size: 0,
        },
        DataSpec::Synthetic(s) => Source::Batches {
            data: Some(SyntheticData::new(
                model.as_deref().expect("validated: synthetic data has a model"),
                &mut data_rng,
            )?),
            batch_size: s.batch_size,
        },
        DataSpec::Stream(s) => Source::Stream(gen_stream(&s.config, &s.spikes)?),
    };

    let init_params = match (&model, &source) {
        (Some(m), Source::Stream(stream)) => {
            let probe = stream.step(1).expect("validated: streams are non-empty");
            if !m.params().same_layout(probe) {
                return Err(Error::Config(
                    "gradient stream layout does not match the model's parameters \
                     (names and shapes must agree)"
                        .into(),
                ));
            }
            m.params().clone()
        }
        (Some(m), _) => m.params().clone(),
        (None, Source::Stream(stream)) => stream
            .step(1)
            .expect("validated: streams are non-empty")
            .zeros_like(),
        (None, _) => unreachable!("validation requires a model when there is no stream"),
    };
    let mut state = TrainState::with_params(init_params, cfg.clip.clone(), &cfg.optimizer)?;

    let io_err = |e| Error::io(&metrics_path, e);
    let file = fs::File::create(&metrics_path).map_err(io_err)?;
    let mut sink = std::io::BufWriter::new(file);
    let mut log = MetricsLog::new(hash);
    writeln!(sink, "{}", log.header_line()).map_err(io_err)?;

    let mut trace = match cfg.record_trace {
        true => Some(TraceWriter::create(out_dir.join(TRACE_FILE), false)?),
        false => None,
    };
    let mut reports: Vec<ClipReport> = Vec::new();

    for attempt in 1..=cfg.steps {
        let outcome = match &source {
            Source::Batches { data, batch_size } => {
                let m = model.as_deref().expect("validated: batch runs have a model");
                let batch = match data {
                    Some(d) => d.batch(&mut data_rng, *batch_size)?,
                    None => Batch::empty(),
                };
                // Capture the gradients before the step moves the
                // parameters; evaluation is pure, so the step inside
                // sees bit-identical values.
                let pre_grads = match &trace {
                    Some(_) => Some(m.evaluate(state.params(), &batch)?.1),
                    None => None,
                };
                let out = run_step(&mut state, &cfg.optimizer, &cfg.schedule, m, &batch)?;
                if let (Some(writer), Some(grads), false) =
                    (&mut trace, &pre_grads, out.is_skipped())
                {
                    writer.write_step(state.clip().steps_taken(), grads)?;
                }
                out
            }
            Source::Stream(stream) => {
                let grads = stream.step(attempt).expect("validated: stream covers the run");
                let readout = match &model {
                    Some(m) => Some(m.evaluate(state.params(), &Batch::empty())?.0),
                    None => None,
                };
                let out = run_step_open_loop(
                    &mut state,
                    &cfg.optimizer,
                    &cfg.schedule,
                    readout,
                    grads,
                )?;
                if let (Some(writer), false) = (&mut trace, out.is_skipped()) {
                    writer.write_step(state.clip().steps_taken(), grads)?;
                }
                out
            }
        };

        match outcome {
            StepOutcome::Stepped { loss, lr, report } => {
                let record = MetricsRecord {
                    step: attempt,
                    loss,
                    lr: Some(lr),
                    global_grad_norm: global_pre_norm(&report),
                    params: report
                        .units
                        .iter()
                        .map(|u| ParamMetrics {
                            unit: u.unit.clone(),
                            pre_norm: u.pre_norm,
                            h: u.h,
                            post_norm: u.post_norm,
                            gamma: u.gamma_after,
                        })
                        .collect(),
                    skipped: false,
                };
                let log_this = attempt % cfg.log_every == 0 || report.any_clipped();
                reports.push(report);
                if log_this {
                    writeln!(sink, "{}", metrics::record_line(&record)).map_err(io_err)?;
                    log.records.push(record);
                }
            }
            StepOutcome::Skipped { loss, .. } => {
                let record = MetricsRecord {
                    step: attempt,
                    loss,
                    lr: None,
                    global_grad_norm: None,
                    params: vec![],
                    skipped: true,
                };
                writeln!(sink, "{}", metrics::record_line(&record)).map_err(io_err)?;
                log.records.push(record);
                if state.skipped() > cfg.skip_budget {
                    sink.flush().map_err(io_err)?;
                    return Err(Error::Numeric(format!(
                        "aborting after {} skipped steps (budget {}): the run keeps \
                         producing non-finite values",
                        state.skipped(),
                        cfg.skip_budget
                    )));
                }
            }
        }
    }

    sink.flush().map_err(io_err)?;
    let summary_path = out_dir.join(SUMMARY_FILE);
    fs::write(&summary_path, log.to_csv_summary()).map_err(|e| Error::io(&summary_path, e))?;
    if let Some(writer) = trace {
        writer.finish()?;
    }
    if cfg.record_trace {
        write_reports(out_dir.join(REPORTS_FILE), &reports)?;
    }

    Ok(RunArtifacts {
        out_dir: out_dir.to_path_buf(),
        log,
        reports,
        state,
    })
}

/// Norm of the whole pre-clip gradient, reassembled from the unit norms
/// (units partition the gradient, so the squares add exactly).
fn global_pre_norm(report: &ClipReport) -> Option<f64> {
    let sum: f64 = report.units.iter().map(|u| u.pre_norm * u.pre_norm).sum();
    let norm = sum.sqrt();
    norm.is_finite().then_some(norm)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportsHeader {
    v: u32,
}

/// Write clip reports as JSONL: `{"v":1}` then one report per line.
pub fn write_reports(path: impl AsRef<Path>, reports: &[ClipReport]) -> Result<()> {
    let path = path.as_ref();
    let mut out = serde_json::to_string(&ReportsHeader { v: 1 }).expect("header serializes");
    out.push('\n');
    for report in reports {
        out.push_str(&serde_json::to_string(report).expect("report serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a `reports.jsonl` written by [`write_reports`].
pub fn read_reports(path: impl AsRef<Path>) -> Result<Vec<ClipReport>> {
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
    let header: ReportsHeader =
        serde_json::from_str(first).map_err(|e| parse_err(1, format!("bad header: {e}")))?;
    if header.v != 1 {
        return Err(parse_err(1, format!("unsupported reports version {}", header.v)));
    }
    let mut reports = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        reports.push(
            serde_json::from_str(line).map_err(|e| parse_err(idx + 1, e.to_string()))?,
        );
    }
    Ok(reports)
}
