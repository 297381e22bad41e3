//! Command-line frontend: runs, trace tooling, sweeps, and the
//! gradient-check oracle.
//!
//! Exit codes are a stable contract: 0 success, 1 failed check,
//! 2 configuration or usage error, 3 numeric abort. No command writes
//! outside its resolved output directory, which comes from `--out`,
//! then the `ADAGC_OUT` environment variable, then (for runs) the
//! config's own `out` field.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{
    compare_runs, gradcheck_model, run_experiment, write_reports, ExperimentConfig,
    MetricsLog, ModelSpec, RunArtifacts, DEFAULT_FD_STEP, DEFAULT_FD_TOL, DEFAULT_SPIKE_FACTOR,
    DEFAULT_SPIKE_WINDOW, METRICS_FILE, REPORTS_FILE, SUMMARY_FILE, TRACE_FILE,
};
use crate::stream::{drive_clipper, gen_stream, read_trace, SpikeEvent, StreamConfig, TraceWriter};

#[derive(Debug, Parser)]
#[command(
    name = "adagc",
    version,
    about = "Adaptive gradient clipping toolkit: deterministic runs, traces, sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run(RunArgs),
    /// Re-drive the clipper over a recorded trace and write its reports.
    Replay(ReplayArgs),
    /// Summarize finished runs side by side (spikes, final loss, clipping).
    Compare(CompareArgs),
    /// Run a config once per combination of swept field values.
    Sweep(SweepArgs),
    /// Check analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic gradient stream as a replayable trace file.
    StreamGen(StreamGenArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config (JSON, strict schema).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed (changes the config hash).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "ADAGC_OUT")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Trace recorded by a run with `record_trace`.
    #[arg(long)]
    trace: PathBuf,
    /// Config whose clip section drives the replay.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, env = "ADAGC_OUT")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Metrics logs (metrics.jsonl paths) to compare.
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    /// Spike window: median over this many preceding values.
    #[arg(long, default_value_t = DEFAULT_SPIKE_WINDOW)]
    window: usize,
    /// Spike factor: a value spikes above k times the window median.
    #[arg(long, default_value_t = DEFAULT_SPIKE_FACTOR)]
    k: f64,
    /// Also write comparison.csv into this directory.
    #[arg(long, env = "ADAGC_OUT")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Base experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Dotted path of a config field to sweep, e.g.
    /// `clip.mode.adagc.lambda_rel` or `seed`. Repeat to sweep several
    /// fields; the Cartesian product of all value lists is run.
    #[arg(long = "param", required = true)]
    params: Vec<String>,
    /// Comma-separated values for the matching --param (JSON scalars;
    /// bare words count as strings). Repeat once per --param.
    #[arg(long = "values", required = true)]
    values: Vec<String>,
    /// Spike window for the joint comparison.
    #[arg(long, default_value_t = DEFAULT_SPIKE_WINDOW)]
    window: usize,
    /// Spike factor for the joint comparison.
    #[arg(long, default_value_t = DEFAULT_SPIKE_FACTOR)]
    k: f64,
    /// Root output directory; each run lands in a value-named subdirectory.
    #[arg(long, env = "ADAGC_OUT")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Model to check: quadratic:<dim>, rosenbrock, or mlp:<w0,w1,...>.
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pass iff the max relative error is at most this.
    #[arg(long, default_value_t = DEFAULT_FD_TOL)]
    tol: f64,
    /// Finite-difference step.
    #[arg(long, default_value_t = DEFAULT_FD_STEP)]
    h: f64,
    /// Test hook: corrupt this parameter's analytic gradient first.
    #[arg(long, hide = true)]
    corrupt: Option<String>,
}

#[derive(Debug, Args)]
struct StreamGenArgs {
    /// Stream spec (JSON): {"config":{...},"spikes":[...]} or a bare
    /// stream config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for trace.jsonl.
    #[arg(long, env = "ADAGC_OUT")]
    out: Option<PathBuf>,
    /// Write norm summaries instead of full tensors.
    #[arg(long)]
    norms_only: bool,
}

/// Parse arguments from the process environment and run. The returned
/// code follows the exit contract; clap itself exits with 2 on usage
/// errors before this returns.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Replay(args) => cmd_replay(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::StreamGen(args) => cmd_stream_gen(args),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })
}

fn resolve_out(flag: Option<PathBuf>, config_out: Option<&str>) -> Result<PathBuf> {
    flag.or_else(|| config_out.map(PathBuf::from)).ok_or_else(|| {
        Error::Config(
            "no output directory: pass --out, set ADAGC_OUT, or put `out` in the config".into(),
        )
    })
}

fn print_run(cfg: &ExperimentConfig, artifacts: &RunArtifacts) {
    let final_loss = artifacts
        .log
        .records
        .iter()
        .rev()
        .find_map(|r| r.loss)
        .map_or_else(|| "n/a".to_string(), |l| format!("{l}"));
    println!(
        "run {}: {} steps ({} skipped), {} records, final loss {}",
        &artifacts.log.config_hash[..12],
        artifacts.state.steps_taken(),
        artifacts.state.skipped(),
        artifacts.log.records.len(),
        final_loss,
    );
    let mut files = format!("{METRICS_FILE}, {SUMMARY_FILE}");
    if cfg.record_trace {
        files = format!("{files}, {TRACE_FILE}, {REPORTS_FILE}");
    }
    println!("wrote {} ({files})", artifacts.out_dir.display());
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg: ExperimentConfig = read_json(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = resolve_out(args.out, cfg.out.as_deref())?;
    let artifacts = run_experiment(&cfg, &out)?;
    print_run(&cfg, &artifacts);
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<()> {
    let cfg: ExperimentConfig = read_json(&args.config)?;
    cfg.clip.validate()?;
    let out = resolve_out(args.out, cfg.out.as_deref())?;
    let stream = read_trace(&args.trace)?.into_stream()?;
    let reports = drive_clipper(&stream, &cfg.clip)?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let path = out.join(REPORTS_FILE);
    write_reports(&path, &reports)?;
    println!("replayed {} steps -> {}", reports.len(), path.display());
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let mut runs = Vec::with_capacity(args.logs.len());
    for path in &args.logs {
        runs.push((path.display().to_string(), MetricsLog::read_jsonl(path)?));
    }
    let summary = compare_runs(&runs, args.window, args.k)?;
    let csv = summary.to_csv();
    print!("{csv}");
    if let Some(out) = args.out {
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        let path = out.join("comparison.csv");
        fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Follow a dotted path into a config document and replace the scalar
/// at its end. The path addresses the *canonical* serialized form, so
/// enum variants appear as segments (`clip.mode.adagc.lambda_rel`).
fn set_config_field(
    doc: &mut serde_json::Value,
    path: &str,
    value: serde_json::Value,
) -> Result<()> {
    let mut cursor = &mut *doc;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        let map = cursor.as_object_mut().ok_or_else(|| {
            Error::Config(format!(
                "--param {path}: `{}` is not an object",
                segments[..i].join(".")
            ))
        })?;
        cursor = map.get_mut(*segment).ok_or_else(|| {
            Error::Config(format!(
                "--param {path}: no field `{segment}` here (the path addresses \
                 the fully-populated config, e.g. clip.mode.adagc.lambda_rel)"
            ))
        })?;
    }
    if cursor.is_object() || cursor.is_array() {
        return Err(Error::Config(format!(
            "--param {path} addresses a composite value; sweeps change scalars"
        )));
    }
    *cursor = value;
    Ok(())
}

/// One swept field: its dotted path, the label key (last segment), and
/// the parsed values.
struct SweptParam {
    path: String,
    key: String,
    values: Vec<(String, serde_json::Value)>,
}

fn parse_sweep_values(raw: &str) -> Result<Vec<(String, serde_json::Value)>> {
    let mut out = Vec::new();
    for piece in raw.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            return Err(Error::Config(
                "--values entries must be non-empty (comma-separated scalars)".into(),
            ));
        }
        let value = serde_json::from_str(piece)
            .unwrap_or_else(|_| serde_json::Value::String(piece.to_string()));
        out.push((piece.to_string(), value));
    }
    Ok(out)
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    if args.params.len() != args.values.len() {
        return Err(Error::Config(format!(
            "{} --param flags but {} --values lists; they pair up one to one",
            args.params.len(),
            args.values.len()
        )));
    }
    let swept: Vec<SweptParam> = args
        .params
        .iter()
        .zip(&args.values)
        .map(|(path, raw)| {
            Ok(SweptParam {
                path: path.clone(),
                key: path.rsplit('.').next().unwrap_or(path).to_string(),
                values: parse_sweep_values(raw)?,
            })
        })
        .collect::<Result<_>>()?;

    let base: ExperimentConfig = read_json(&args.config)?;
    let out_root = resolve_out(args.out, base.out.as_deref())?;
    // Canonical form: every field present, so dotted paths always land.
    let base_doc = serde_json::to_value(&base).expect("config serializes");

    // Cartesian product, lexicographic in flag order.
    let mut combos: Vec<Vec<usize>> = vec![vec![]];
    for param in &swept {
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                (0..param.values.len()).map(move |i| {
                    let mut next = prefix.clone();
                    next.push(i);
                    next
                })
            })
            .collect();
    }

    let mut jobs: Vec<(String, ExperimentConfig, PathBuf)> = Vec::new();
    for combo in &combos {
        let mut doc = base_doc.clone();
        let mut label_parts = Vec::new();
        for (param, &pick) in swept.iter().zip(combo) {
            let (text, value) = &param.values[pick];
            set_config_field(&mut doc, &param.path, value.clone())?;
            label_parts.push(format!("{}={}", param.key, text));
        }
        let label = label_parts.join(",");
        let mut cfg: ExperimentConfig =
            serde_json::from_value(doc).map_err(|e| Error::Config(format!("sweep {label}: {e}")))?;
        // Dense logging keeps every run on the same step grid so the
        // joint comparison is always well-defined.
        cfg.log_every = 1;
        cfg.validate()
            .map_err(|e| Error::Config(format!("sweep {label}: {e}")))?;
        jobs.push((label.clone(), cfg, out_root.join(label)));
    }

    let results: Vec<Result<(String, MetricsLog)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(label, cfg, dir)| {
                scope.spawn(move || {
                    let artifacts = run_experiment(cfg, dir)?;
                    Ok((label.clone(), artifacts.log))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let mut runs = Vec::with_capacity(results.len());
    for result in results {
        runs.push(result?);
    }
    for (label, _) in &runs {
        println!("ran {}", out_root.join(label).display());
    }

    let summary = compare_runs(&runs, args.window, args.k)?;
    let csv = summary.to_csv();
    print!("{csv}");
    let path = out_root.join("comparison.csv");
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<()> {
    if !(args.tol >= 0.0) || !args.tol.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be finite and non-negative, got {}",
            args.tol
        )));
    }
    let spec = ModelSpec::parse_dsl(&args.model)?;
    let report = gradcheck_model(&spec, args.seed, args.h, args.corrupt.as_deref())?;
    println!(
        "gradcheck {}: max rel err {:.3e} at {}[{}] (analytic {:.6e}, numeric {:.6e}), tol {:.1e}",
        args.model,
        report.max_rel_err,
        report.worst_param,
        report.worst_index,
        report.analytic,
        report.numeric,
        args.tol,
    );
    if report.max_rel_err <= args.tol {
        println!("ok");
        Ok(())
    } else {
        Err(Error::CheckFailed(format!(
            "gradient mismatch in `{}`[{}]: rel err {:.3e} exceeds tol {:.1e}",
            report.worst_param, report.worst_index, report.max_rel_err, args.tol
        )))
    }
}

/// Accepts either a full stream spec ({"config":...,"spikes":...}) or a
/// bare stream config.
#[derive(serde::Deserialize)]
#[serde(untagged)]
enum StreamGenConfig {
    Spec {
        config: StreamConfig,
        #[serde(default)]
        spikes: Vec<SpikeEvent>,
    },
    Bare(StreamConfig),
}

fn cmd_stream_gen(args: StreamGenArgs) -> Result<()> {
    let parsed: StreamGenConfig = read_json(&args.config)?;
    let (config, spikes) = match parsed {
        StreamGenConfig::Spec { config, spikes } => (config, spikes),
        StreamGenConfig::Bare(config) => (config, vec![]),
    };
    let out = resolve_out(args.out, None)?;
    let stream = gen_stream(&config, &spikes)?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let path = out.join(TRACE_FILE);
    let mut writer = TraceWriter::create(&path, args.norms_only)?;
    for (i, grads) in stream.iter().enumerate() {
        writer.write_step(i as u64 + 1, grads)?;
    }
    writer.finish()?;
    println!(
        "generated {} steps x {} params -> {}",
        config.steps,
        config.params.len(),
        path.display()
    );
    Ok(())
}
