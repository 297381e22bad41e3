//! Record a run's exact clipper inputs, replay them, and verify the
//! replay reproduces every clipping decision bit for bit — the library
//! calls behind `adagc run --config ... ` + `adagc replay`.
//!
//! With `record_trace` on, a run writes two extra artifacts next to its
//! metrics: `trace.jsonl` (every gradient tensor the clipper consumed,
//! base64-encoded float bits so nothing is lost to decimal printing)
//! and `reports.jsonl` (what the clipper did at each step). Feeding the
//! trace back through a fresh clipper must reproduce the reports
//! exactly: same norms, same scale factors, same γ trajectory.
//!
//!     cargo run --example trace_roundtrip

use adagc::clip::{AdagcParams, ClipConfig, ClipMode, Granularity};
use adagc::harness::{read_reports, run_experiment, DataSpec, ExperimentConfig, ModelSpec, MlpSpec, SyntheticSpec};
use adagc::stream::{drive_clipper, read_trace};

fn main() -> adagc::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let clip = ClipConfig {
        mode: ClipMode::Adagc(AdagcParams {
            t_start: 10,
            ..AdagcParams::default()
        }),
        granularity: Granularity::PerParameter,
    };
    let cfg = ExperimentConfig {
        model: Some(ModelSpec::Mlp(MlpSpec {
            layers: vec![6, 12, 3],
        })),
        data: DataSpec::Synthetic(SyntheticSpec { batch_size: 8 }),
        clip: clip.clone(),
        steps: 120,
        seed: 4,
        record_trace: true,
        ..ExperimentConfig::default()
    };

    let artifacts = run_experiment(&cfg, dir.path())?;
    let trace_path = artifacts.out_dir.join("trace.jsonl");
    let reports_path = artifacts.out_dir.join("reports.jsonl");
    println!("recorded {} steps to {}", cfg.steps, trace_path.display());

    // Replay: trace -> stream -> fresh clipper of the same config.
    let stream = read_trace(&trace_path)?.into_stream()?;
    let replayed = drive_clipper(&stream, &clip)?;

    let live = &artifacts.reports;
    assert_eq!(live.len(), replayed.len());
    let identical = live.iter().zip(&replayed).all(|(a, b)| a == b);
    println!("replayed {} clip reports, bitwise identical: {identical}", replayed.len());

    // The on-disk copy round-trips through JSON to the same values.
    let from_disk = read_reports(&reports_path)?;
    println!(
        "reports.jsonl parses back identical: {}",
        from_disk == *live
    );

    let last = live.last().unwrap();
    println!();
    println!("final step summary:");
    for unit in &last.units {
        println!(
            "  {}: pre {:.5}, h {:.4}, γ {:.5}",
            unit.unit,
            unit.pre_norm,
            unit.h,
            unit.gamma_after.unwrap()
        );
    }
    Ok(())
}
