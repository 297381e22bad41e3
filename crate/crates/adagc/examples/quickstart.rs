//! Smallest end-to-end run: build a config in code, train a tanh MLP on
//! synthetic regression batches with adaptive clipping, and look at the
//! artifacts the harness writes.
//!
//!     cargo run --example quickstart

use adagc::clip::{AdagcParams, ClipConfig, ClipMode, Granularity};
use adagc::harness::{run_experiment, DataSpec, ExperimentConfig, MlpSpec, ModelSpec, SyntheticSpec};

fn main() -> adagc::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");

    let cfg = ExperimentConfig {
        model: Some(ModelSpec::Mlp(MlpSpec {
            layers: vec![8, 16, 4],
        })),
        data: DataSpec::Synthetic(SyntheticSpec { batch_size: 16 }),
        clip: ClipConfig {
            mode: ClipMode::Adagc(AdagcParams {
                t_start: 20,
                ..AdagcParams::default()
            }),
            granularity: Granularity::PerParameter,
        },
        steps: 200,
        seed: 42,
        log_every: 50,
        ..ExperimentConfig::default()
    };

    let artifacts = run_experiment(&cfg, dir.path())?;

    println!("config hash: {}", artifacts.log.config_hash);
    println!("artifacts in: {}", artifacts.out_dir.display());
    println!();
    // Clipped steps force extra records, so sample the table instead of
    // dumping every row.
    println!("step   loss          lr         h(W0)");
    for rec in &artifacts.log.records {
        if rec.step != 1 && rec.step % 50 != 0 {
            continue;
        }
        let h = rec
            .params
            .iter()
            .find(|p| p.unit == "W0")
            .map_or(f64::NAN, |p| p.h);
        println!(
            "{:>4}   {:<12.6}  {:.3e}  {:.4}",
            rec.step,
            rec.loss.unwrap_or(f64::NAN),
            rec.lr.unwrap_or(f64::NAN),
            h
        );
    }

    let first = artifacts.log.records.first().and_then(|r| r.loss).unwrap();
    let last = artifacts.log.records.last().and_then(|r| r.loss).unwrap();
    println!();
    println!("loss {first:.6} -> {last:.6} over {} steps", cfg.steps);
    Ok(())
}
