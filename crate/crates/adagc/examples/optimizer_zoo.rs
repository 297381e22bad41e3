//! The three supported optimizers on the classic banana valley, all
//! driven through the same clip → update pipeline (clipping disabled so
//! optimizer behavior is undiluted).
//!
//! AdamW takes coordinate-adaptive steps, Lion moves by sign only, and
//! the stability variant of AdamW tempers its step whenever the fresh
//! gradient is large relative to its second-moment history — identical
//! to AdamW here, since a smooth deterministic descent never trips that
//! guard.
//!
//!     cargo run --example optimizer_zoo

use adagc::harness::{run_experiment, DataSpec, ExperimentConfig, ModelSpec};
use adagc::optim::{AdamWConfig, LionConfig, LrSchedule, OptimizerConfig};

fn rosenbrock_run(optimizer: OptimizerConfig, steps: u64) -> adagc::Result<(f64, u64)> {
    let dir = tempfile::tempdir().expect("temp dir");
    let cfg = ExperimentConfig {
        model: Some(ModelSpec::Rosenbrock),
        data: DataSpec::None,
        optimizer,
        schedule: LrSchedule::Constant,
        steps,
        seed: 0,
        log_every: 1,
        ..ExperimentConfig::default()
    };
    let artifacts = run_experiment(&cfg, dir.path())?;
    // Best loss seen and the first step that got under 1e-2.
    let mut best = f64::INFINITY;
    let mut hit = 0;
    for rec in &artifacts.log.records {
        let loss = rec.loss.unwrap();
        if loss < best {
            best = loss;
        }
        if hit == 0 && loss < 1e-2 {
            hit = rec.step;
        }
    }
    Ok((best, hit))
}

fn main() -> adagc::Result<()> {
    let zoo: [(&str, OptimizerConfig, u64); 3] = [
        (
            "adamw  α=1e-3",
            OptimizerConfig::AdamW(AdamWConfig {
                alpha: 1e-3,
                weight_decay: 0.0,
                ..AdamWConfig::default()
            }),
            50_000,
        ),
        (
            "lion   α=1e-4",
            OptimizerConfig::Lion(LionConfig::default()),
            50_000,
        ),
        (
            "stable α=1e-3",
            OptimizerConfig::StableAdamW(AdamWConfig {
                alpha: 1e-3,
                weight_decay: 0.0,
                ..AdamWConfig::default()
            }),
            50_000,
        ),
    ];

    println!("rosenbrock from (-1.2, 1), constant learning rate:");
    println!("{:<14} {:>12}  first step with loss < 1e-2", "optimizer", "best loss");
    for (label, optimizer, steps) in zoo {
        let (best, hit) = rosenbrock_run(optimizer, steps)?;
        let hit = if hit == 0 {
            "never".to_string()
        } else {
            format!("{hit}")
        };
        println!("{label:<14} {best:>12.3e}  {hit}");
    }
    Ok(())
}
