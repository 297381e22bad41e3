//! Sweeping the relative clipping threshold λ_rel and comparing the
//! runs — the library calls behind `adagc sweep`.
//!
//! Each run feeds the same decaying gradient stream with three norm
//! spikes through adaptive clipping at a different λ_rel, then
//! `compare_runs` counts how many spikes survive into the post-clip
//! norm series (a value "spikes" when it exceeds k=2 times the median
//! of the preceding window). A spike survives exactly when λ_rel > k:
//! the clipper caps it at λ_rel·γ and γ tracks the local level the
//! median measures.
//!
//!     cargo run --example sweep_lambda

use adagc::clip::{AdagcParams, ClipConfig, ClipMode, Granularity};
use adagc::harness::{compare_runs, run_experiment, DataSpec, ExperimentConfig, StreamSpec};
use adagc::stream::{NormSchedule, SpikeEvent, SpikeTarget, StreamConfig, StreamParam};

fn main() -> adagc::Result<()> {
    let stream = StreamConfig {
        params: vec![StreamParam {
            name: "w".into(),
            shape: vec![48],
            schedule: NormSchedule::PowerDecay {
                a: 1.0,
                p: 0.4,
                c: 0.02,
            },
        }],
        steps: 900,
        seed: 17,
    };
    let spikes: Vec<SpikeEvent> = [300u64, 550, 800]
        .iter()
        .map(|&step| SpikeEvent {
            param: SpikeTarget::All,
            step,
            factor: 30.0,
        })
        .collect();

    let mut runs = Vec::new();
    for lambda_rel in [1.05, 1.5, 2.5] {
        let cfg = ExperimentConfig {
            data: DataSpec::Stream(StreamSpec {
                config: stream.clone(),
                spikes: spikes.clone(),
            }),
            clip: ClipConfig {
                mode: ClipMode::Adagc(AdagcParams {
                    lambda_rel,
                    ..AdagcParams::default()
                }),
                granularity: Granularity::PerParameter,
            },
            steps: 900,
            seed: 17,
            ..ExperimentConfig::default()
        };
        let dir = tempfile::tempdir().expect("temp dir");
        let artifacts = run_experiment(&cfg, dir.path())?;
        runs.push((format!("lambda_rel={lambda_rel}"), artifacts.log));
    }

    // Pure stream runs have no loss, so the comparison falls back to
    // the post-clip global norm series — exactly where clipping acts.
    let summary = compare_runs(&runs, 25, 2.0)?;
    print!("{}", summary.to_csv());

    println!();
    println!("3 spikes injected; only λ_rel=2.5 > k=2 lets them poke above the");
    println!("detector's 2x-median bar. The clipped fraction is the same in every");
    println!("arm (4 of 900: one steep warm-up step plus the three spikes) because");
    println!("this stream's between-spike norms are deterministic and fall slowly —");
    println!("adaptive clipping stays out of the way except when something jumps.");
    Ok(())
}
