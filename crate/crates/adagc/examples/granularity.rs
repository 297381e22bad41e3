//! Clipping units don't have to be whole tensors. Here one 1024-wide
//! tensor misbehaves in only its first half, and we compare treating it
//! as a single unit against splitting it into two shards with their own
//! thresholds — the trade-off between per-parameter and finer-grained
//! clipping on fused or sharded weights.
//!
//! The shard split contains the damage: the healthy half passes through
//! at h = 1 while the spiked half gets squashed. One tensor-wide unit
//! scales both halves by the same factor.
//!
//!     cargo run --example granularity

use adagc::clip::{AdagcParams, ClipConfig, ClipMode, ClipStage, Granularity};
use adagc::models::ParamSet;
use adagc::numerics::{Rng, Tensor};

const DIM: usize = 1024;
const SPIKE_STEP: u64 = 150;
const STEPS: u64 = 200;

/// Gaussian gradient, first half multiplied by 40 at the spike step.
fn gradient(rng: &mut Rng, step: u64) -> ParamSet {
    let mut data = rng.normals(DIM);
    for x in &mut data {
        *x *= 0.01;
    }
    if step == SPIKE_STEP {
        for x in &mut data[..DIM / 2] {
            *x *= 40.0;
        }
    }
    ParamSet::from_entries(vec![("w".into(), Tensor::from_vec(data))]).unwrap()
}

fn run(granularity: Granularity) -> adagc::Result<Vec<adagc::clip::ClipReport>> {
    let mut stage = ClipStage::new(ClipConfig {
        mode: ClipMode::Adagc(AdagcParams {
            t_start: 50,
            ..AdagcParams::default()
        }),
        granularity,
    })?;
    let mut rng = Rng::new(99);
    let mut reports = Vec::new();
    for step in 1..=STEPS {
        let grads = gradient(&mut rng, step);
        let (_, report) = stage.step(&grads, None)?;
        reports.push(report);
    }
    Ok(reports)
}

fn main() -> adagc::Result<()> {
    let whole = run(Granularity::PerParameter)?;
    let sharded = run(Granularity::PerShard { shards_per_param: 2 })?;

    let spike = SPIKE_STEP as usize - 1;
    println!("spike at step {SPIKE_STEP}: first half of `w` scaled x40");
    println!();
    println!("one unit (per-parameter):");
    let u = &whole[spike].units[0];
    println!(
        "  {}: pre {:.4} -> post {:.4}, h = {:.4}",
        u.unit, u.pre_norm, u.post_norm, u.h
    );

    println!("two shards (per-shard, 2 per parameter):");
    for u in &sharded[spike].units {
        println!(
            "  {}: pre {:.4} -> post {:.4}, h = {:.4}",
            u.unit, u.pre_norm, u.post_norm, u.h
        );
    }

    let healthy = sharded[spike].unit("w.s1").unwrap();
    println!();
    println!(
        "healthy shard untouched: h(w.s1) = {} (whole-tensor run scaled it by {:.4})",
        healthy.h, whole[spike].units[0].h
    );

    // With one shard per parameter the two granularities are the same
    // partition, so the entire run matches bitwise.
    let single = run(Granularity::PerShard { shards_per_param: 1 })?;
    let identical = whole
        .iter()
        .zip(&single)
        .all(|(a, b)| a.units[0].h == b.units[0].h && a.units[0].post_norm == b.units[0].post_norm);
    println!("per_shard(1) reproduces per-parameter bitwise: {identical}");
    Ok(())
}
