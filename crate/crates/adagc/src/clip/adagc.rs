use crate::clip::state::{UnitLayout, UnitTarget};
use crate::clip::{
    ClipConfig, ClipMode, ClipReport, ClipState, EmaSource, InitStrategy, Phase, UnitReport,
};
use crate::error::{Error, Result};
use crate::models::ParamSet;

/// One step of adaptive gradient clipping.
///
/// Steps are 1-based; step `t = state.step() + 1` runs in the warm-up
/// phase while `t < t_start` and adaptively afterwards.
///
/// Warm-up: the whole gradient set is clipped to `lambda_abs_warmup`
/// (for init strategies that clip at all) and each unit's threshold
/// tracks its initializer — by default the running minimum of post-clip
/// unit norms. Adaptive: each unit is scaled by
/// `h = min(lambda_rel·γ/‖g‖, 1)` and its threshold moves to
/// `γ ← β·γ + (1−β)·‖ĝ‖`.
///
/// Returns the clipped gradients, the advanced state, and a per-unit
/// report. The input state is untouched, so a failed call (for example
/// on a non-finite gradient) leaves no trace — callers skip the step.
pub fn adagc_step(
    state: &ClipState,
    grads: &ParamSet,
    cfg: &ClipConfig,
) -> Result<(ParamSet, ClipState, ClipReport)> {
    let params = match &cfg.mode {
        ClipMode::Adagc(p) => p,
        other => {
            return Err(Error::InvalidArgument(format!(
                "adagc_step requires an adagc clip mode, got {other:?}"
            )))
        }
    };
    cfg.validate()?;
    if let Some(name) = grads.nonfinite_param() {
        return Err(Error::NonFiniteGradient(name.to_owned()));
    }

    let mut next = state.clone();
    match &next.layout {
        None => next.layout = Some(UnitLayout::build(grads, &cfg.granularity)?),
        Some(layout) => layout.check(grads)?,
    }
    let layout = next.layout.clone().expect("set above");

    let t = state.step + 1;
    let first_step = !state.is_initialized();
    if first_step {
        next.gammas = vec![0.0; layout.units.len()];
    }

    let pre: Vec<f64> = layout
        .units
        .iter()
        .map(|(_, target)| layout.norm(grads, target))
        .collect();

    let mut out = grads.clone();
    let mut units = Vec::with_capacity(layout.units.len());

    let phase = if t < params.t_start {
        // --- warm-up ---
        let h = if params.init.clips_during_warmup() {
            let global = layout.norm(grads, &UnitTarget::All);
            if global == 0.0 {
                1.0
            } else {
                (params.lambda_abs_warmup / global).min(1.0)
            }
        } else {
            1.0
        };
        layout.scale(&mut out, &UnitTarget::All, h);
        for (i, (label, target)) in layout.units.iter().enumerate() {
            let post = layout.norm(&out, target);
            let before = if first_step { None } else { Some(next.gammas[i]) };
            let after = match (&params.init, before) {
                (InitStrategy::Constant { value }, _) => *value,
                (InitStrategy::ThresholdedMin { cap }, None) => post.min(*cap),
                (InitStrategy::ThresholdedMin { cap }, Some(prev)) => prev.min(post.min(*cap)),
                (_, None) => post,
                (_, Some(prev)) => prev.min(post),
            };
            next.gammas[i] = after;
            units.push(UnitReport {
                unit: label.clone(),
                pre_norm: pre[i],
                h,
                post_norm: post,
                gamma_before: before,
                gamma_after: Some(after),
                clipped: h < 1.0,
            });
        }
        Phase::Warmup
    } else {
        // --- adaptive ---
        if first_step {
            match &params.init {
                InitStrategy::Constant { value } => next.gammas.fill(*value),
                _ => {
                    // validate() keeps min-track strategies out of this
                    // branch; guard anyway for direct misuse.
                    return Err(Error::Config(
                        "adaptive phase entered with uninitialized thresholds".into(),
                    ));
                }
            }
        }
        for (i, (label, target)) in layout.units.iter().enumerate() {
            let gamma_prev = next.gammas[i];
            // A zero threshold means no usable history (every prior
            // gradient was exactly zero); pass through so the EMA can
            // pick up the first real norm, keeping h in (0, 1].
            let h = if pre[i] == 0.0 || gamma_prev == 0.0 {
                1.0
            } else {
                (params.lambda_rel * gamma_prev / pre[i]).min(1.0)
            };
            layout.scale(&mut out, target, h);
            let post = layout.norm(&out, target);
            let observed = match params.ema {
                EmaSource::PostClip => post,
                EmaSource::RawNorm => pre[i],
            };
            let after = params.beta * gamma_prev + (1.0 - params.beta) * observed;
            next.gammas[i] = after;
            units.push(UnitReport {
                unit: label.clone(),
                pre_norm: pre[i],
                h,
                post_norm: post,
                gamma_before: Some(gamma_prev),
                gamma_after: Some(after),
                clipped: h < 1.0,
            });
        }
        Phase::Adaptive
    };

    next.step = t;
    let report = ClipReport {
        step: t,
        phase: Some(phase),
        units,
    };
    Ok((out, next, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clip::{AdagcParams, Granularity};
    use crate::models::ParamSet;
    use crate::numerics::{Rng, Tensor};

    fn adagc_cfg(params: AdagcParams, granularity: Granularity) -> ClipConfig {
        ClipConfig {
            mode: ClipMode::Adagc(params),
            granularity,
        }
    }

    /// Single-parameter gradient with an exact norm: one nonzero element.
    fn grad_with_norm(norm: f64) -> ParamSet {
        ParamSet::from_entries(vec![("g".into(), Tensor::from_vec(vec![norm, 0.0]))]).unwrap()
    }

    /// Drive `n` steps over hand-picked norms, returning all reports.
    fn drive(norms: &[f64], cfg: &ClipConfig) -> (ClipState, Vec<ClipReport>) {
        let mut state = ClipState::new();
        let mut reports = Vec::new();
        for &n in norms {
            let (_, s, r) = adagc_step(&state, &grad_with_norm(n), cfg).unwrap();
            state = s;
            reports.push(r);
        }
        (state, reports)
    }

    #[test]
    fn adaptive_step_matches_hand_computation() {
        // γ=0.1, λ_rel=1.05, ‖g‖=0.5, β=0.98:
        // h = 1.05·0.1/0.5 = 0.21, post = 0.105, γ' = 0.98·0.1 + 0.02·0.105.
        let cfg = adagc_cfg(
            AdagcParams {
                t_start: 0,
                init: InitStrategy::Constant { value: 0.1 },
                ..AdagcParams::default()
            },
            Granularity::PerParameter,
        );
        let (_, state, report) = adagc_step(&ClipState::new(), &grad_with_norm(0.5), &cfg).unwrap();
        let u = report.unit("g").unwrap();
        assert!((u.h - 0.21).abs() < 1e-15);
        assert!((u.post_norm - 0.105).abs() < 1e-15);
        assert!((state.gamma("g").unwrap() - 0.1001).abs() < 1e-15);
        assert_eq!(report.phase, Some(Phase::Adaptive));
        assert!(u.clipped);
    }

    #[test]
    fn warmup_tracks_running_minimum_of_postclip_norms() {
        // Norms 2.0, 1.5, 1.8 under λ_abs_warmup=1.0 clip to 1.0 each
        // step, so the tracked minimum stays 1.0; with a generous warm-up
        // bound the raw norms flow through and the minimum is 1.5.
        let cfg = adagc_cfg(
            AdagcParams {
                t_start: 100,
                lambda_abs_warmup: 10.0,
                ..AdagcParams::default()
            },
            Granularity::PerParameter,
        );
        let (state, reports) = drive(&[2.0, 1.5, 1.8], &cfg);
        assert_eq!(state.gamma("g").unwrap(), 1.5);
        assert!(reports.iter().all(|r| r.phase == Some(Phase::Warmup)));
        assert_eq!(reports[0].unit("g").unwrap().gamma_before, None);
        assert_eq!(reports[1].unit("g").unwrap().gamma_before, Some(2.0));
    }

    #[test]
    fn warmup_applies_global_clip_with_default_init() {
        let cfg = adagc_cfg(AdagcParams::default(), Granularity::PerParameter);
        let (_, state, report) =
            adagc_step(&ClipState::new(), &grad_with_norm(4.0), &cfg).unwrap();
        let u = report.unit("g").unwrap();
        assert_eq!(u.h, 0.25);
        assert!((u.post_norm - 1.0).abs() < 1e-15);
        assert!((state.gamma("g").unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn min_track_no_warmup_skips_the_global_clip() {
        let cfg = adagc_cfg(
            AdagcParams {
                init: InitStrategy::MinTrackNoWarmup,
                ..AdagcParams::default()
            },
            Granularity::PerParameter,
        );
        let (out, state, report) =
            adagc_step(&ClipState::new(), &grad_with_norm(4.0), &cfg).unwrap();
        assert_eq!(report.unit("g").unwrap().h, 1.0);
        assert_eq!(out.get("g").unwrap().data()[0], 4.0);
        assert_eq!(state.gamma("g").unwrap(), 4.0);
    }

    #[test]
    fn thresholded_min_caps_the_tracked_norm() {
        let cfg = adagc_cfg(
            AdagcParams {
                init: InitStrategy::ThresholdedMin { cap: 0.1 },
                ..AdagcParams::default()
            },
            Granularity::PerParameter,
        );
        let (state, _) = drive(&[2.0, 0.05, 0.3], &cfg);
        assert_eq!(state.gamma("g").unwrap(), 0.05);
        let (state, _) = drive(&[2.0, 3.0], &cfg);
        assert_eq!(state.gamma("g").unwrap(), 0.1);
    }

    #[test]
    fn phase_flips_exactly_at_t_start() {
        let cfg = adagc_cfg(
            AdagcParams {
                t_start: 3,
                ..AdagcParams::default()
            },
            Granularity::PerParameter,
        );
        let (_, reports) = drive(&[1.0, 1.0, 1.0, 1.0], &cfg);
        assert_eq!(reports[0].phase, Some(Phase::Warmup));
        assert_eq!(reports[1].phase, Some(Phase::Warmup));
        assert_eq!(reports[2].phase, Some(Phase::Adaptive));
        assert_eq!(reports[3].phase, Some(Phase::Adaptive));
    }

    #[test]
    fn zero_gradients_decay_gamma_by_beta_exactly() {
        let beta = 0.98;
        let cfg = adagc_cfg(
            AdagcParams {
                t_start: 0,
                beta,
                init: InitStrategy::Constant { value: 0.7 },
                ..AdagcParams::default()
            },
            Granularity::PerParameter,
        );
        let mut state = ClipState::new();
        let mut oracle = 0.7;
        for _ in 0..20 {
            let (out, s, report) = adagc_step(&state, &grad_with_norm(0.0), &cfg).unwrap();
            let u = report.unit("g").unwrap();
            assert_eq!(u.h, 1.0, "zero gradient must pass through");
            assert_eq!(out.get("g").unwrap().data(), &[0.0, 0.0]);
            oracle *= beta;
            assert_eq!(s.gamma("g").unwrap().to_bits(), oracle.to_bits());
            state = s;
        }
    }

    #[test]
    fn zero_threshold_passes_gradients_through() {
        // All-zero history drives γ to 0; a later real gradient must not
        // be multiplied down to nothing.
        let cfg = adagc_cfg(
            AdagcParams {
                t_start: 0,
                init: InitStrategy::Constant { value: 1e-300 },
                beta: 0.5,
                ..AdagcParams::default()
            },
            Granularity::PerParameter,
        );
        let mut state = ClipState::new();
        for _ in 0..2000 {
            let (_, s, _) = adagc_step(&state, &grad_with_norm(0.0), &cfg).unwrap();
            state = s;
        }
        assert_eq!(state.gamma("g").unwrap(), 0.0, "threshold underflowed to zero");
        let (out, _, report) = adagc_step(&state, &grad_with_norm(2.0), &cfg).unwrap();
        assert_eq!(report.unit("g").unwrap().h, 1.0);
        assert_eq!(out.get("g").unwrap().data()[0], 2.0);
    }

    #[test]
    fn nonfinite_gradients_error_and_leave_state_alone() {
        let cfg = adagc_cfg(AdagcParams::default(), Granularity::PerParameter);
        let state = ClipState::new();
        let bad =
            ParamSet::from_entries(vec![("g".into(), Tensor::from_vec(vec![f64::NAN, 0.0]))])
                .unwrap();
        let err = adagc_step(&state, &bad, &cfg).unwrap_err();
        match err {
            Error::NonFiniteGradient(name) => assert_eq!(name, "g"),
            other => panic!("unexpected error {other:?}"),
        }
        assert_eq!(state.step(), 0);
        assert!(!state.is_initialized());
    }

    #[test]
    fn layout_changes_between_steps_are_rejected() {
        let cfg = adagc_cfg(AdagcParams::default(), Granularity::PerParameter);
        let (_, state, _) = adagc_step(&ClipState::new(), &grad_with_norm(1.0), &cfg).unwrap();
        let reshaped =
            ParamSet::from_entries(vec![("g".into(), Tensor::from_vec(vec![1.0, 0.0, 0.0]))])
                .unwrap();
        assert!(adagc_step(&state, &reshaped, &cfg).is_err());
    }

    #[test]
    fn ema_oracle_direct_summation() {
        // Incremental EMA must match γ_n = β^n·γ_0 + (1−β)·Σ β^{n−k}·η_k
        // recomputed from scratch (compensated summation) at every step.
        let beta = 0.98;
        let lambda_rel = 1.05;
        let cfg = adagc_cfg(
            AdagcParams {
                t_start: 0,
                beta,
                lambda_rel,
                init: InitStrategy::Constant { value: 1.0 },
                ..AdagcParams::default()
            },
            Granularity::PerParameter,
        );
        let mut rng = Rng::new(2024);
        let mut state = ClipState::new();
        let mut observed = Vec::new();
        for step in 0..400 {
            let norm = 0.5 + rng.next_f64() + if step % 37 == 0 { 5.0 } else { 0.0 };
            let (_, s, report) = adagc_step(&state, &grad_with_norm(norm), &cfg).unwrap();
            observed.push(report.unit("g").unwrap().post_norm);
            let n = observed.len() as i32;
            let mut acc = beta.powi(n) * 1.0;
            let mut comp = 0.0;
            for (k, eta) in observed.iter().enumerate() {
                let term = (1.0 - beta) * beta.powi(n - 1 - k as i32) * eta;
                let y = term - comp;
                let t = acc + y;
                comp = (t - acc) - y;
                acc = t;
            }
            let got = s.gamma("g").unwrap();
            assert!(
                (got - acc).abs() <= 1e-12 * acc.abs(),
                "step {step}: incremental {got} vs direct {acc}"
            );
            state = s;
        }
    }

    #[test]
    fn raw_norm_ema_uses_preclip_norms() {
        let mk = |ema| {
            adagc_cfg(
                AdagcParams {
                    t_start: 0,
                    init: InitStrategy::Constant { value: 0.1 },
                    ema,
                    ..AdagcParams::default()
                },
                Granularity::PerParameter,
            )
        };
        let (_, post_state, _) =
            adagc_step(&ClipState::new(), &grad_with_norm(10.0), &mk(EmaSource::PostClip))
                .unwrap();
        let (_, raw_state, _) =
            adagc_step(&ClipState::new(), &grad_with_norm(10.0), &mk(EmaSource::RawNorm))
                .unwrap();
        // Post-clip: γ = 0.98·0.1 + 0.02·(1.05·0.1); raw: γ = 0.98·0.1 + 0.02·10.
        assert!((post_state.gamma("g").unwrap() - 0.1001).abs() < 1e-12);
        assert!((raw_state.gamma("g").unwrap() - 0.298).abs() < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn norm_seq() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.0f64..20.0, 5..60)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn h_stays_in_unit_interval_and_bound_holds(norms in norm_seq()) {
                let cfg = adagc_cfg(
                    AdagcParams {
                        t_start: 3,
                        ..AdagcParams::default()
                    },
                    Granularity::PerParameter,
                );
                let mut state = ClipState::new();
                for &n in &norms {
                    let (_, s, report) = adagc_step(&state, &grad_with_norm(n), &cfg).unwrap();
                    let u = report.unit("g").unwrap();
                    prop_assert!(u.h > 0.0 && u.h <= 1.0, "h = {}", u.h);
                    prop_assert!((u.post_norm - u.h * u.pre_norm).abs()
                        <= 1e-12 * u.pre_norm.max(1e-300));
                    if report.phase == Some(Phase::Adaptive) {
                        let bound = 1.05 * u.gamma_before.unwrap();
                        prop_assert!(u.post_norm <= bound * (1.0 + 1e-12) || u.h == 1.0);
                    }
                    if u.pre_norm == 0.0 {
                        prop_assert_eq!(u.h, 1.0);
                    }
                    state = s;
                }
            }

            #[test]
            fn single_shard_equals_per_parameter_bitwise(
                norms in norm_seq(),
                data in proptest::collection::vec(-5.0f64..5.0, 6),
            ) {
                let params = AdagcParams {
                    t_start: 3,
                    ..AdagcParams::default()
                };
                let per_param = adagc_cfg(params.clone(), Granularity::PerParameter);
                let sharded = adagc_cfg(params, Granularity::PerShard { shards_per_param: 1 });
                let mut sp = ClipState::new();
                let mut ss = ClipState::new();
                for &n in &norms {
                    let mut g = ParamSet::new();
                    let scaled: Vec<f64> = {
                        let base = Tensor::from_vec(data.clone());
                        let bn = base.l2_norm().unwrap();
                        if bn == 0.0 {
                            data.clone()
                        } else {
                            base.scale(n / bn).unwrap().data().to_vec()
                        }
                    };
                    g.push("w", Tensor::from_vec(scaled)).unwrap();
                    let (out_p, nsp, rp) = adagc_step(&sp, &g, &per_param).unwrap();
                    let (out_s, nss, rs) = adagc_step(&ss, &g, &sharded).unwrap();
                    for (a, b) in out_p.get("w").unwrap().data().iter()
                        .zip(out_s.get("w").unwrap().data()) {
                        prop_assert_eq!(a.to_bits(), b.to_bits());
                    }
                    prop_assert_eq!(rp.units[0].h.to_bits(), rs.units[0].h.to_bits());
                    prop_assert_eq!(
                        nsp.gamma("w").unwrap().to_bits(),
                        nss.gamma("w.s0").unwrap().to_bits()
                    );
                    sp = nsp;
                    ss = nss;
                }
            }

            #[test]
            fn global_equals_per_parameter_for_single_tensor(norms in norm_seq()) {
                let params = AdagcParams {
                    t_start: 4,
                    ..AdagcParams::default()
                };
                let per_param = adagc_cfg(params.clone(), Granularity::PerParameter);
                let global = adagc_cfg(params, Granularity::Global);
                let mut sp = ClipState::new();
                let mut sg = ClipState::new();
                for &n in &norms {
                    let g = grad_with_norm(n);
                    let (out_p, nsp, _) = adagc_step(&sp, &g, &per_param).unwrap();
                    let (out_g, nsg, _) = adagc_step(&sg, &g, &global).unwrap();
                    for (a, b) in out_p.get("g").unwrap().data().iter()
                        .zip(out_g.get("g").unwrap().data()) {
                        prop_assert_eq!(a.to_bits(), b.to_bits());
                    }
                    prop_assert_eq!(
                        nsp.gamma("g").unwrap().to_bits(),
                        nsg.gamma("model").unwrap().to_bits()
                    );
                    sp = nsp;
                    sg = nsg;
                }
            }
        }
    }
}
