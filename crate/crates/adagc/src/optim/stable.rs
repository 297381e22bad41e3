use crate::error::Result;
use crate::models::ParamSet;
use crate::optim::adamw::advance_moments;
use crate::optim::{AdamWConfig, OptimizerKind, OptimizerState};

/// Root-mean-square of the update scale for one tensor:
/// `sqrt(mean_j(ĝ_j²/max(v̂_j, ε²)))`. Values above 1 mean the incoming
/// gradient is running hot relative to the second-moment history.
fn update_rms(g: &[f64], v_hat: &[f64], eps: f64) -> f64 {
    let eps2 = eps * eps;
    let sum: f64 = g
        .iter()
        .zip(v_hat)
        .map(|(gj, vj)| gj * gj / vj.max(eps2))
        .sum();
    (sum / g.len() as f64).sqrt()
}

/// One StableAdamW step: AdamW with the learning rate clamped per
/// tensor by the update RMS, `α_{t,i} = α_t / max(1, RMS_i)`, where
/// `RMS_i = sqrt(mean_j(ĝ_j²/max(v̂_j, ε²)))` uses the freshly updated
/// second moments. A tensor hit by a gradient spike has RMS ≫ 1 and
/// takes a proportionally smaller step; in calm conditions RMS ≤ 1 and
/// the step reduces to plain AdamW (at t=1 it is exactly AdamW, since
/// `v̂ = ĝ²` makes RMS = 1).
pub fn stable_adamw_step(
    state: &OptimizerState,
    params: &ParamSet,
    grads_hat: &ParamSet,
    cfg: &AdamWConfig,
    alpha_t: f64,
) -> Result<(OptimizerState, ParamSet)> {
    cfg.validate()?;
    state.check_step_inputs(OptimizerKind::StableAdamW, params, grads_hat, alpha_t)?;

    let mut next = state.clone();
    advance_moments(&mut next, grads_hat, cfg.beta1, cfg.beta2);

    let mut out = params.clone();
    let v = next.v.as_ref().expect("second-moment state present");
    for ((((_, theta), (_, m)), (_, v)), (_, g)) in out
        .iter_mut()
        .zip(next.m.iter())
        .zip(v.iter())
        .zip(grads_hat.iter())
    {
        let rms = update_rms(g.data(), v.data(), cfg.eps);
        let alpha_eff = alpha_t / rms.max(1.0);
        let decay = 1.0 - alpha_eff * cfg.weight_decay;
        for ((tj, mj), vj) in theta.data_mut().iter_mut().zip(m.data()).zip(v.data()) {
            *tj = *tj * decay - alpha_eff * (mj / (vj.sqrt() + cfg.eps));
        }
    }
    Ok((next, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Rng, Tensor};
    use crate::optim::adamw_step;

    fn single(data: Vec<f64>) -> ParamSet {
        ParamSet::from_entries(vec![("w".into(), Tensor::from_vec(data))]).unwrap()
    }

    fn cfg() -> AdamWConfig {
        AdamWConfig {
            weight_decay: 0.0,
            ..AdamWConfig::default()
        }
    }

    #[test]
    fn rms_formula_direct_oracle() {
        // ĝ = 10·√v̂ element-wise → RMS = 10, so α is divided by 10.
        let v_hat: [f64; 3] = [0.04, 1.0, 9.0];
        let g: Vec<f64> = v_hat.iter().map(|v| 10.0 * v.sqrt()).collect();
        let rms = update_rms(&g, &v_hat, 1e-8);
        assert!((rms - 10.0).abs() < 1e-12, "rms = {rms}");
    }

    #[test]
    fn rms_below_one_when_history_dominates() {
        // v̂ large relative to ĝ² → RMS ≤ 1 → α unmodified.
        let v_hat = [100.0, 100.0];
        let g = [1.0, -1.0];
        let rms = update_rms(&g, &v_hat, 1e-8);
        assert!(rms <= 1.0, "rms = {rms}");
    }

    #[test]
    fn rms_floors_tiny_second_moments_at_eps_squared() {
        // v̂ below ε² is floored, bounding the ratio at (g/ε)².
        let rms = update_rms(&[1e-6], &[0.0], 1e-4);
        assert!((rms - 1e-2).abs() < 1e-15, "rms = {rms}");
    }

    #[test]
    fn first_step_is_exactly_adamw() {
        // Fresh state: v̂ = ĝ² → RMS = 1 exactly → same update as AdamW,
        // bitwise (elements chosen with |ĝ| ≥ ε so the floor is idle).
        let theta = single(vec![0.5, -1.5, 2.5]);
        let grads = single(vec![0.3, -0.04, 5.0]);
        let sa = OptimizerState::new(OptimizerKind::StableAdamW, &theta);
        let aw = OptimizerState::new(OptimizerKind::AdamW, &theta);
        let (s1, o1) = stable_adamw_step(&sa, &theta, &grads, &cfg(), 0.01).unwrap();
        let (s2, o2) = adamw_step(&aw, &theta, &grads, &cfg(), 0.01).unwrap();
        for (a, b) in o1
            .get("w")
            .unwrap()
            .data()
            .iter()
            .zip(o2.get("w").unwrap().data())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // And the t=1 moment identities hold on this path too.
        for j in 0..3 {
            let g = grads.get("w").unwrap().data()[j];
            assert_eq!(s1.m().get("w").unwrap().data()[j].to_bits(), g.to_bits());
            assert_eq!(
                s1.v().unwrap().get("w").unwrap().data()[j].to_bits(),
                (g * g).to_bits()
            );
        }
        assert_eq!(s2.t(), 1);
    }

    #[test]
    fn spike_shrinks_the_step_tenfold() {
        // Warm up the moments on unit-scale gradients, then feed a spike
        // with ĝ = 10·√v̂; the realized step must match the formula with
        // α divided by the RMS computed from the post-update moments.
        let theta = single(vec![1.0, 1.0]);
        let mut state = OptimizerState::new(OptimizerKind::StableAdamW, &theta);
        let mut params = theta;
        let c = cfg();
        let mut rng = Rng::new(3);
        for _ in 0..50 {
            let g = single(vec![rng.next_normal(), rng.next_normal()]);
            let (n, o) = stable_adamw_step(&state, &params, &g, &c, 1e-3).unwrap();
            state = n;
            params = o;
        }
        let v_pre: Vec<f64> = state.v().unwrap().get("w").unwrap().data().to_vec();
        let spike = single(v_pre.iter().map(|v| 10.0 * v.sqrt()).collect());
        let before = params.get("w").unwrap().data().to_vec();
        let alpha = 1e-3;
        let (next, after) = stable_adamw_step(&state, &params, &spike, &c, alpha).unwrap();
        let m = next.m().get("w").unwrap().data();
        let v = next.v().unwrap().get("w").unwrap().data();
        let rms = update_rms(spike.get("w").unwrap().data(), v, c.eps);
        assert!(rms > 5.0, "spike should register, rms = {rms}");
        for j in 0..2 {
            let want = before[j] - alpha / rms.max(1.0) * (m[j] / (v[j].sqrt() + c.eps));
            let got = after.get("w").unwrap().data()[j];
            assert_eq!(got.to_bits(), want.to_bits());
        }
    }

    #[test]
    fn calm_gradients_leave_alpha_unmodified() {
        // Constant-magnitude warm-up pins v̂ at ĝ², so a smaller probe
        // gradient has RMS < 1 and the step must realize the full α,
        // bitwise equal to the plain AdamW formula.
        let theta = single(vec![0.0, 0.0]);
        let mut state = OptimizerState::new(OptimizerKind::StableAdamW, &theta);
        let mut params = theta;
        let c = cfg();
        for _ in 0..200 {
            let g = single(vec![0.13, -0.13]);
            let (n, o) = stable_adamw_step(&state, &params, &g, &c, 1e-3).unwrap();
            state = n;
            params = o;
        }
        let probe = single(vec![0.05, -0.05]);
        let before = params.get("w").unwrap().data().to_vec();
        let alpha = 1e-3;
        let (next, after) = stable_adamw_step(&state, &params, &probe, &c, alpha).unwrap();
        let rms = update_rms(
            probe.get("w").unwrap().data(),
            next.v().unwrap().get("w").unwrap().data(),
            c.eps,
        );
        assert!(rms < 1.0, "rms = {rms}");
        let m = next.m().get("w").unwrap().data();
        let v = next.v().unwrap().get("w").unwrap().data();
        for j in 0..2 {
            let want = before[j] - alpha * (m[j] / (v[j].sqrt() + c.eps));
            assert_eq!(after.get("w").unwrap().data()[j].to_bits(), want.to_bits());
        }
    }

    #[test]
    fn rejects_wrong_state_kind() {
        let theta = single(vec![1.0]);
        let grads = single(vec![1.0]);
        let aw = OptimizerState::new(OptimizerKind::AdamW, &theta);
        assert!(stable_adamw_step(&aw, &theta, &grads, &cfg(), 1e-3).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn effective_alpha_never_exceeds_alpha(
                g in proptest::collection::vec(-100.0f64..100.0, 1..8),
                v in proptest::collection::vec(1e-12f64..10.0, 8),
            ) {
                let n = g.len();
                let rms = update_rms(&g, &v[..n], 1e-8);
                let alpha_eff = 1e-3 / rms.max(1.0);
                prop_assert!(alpha_eff <= 1e-3);
                prop_assert!(alpha_eff > 0.0);
            }
        }
    }
}
