use crate::clip::{ClipReport, UnitReport};
use crate::error::{Error, Result};
use crate::models::ParamSet;

/// Global-norm clipping: scale every gradient by
/// `h = min(lambda_abs/‖g‖, 1)` where `‖g‖` is the norm of the
/// concatenation of all tensors. Zero gradients pass through (`h = 1`).
pub fn global_clip(grads: &ParamSet, lambda_abs: f64) -> Result<(ParamSet, ClipReport)> {
    if !(lambda_abs > 0.0) || !lambda_abs.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambda_abs must be positive and finite, got {lambda_abs}"
        )));
    }
    if let Some(name) = grads.nonfinite_param() {
        return Err(Error::NonFiniteGradient(name.to_owned()));
    }
    let pre = grads.global_norm()?;
    let h = if pre == 0.0 {
        1.0
    } else {
        (lambda_abs / pre).min(1.0)
    };
    let mut out = ParamSet::new();
    for (name, t) in grads.iter() {
        out.push(name, t.scale(h)?)?;
    }
    let post = out.global_norm()?;
    let report = ClipReport {
        step: 0,
        phase: None,
        units: vec![UnitReport {
            unit: "model".into(),
            pre_norm: pre,
            h,
            post_norm: post,
            gamma_before: None,
            gamma_after: None,
            clipped: h < 1.0,
        }],
    };
    Ok((out, report))
}

/// Parameter-norm-ratio clipping: per tensor,
/// `h_i = min(lambda_agc·max(‖θ_i‖, eps_agc)/‖g_i‖, 1)`.
/// Stateless baseline; zero gradients pass through.
pub fn agc_clip(
    grads: &ParamSet,
    params: &ParamSet,
    lambda_agc: f64,
    eps_agc: f64,
) -> Result<(ParamSet, ClipReport)> {
    for (name, v) in [("lambda_agc", lambda_agc), ("eps_agc", eps_agc)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    if !grads.same_layout(params) {
        return Err(Error::InvalidArgument(
            "gradient and parameter layouts do not match".into(),
        ));
    }
    if let Some(name) = grads.nonfinite_param() {
        return Err(Error::NonFiniteGradient(name.to_owned()));
    }
    if grads.total_len() == 0 {
        return Err(Error::InvalidArgument("empty gradient set".into()));
    }
    let mut out = ParamSet::new();
    let mut units = Vec::with_capacity(grads.len());
    for ((name, g), (_, theta)) in grads.iter().zip(params.iter()) {
        let gn = g.l2_norm()?;
        let wn = theta.l2_norm()?;
        let h = if gn == 0.0 {
            1.0
        } else {
            (lambda_agc * wn.max(eps_agc) / gn).min(1.0)
        };
        let clipped = g.scale(h)?;
        let post = clipped.l2_norm()?;
        out.push(name, clipped)?;
        units.push(UnitReport {
            unit: name.to_owned(),
            pre_norm: gn,
            h,
            post_norm: post,
            gamma_before: None,
            gamma_after: None,
            clipped: h < 1.0,
        });
    }
    Ok((
        out,
        ClipReport {
            step: 0,
            phase: None,
            units,
        },
    ))
}
