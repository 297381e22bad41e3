//! Analytic-gradient verification against central finite differences.

use crate::error::{Error, Result};
use crate::harness::ModelSpec;
use crate::models::{Batch, SyntheticData};
use crate::numerics::{finite_diff_grad, Rng};

/// Default finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-6;
/// Default pass tolerance on the maximum relative error.
pub const DEFAULT_FD_TOL: f64 = 1e-5;

/// Worst disagreement found by [`gradcheck_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest relative error over all coordinates.
    pub max_rel_err: f64,
    /// Parameter holding that coordinate.
    pub worst_param: String,
    /// Flat index of the coordinate within the parameter.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compare a model's analytic gradient against central finite
/// differences at a seed-determined random point.
///
/// The relative error per coordinate is `|a − n| / max(|a|, |n|, 1e-3)`
/// — the floor keeps finite-difference noise on near-zero coordinates
/// from drowning the signal while still catching sign flips and scale
/// errors everywhere that matters.
///
/// `corrupt` is a test hook: it perturbs the named parameter's analytic
/// gradient before comparing, so callers can verify that a wrong
/// gradient actually fails.
pub fn gradcheck_model(
    spec: &ModelSpec,
    seed: u64,
    h: f64,
    corrupt: Option<&str>,
) -> Result<GradCheckReport> {
    let mut root = Rng::new(seed);
    let model_seed = root.next_u64();
    let data_seed = root.next_u64();
    let model = spec.build(&mut Rng::new(model_seed))?;

    // Evaluate away from the model's own starting point so every seed
    // checks a genuinely different location.
    let mut point = model.params().clone();
    let jitter = root.normals(point.total_len());
    let mut at = 0;
    for (_, tensor) in point.iter_mut() {
        for v in tensor.data_mut() {
            *v += 0.5 * jitter[at];
            at += 1;
        }
    }

    let batch = if spec.needs_batches() {
        let mut data_rng = Rng::new(data_seed);
        SyntheticData::new(model.as_ref(), &mut data_rng)?.batch(&mut data_rng, 8)?
    } else {
        Batch::empty()
    };

    let (_, mut analytic) = model.evaluate(&point, &batch)?;
    if let Some(name) = corrupt {
        let tensor = analytic.tensor_mut(name).ok_or_else(|| {
            Error::InvalidArgument(format!("no parameter named `{name}` to corrupt"))
        })?;
        tensor.data_mut()[0] += 1.0;
    }
    let numeric = finite_diff_grad(|p| model.evaluate(p, &batch).map(|(l, _)| l), &point, h)?;

    let mut report = GradCheckReport {
        max_rel_err: -1.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for ((name, a), (_, n)) in analytic.iter().zip(numeric.iter()) {
        for (i, (&av, &nv)) in a.data().iter().zip(n.data()).enumerate() {
            let rel = (av - nv).abs() / av.abs().max(nv.abs()).max(1e-3);
            if rel > report.max_rel_err {
                report = GradCheckReport {
                    max_rel_err: rel,
                    worst_param: name.to_string(),
                    worst_index: i,
                    analytic: av,
                    numeric: nv,
                };
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{MlpSpec, QuadraticSpec};

    fn all_specs() -> Vec<ModelSpec> {
        vec![
            ModelSpec::Quadratic(QuadraticSpec {
                dim: 8,
                eig_min: 0.3,
                eig_max: 1.0,
            }),
            ModelSpec::Rosenbrock,
            ModelSpec::Mlp(MlpSpec {
                layers: vec![4, 8, 1],
            }),
        ]
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        for spec in all_specs() {
            for seed in 0..5 {
                let report = gradcheck_model(&spec, seed, DEFAULT_FD_STEP, None).unwrap();
                assert!(
                    report.max_rel_err <= DEFAULT_FD_TOL,
                    "{spec:?} seed {seed}: rel err {} at {}[{}]",
                    report.max_rel_err,
                    report.worst_param,
                    report.worst_index
                );
            }
        }
    }

    #[test]
    fn max_rel_err_is_never_exactly_zero() {
        // Floating point keeps analytic and finite-difference values
        // apart, which is what makes a zero tolerance unreachable.
        for spec in all_specs() {
            let report = gradcheck_model(&spec, 1, DEFAULT_FD_STEP, None).unwrap();
            assert!(report.max_rel_err > 0.0, "{spec:?}");
        }
    }

    #[test]
    fn corruption_hook_surfaces_the_named_parameter() {
        let spec = ModelSpec::Mlp(MlpSpec {
            layers: vec![4, 8, 1],
        });
        let report = gradcheck_model(&spec, 3, DEFAULT_FD_STEP, Some("W1")).unwrap();
        assert_eq!(report.worst_param, "W1");
        assert_eq!(report.worst_index, 0);
        assert!(report.max_rel_err > DEFAULT_FD_TOL);

        let err = gradcheck_model(&spec, 3, DEFAULT_FD_STEP, Some("nope")).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn different_seeds_probe_different_points() {
        let spec = ModelSpec::Rosenbrock;
        let a = gradcheck_model(&spec, 0, DEFAULT_FD_STEP, None).unwrap();
        let b = gradcheck_model(&spec, 1, DEFAULT_FD_STEP, None).unwrap();
        // Same model, different evaluation point, different numbers.
        assert_ne!(a.analytic, b.analytic);
    }
}
