use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning-rate schedule, evaluated at 1-based step numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    /// Always the base rate.
    #[default]
    Constant,
    /// Linear ramp 0 → base over `warmup_iters`, then cosine decay to
    /// `min_fraction·base` at `total_iters`, constant afterwards.
    CosineWithLinearWarmup {
        warmup_iters: u64,
        total_iters: u64,
        #[serde(default = "defaults::min_fraction")]
        min_fraction: f64,
    },
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            LrSchedule::Constant => Ok(()),
            LrSchedule::CosineWithLinearWarmup {
                warmup_iters,
                total_iters,
                min_fraction,
            } => {
                if warmup_iters > total_iters {
                    return Err(Error::Config(format!(
                        "warmup_iters ({warmup_iters}) exceeds total_iters ({total_iters})"
                    )));
                }
                if *total_iters == 0 {
                    return Err(Error::Config("total_iters must be positive".into()));
                }
                if !(0.0..=1.0).contains(min_fraction) {
                    return Err(Error::Config(format!(
                        "min_fraction must lie in [0, 1], got {min_fraction}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Learning rate at step `t ≥ 1`.
    pub fn lr_at(&self, base_alpha: f64, t: u64) -> f64 {
        match *self {
            LrSchedule::Constant => base_alpha,
            LrSchedule::CosineWithLinearWarmup {
                warmup_iters,
                total_iters,
                min_fraction,
            } => {
                if t <= warmup_iters {
                    // t = warmup_iters gives t/w = 1 and exactly base.
                    base_alpha * (t as f64 / warmup_iters as f64)
                } else if t >= total_iters {
                    base_alpha * min_fraction
                } else {
                    let progress =
                        (t - warmup_iters) as f64 / (total_iters - warmup_iters) as f64;
                    let cos_term = (1.0 + (std::f64::consts::PI * progress).cos()) / 2.0;
                    base_alpha * (min_fraction + (1.0 - min_fraction) * cos_term)
                }
            }
        }
    }
}

mod defaults {
    pub fn min_fraction() -> f64 {
        0.1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(warmup: u64, total: u64, min_fraction: f64) -> LrSchedule {
        LrSchedule::CosineWithLinearWarmup {
            warmup_iters: warmup,
            total_iters: total,
            min_fraction,
        }
    }

    #[test]
    fn constant_returns_base_everywhere() {
        let s = LrSchedule::Constant;
        for t in [1u64, 17, 100_000] {
            assert_eq!(s.lr_at(0.05, t), 0.05);
        }
    }

    #[test]
    fn warmup_end_hits_base_exactly() {
        let s = cosine(2000, 36000, 0.1);
        assert_eq!(s.lr_at(3e-4, 2000), 3e-4);
    }

    #[test]
    fn warmup_is_linear() {
        let s = cosine(100, 1000, 0.0);
        assert_eq!(s.lr_at(1.0, 1), 0.01);
        assert_eq!(s.lr_at(1.0, 25), 0.25);
        assert_eq!(s.lr_at(1.0, 50), 0.5);
    }

    #[test]
    fn total_hits_min_fraction_exactly() {
        let s = cosine(2000, 36000, 0.1);
        assert_eq!(s.lr_at(3e-4, 36000), 3e-4 * 0.1);
        // And stays clamped there afterwards.
        assert_eq!(s.lr_at(3e-4, 50_000), 3e-4 * 0.1);
    }

    #[test]
    fn decay_midpoint_matches_closed_form() {
        // Midpoint: cos(π/2) = 0 → factor = min + (1−min)/2.
        let s = cosine(0, 1000, 0.2);
        let got = s.lr_at(1.0, 500);
        let want = 0.2 + 0.8 / 2.0;
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
    }

    #[test]
    fn decay_is_monotone_nonincreasing() {
        let s = cosine(10, 500, 0.05);
        let mut prev = f64::INFINITY;
        for t in 10..=500 {
            let lr = s.lr_at(1.0, t);
            assert!(lr <= prev + 1e-18, "t={t}");
            assert!(lr >= 0.05 - 1e-18);
            prev = lr;
        }
    }

    #[test]
    fn validation_rejects_inverted_ranges() {
        assert!(cosine(100, 50, 0.1).validate().is_err());
        assert!(cosine(0, 0, 0.1).validate().is_err());
        assert!(cosine(10, 100, -0.1).validate().is_err());
        assert!(cosine(10, 100, 1.5).validate().is_err());
        assert!(cosine(0, 100, 0.0).validate().is_ok());
        assert!(LrSchedule::Constant.validate().is_ok());
    }

    #[test]
    fn serde_round_trip() {
        let s = cosine(2000, 36000, 0.1);
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("cosine_with_linear_warmup"), "{json}");
        let back: LrSchedule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let c: LrSchedule = serde_json::from_str("\"constant\"").unwrap();
        assert_eq!(c, LrSchedule::Constant);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn lr_always_within_bounds(
                warmup in 0u64..100,
                extra in 1u64..1000,
                min_fraction in 0.0f64..=1.0,
                t in 1u64..2000,
            ) {
                let total = warmup + extra;
                let s = cosine(warmup, total, min_fraction);
                s.validate().unwrap();
                let lr = s.lr_at(1.0, t);
                prop_assert!((0.0..=1.0 + 1e-15).contains(&lr), "lr={lr}");
                if t >= total {
                    prop_assert_eq!(lr, min_fraction);
                }
            }
        }
    }
}
