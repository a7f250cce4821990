//! Seeded verification suites and their reports.

pub mod probe;
pub mod report;
pub mod suites;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use probe::{exactness_probe, ProbeResult};
pub use report::{Check, SuiteReport};
pub use suites::*;

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "CALABI_SEED";
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_ORDER: usize = 6;
pub const DEFAULT_TRIALS: usize = 20;

/// Parameters shared by every suite.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Upper bound on the jet order; each check uses the least order that
    /// makes it exact, so raising this changes nothing once it is enough.
    pub order: usize,
    /// Replaces the residual tolerances of the suites when set. Ratio and
    /// count thresholds are not affected.
    pub tol: Option<f64>,
    pub seed: u64,
    pub trials: usize,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            order: DEFAULT_ORDER,
            tol: None,
            seed: default_seed(),
            trials: DEFAULT_TRIALS,
        }
    }
}

/// `$CALABI_SEED` when it parses as an integer, else [`DEFAULT_SEED`].
pub fn default_seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order < 3 {
            return Err(Error::InvalidArgument(format!("jet order must be at least 3, got {}", self.order)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("at least one trial is required".into()));
        }
        if let Some(t) = self.tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidArgument(format!("tolerance must be positive, got {t}")));
            }
        }
        Ok(())
    }

    /// The residual tolerance to use in place of `default`.
    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    /// `need` if the configured cap allows it.
    pub fn jet_order(&self, operation: &'static str, need: usize) -> Result<usize> {
        if need > self.order {
            return Err(Error::InsufficientOrder {
                operation,
                need,
                have: self.order,
            });
        }
        Ok(need)
    }

    /// Generator for one trial of one suite; trials are independent streams
    /// of the same seed so results do not depend on scheduling.
    pub fn rng(&self, suite: u64, trial: usize) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream((suite << 32) | trial as u64);
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn validation() {
        let ok = RunConfig {
            seed: 1,
            ..RunConfig::default()
        };
        assert!(ok.validate().is_ok());
        for bad in [
            RunConfig { order: 2, ..ok.clone() },
            RunConfig { trials: 0, ..ok.clone() },
            RunConfig { tol: Some(-1.0), ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidArgument(_))));
        }
        assert!(matches!(ok.jet_order("x", 7), Err(Error::InsufficientOrder { .. })));
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let c = RunConfig {
            seed: 5,
            ..RunConfig::default()
        };
        let draw = |s, t| c.rng(s, t).random::<u64>();
        assert_eq!(draw(1, 2), draw(1, 2));
        assert_ne!(draw(1, 2), draw(1, 3));
        assert_ne!(draw(1, 2), draw(2, 2));
    }
}
