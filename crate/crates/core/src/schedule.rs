//! Iteration-indexed schedules: learning rate, stochastic-approximation step,
//! and inverse temperature. Iterations are 1-based.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsglError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum Schedule {
    Constant { value: f64 },
    /// `scale * k^(-exponent)`
    PowerLaw { scale: f64, exponent: f64 },
    /// `scale * (k + shift)^(-exponent)`
    ShiftedPowerLaw { scale: f64, shift: f64, exponent: f64 },
    /// `initial * factor^floor((k - 1) / every)`; annealing when `factor > 1`.
    Geometric { initial: f64, factor: f64, every: u64 },
}

impl Schedule {
    pub const fn constant(value: f64) -> Self {
        Schedule::Constant { value }
    }

    /// Value at iteration `k`.
    pub fn eval(&self, k: u64) -> Result<f64> {
        match *self {
            Schedule::Constant { value } => Ok(value),
            Schedule::PowerLaw { scale, exponent } => {
                if k == 0 {
                    return Err(SsglError::Domain("power-law schedule evaluated at k = 0".into()));
                }
                Ok(scale * (k as f64).powf(-exponent))
            }
            Schedule::ShiftedPowerLaw { scale, shift, exponent } => {
                if k == 0 {
                    return Err(SsglError::Domain("power-law schedule evaluated at k = 0".into()));
                }
                Ok(scale * (k as f64 + shift).powf(-exponent))
            }
            Schedule::Geometric { initial, factor, every } => {
                let epoch = k.saturating_sub(1) / every.max(1);
                Ok(initial * factor.powf(epoch as f64))
            }
        }
    }

    /// Infallible evaluation for loops that start at `k = 1`.
    pub(crate) fn at(&self, k: u64) -> f64 {
        self.eval(k.max(1)).expect("k >= 1")
    }

    fn check_positive(&self, what: &str) -> Result<()> {
        let ok = match *self {
            Schedule::Constant { value } => value > 0.0,
            Schedule::PowerLaw { scale, exponent } => scale > 0.0 && exponent.is_finite(),
            Schedule::ShiftedPowerLaw { scale, shift, exponent } => {
                scale > 0.0 && shift > -1.0 && exponent.is_finite()
            }
            Schedule::Geometric { initial, factor, every } => initial > 0.0 && factor > 0.0 && every > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(SsglError::Config(format!("{what} schedule must be positive: {self:?}")))
        }
    }
}

/// The full set of schedules driving one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedules {
    pub lr: Schedule,
    pub sa_step: Schedule,
    pub inv_temp: Schedule,
    pub thinning: u64,
    pub burn_in: u64,
}

impl Schedules {
    /// Learning rate `0.001 k^(-1/3)`, step `10 (k + 1000)^(-0.7)`, `tau = 1`.
    pub fn linear_simulation(iters: u64) -> Self {
        Self {
            lr: Schedule::PowerLaw { scale: 1e-3, exponent: 1.0 / 3.0 },
            sa_step: Schedule::ShiftedPowerLaw { scale: 10.0, shift: 1000.0, exponent: 0.7 },
            inv_temp: Schedule::constant(1.0),
            thinning: 100,
            burn_in: iters / 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lr.check_positive("learning-rate")?;
        self.inv_temp.check_positive("inverse-temperature")?;
        self.sa_step.check_positive("sa-step")?;
        match self.sa_step {
            Schedule::Constant { value } if value <= 1.0 => {}
            Schedule::ShiftedPowerLaw { exponent, .. } | Schedule::PowerLaw { exponent, .. }
                if exponent > 0.0 && exponent <= 1.0 => {}
            other => {
                return Err(SsglError::Config(format!(
                    "sa-step must be a constant in (0, 1] or a decaying power law with exponent in (0, 1]; got {other:?}"
                )))
            }
        }
        let first = self.sa_step.at(1);
        if first > 1.0 {
            return Err(SsglError::Config(format!("sa-step at k = 1 is {first}, must not exceed 1")));
        }
        if let Schedule::Geometric { factor, .. } = self.inv_temp {
            if factor < 1.0 {
                return Err(SsglError::Config("annealed inverse temperature must be nondecreasing".into()));
            }
        }
        if self.thinning == 0 {
            return Err(SsglError::Config("thinning must be a positive integer".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learning_rate_at_first_iteration() {
        let lr = Schedule::PowerLaw { scale: 1e-3, exponent: 1.0 / 3.0 };
        assert_eq!(lr.eval(1).unwrap(), 1e-3);
    }

    #[test]
    fn power_law_rejects_k_zero() {
        let lr = Schedule::PowerLaw { scale: 1e-3, exponent: 1.0 / 3.0 };
        assert!(matches!(lr.eval(0), Err(SsglError::Domain(_))));
    }

    #[test]
    fn constant_is_constant() {
        let c = Schedule::constant(1.0);
        assert_eq!(c.eval(0).unwrap(), 1.0);
        assert_eq!(c.eval(123_456).unwrap(), 1.0);
    }

    #[test]
    fn geometric_grows_per_period() {
        let g = Schedule::Geometric { initial: 2.0, factor: 1.5, every: 10 };
        assert_eq!(g.eval(1).unwrap(), 2.0);
        assert_eq!(g.eval(10).unwrap(), 2.0);
        assert_eq!(g.eval(11).unwrap(), 3.0);
    }

    #[test]
    fn validation_rejects_bad_sa_steps() {
        let mut s = Schedules::linear_simulation(1000);
        s.validate().unwrap();
        s.sa_step = Schedule::constant(1.5);
        assert!(s.validate().is_err());
        s.sa_step = Schedule::ShiftedPowerLaw { scale: 1.0, shift: 1.0, exponent: 1.2 };
        assert!(s.validate().is_err());
        s.sa_step = Schedule::ShiftedPowerLaw { scale: 10.0, shift: 0.0, exponent: 0.7 };
        assert!(s.validate().is_err());
    }
}
