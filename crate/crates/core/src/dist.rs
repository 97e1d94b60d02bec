//! Service-time laws: sampling and the log moment generating function
//! `Λ(θ) = ln E[exp(θ V)]` on the half-line where it is finite.

use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum DistError {
    #[error("θ={theta} is outside the domain [0, {theta_max})")]
    ThetaOutOfDomain { theta: f64, theta_max: f64 },
    #[error("invalid service law parameter")]
    InvalidParameter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServiceLaw {
    /// Exponential with the given rate (mean `1 / rate`).
    Exponential { rate: f64 },
    /// Number of unit slots until the first success over an erasure channel
    /// with per-slot success probability `p`; support `{1, 2, ...}`.
    Geometric { p: f64 },
    /// Constant service time.
    Deterministic { value: f64 },
}

impl ServiceLaw {
    pub fn validate(&self) -> Result<(), DistError> {
        let ok = match *self {
            Self::Exponential { rate } => rate.is_finite() && rate > 0.0,
            Self::Geometric { p } => p > 0.0 && p < 1.0,
            Self::Deterministic { value } => value.is_finite() && value >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(DistError::InvalidParameter)
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Geometric { p } => 1.0 / p,
            Self::Deterministic { value } => value,
        }
    }

    /// Supremum of the domain of `Λ`; `+∞` for deterministic service.
    pub fn theta_max(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => rate,
            Self::Geometric { p } => -libm::log1p(-p),
            Self::Deterministic { .. } => f64::INFINITY,
        }
    }

    fn check_domain(&self, theta: f64) -> Result<(), DistError> {
        let theta_max = self.theta_max();
        if theta.is_nan() || theta < 0.0 || theta >= theta_max {
            Err(DistError::ThetaOutOfDomain { theta, theta_max })
        } else {
            Ok(())
        }
    }

    pub fn logmgf(&self, theta: f64) -> Result<f64, DistError> {
        self.check_domain(theta)?;
        Ok(match *self {
            Self::Exponential { rate } => -libm::log1p(-theta / rate),
            Self::Geometric { p } => {
                // 1 - (1-p) e^θ, computed without cancellation near θ_max.
                let tail = -libm::expm1(theta + libm::log1p(-p));
                libm::log(p) + theta - libm::log(tail)
            }
            Self::Deterministic { value } => theta * value,
        })
    }

    /// `Λ'(θ)`, the mean of the exponentially tilted law.
    pub fn logmgf_derivative(&self, theta: f64) -> Result<f64, DistError> {
        self.check_domain(theta)?;
        Ok(match *self {
            Self::Exponential { rate } => 1.0 / (rate - theta),
            Self::Geometric { p } => 1.0 / -libm::expm1(theta + libm::log1p(-p)),
            Self::Deterministic { value } => value,
        })
    }

    /// Draws one service time. Geometric draws are integer valued.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { rate } => Exp::new(rate).expect("validated rate").sample(rng),
            Self::Geometric { p } => {
                // rand_distr counts failures before the first success.
                let failures = Geometric::new(p).expect("validated p").sample(rng);
                failures as f64 + 1.0
            }
            Self::Deterministic { value } => value,
        }
    }
}
