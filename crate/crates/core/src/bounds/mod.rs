//! Chernoff-style bounds on `Pr(A_{g,i}(k) >= n x)`.

pub mod ipq;
pub mod spq;

use crate::dist::ServiceLaw;
use crate::model::{ModelError, SourceId, SystemSpec};
use crate::rate::{RateError, Stability, Supremum};
use crate::schedule::{IterationSchedule, ScheduleError};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum BoundError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("unstable system: per-iteration mean service {load} exceeds the budget {budget}")]
    StabilityViolated { load: f64, budget: f64 },
    #[error("the minimizing ℓ' reached the scan cap {0}")]
    CapReached(u64),
    #[error("this formula requires exponential service times")]
    WrongLaw,
    #[error("update index k={0} is too small (SPQ bounds need k >= 2)")]
    KTooSmall(u64),
}

/// Largest `ℓ'` scanned when minimizing over the backlog depth.
pub const ELL_CAP: u64 = 64;

/// A bound query: source, update index and threshold coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Query {
    pub source: SourceId,
    pub k: u64,
    pub x: f64,
}

impl Query {
    pub const fn new(source: SourceId, k: u64, x: f64) -> Self {
        Self { source, k, x }
    }
}

/// Minimized exponent with its minimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent {
    pub value: f64,
    pub argmin_ell: u64,
    pub theta_star: f64,
}

impl Exponent {
    fn from_terms(terms: impl IntoIterator<Item = (u64, Supremum)>) -> Self {
        let mut best = Exponent {
            value: f64::INFINITY,
            argmin_ell: 0,
            theta_star: f64::INFINITY,
        };
        for (ell, s) in terms {
            if s.value < best.value {
                best = Exponent {
                    value: s.value,
                    argmin_ell: ell,
                    theta_star: s.theta,
                };
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub exponent: f64,
    pub prefactor: f64,
    /// `prefactor · exp(-n · exponent)` clamped to `[0, 1]`.
    pub probability: f64,
    pub argmin_ell: u64,
    pub theta_star: f64,
    /// The threshold does not exceed the deterministic floor `d_g b`, so the
    /// event is certain and the bound is trivial.
    pub below_floor: bool,
}

impl BoundReport {
    fn new(exp: Exponent, prefactor: f64, n: f64, below_floor: bool) -> Self {
        let probability = (prefactor * libm::exp(-n * exp.value)).clamp(0.0, 1.0);
        Self {
            exponent: exp.value,
            prefactor,
            probability,
            argmin_ell: exp.argmin_ell,
            theta_star: exp.theta_star,
            below_floor,
        }
    }
}

/// Quantities of the system that every bound formula needs.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frame {
    pub n: f64,
    pub b: f64,
    pub d_g: f64,
    pub d_tilde: f64,
    /// `Σ_j (d̃ / d_j) α_j` over real groups.
    pub s_alpha: f64,
    pub law: ServiceLaw,
}

impl Frame {
    pub fn new(spec: &SystemSpec, sched: &IterationSchedule, q: &Query) -> Result<Self, BoundError> {
        spec.check_source(q.source)?;
        if q.k == 0 {
            return Err(ScheduleError::KTooSmall(0).into());
        }
        let d_tilde = sched.d_tilde() as f64;
        let s_alpha = spec
            .real_groups()
            .map(|(g, grp)| d_tilde / f64::from(grp.d) * spec.alpha(g))
            .sum();
        Ok(Self {
            n: spec.scale(),
            b: spec.b(),
            d_g: f64::from(spec.group(q.source.g).d),
            d_tilde,
            s_alpha,
            law: *spec.service(),
        })
    }

    /// Stability constraint `Σ (d̃/d_j) α_j Λ(θ) - d̃ θ b < 0`.
    pub fn stability(&self) -> Result<Stability, BoundError> {
        let c = Stability {
            weight: self.s_alpha,
            budget: self.d_tilde * self.b,
        };
        if c.satisfiable(&self.law) {
            Ok(c)
        } else {
            Err(BoundError::StabilityViolated {
                load: self.s_alpha * self.law.mean(),
                budget: c.budget,
            })
        }
    }
}

/// `ℓ · s`, keeping `+∞` and the maximizer intact.
pub(crate) fn scaled(ell: u64, s: Supremum) -> Supremum {
    Supremum {
        value: ell as f64 * s.value,
        theta: s.theta,
    }
}
