//! Upper bounds for the single packet queue.
//!
//! The peak age of update `k` is below `d_g n b + T(k-1) + V(k)`, where
//! `T(k-1)` sums the `|I(k-1)|` services between the previous delivery and
//! this one. A Chernoff bound on that sum gives the exponent
//! `sup { θ (x - d_g b) - (t + 1/n) Λ(θ) }` with `t = |I(k-1)| / n`.
//! No lower bound is provided.

use super::ipq::Regime;
use super::{BoundError, BoundReport, Exponent, Frame, Query};
use crate::dist::ServiceLaw;
use crate::model::{SourceId, SystemSpec};
use crate::rate::sup_rate;
use crate::schedule::IterationSchedule;

fn t_ratio(spec: &SystemSpec, sched: &IterationSchedule, q: &Query) -> Result<f64, BoundError> {
    if q.k < 2 {
        return Err(BoundError::KTooSmall(q.k));
    }
    Ok(sched.count_i(q.source, q.k)? as f64 / spec.scale())
}

fn exponent(f: &Frame, coeff: f64, x: f64) -> Result<Exponent, BoundError> {
    let s = sup_rate(x - f.d_g * f.b, coeff, &f.law, None)?;
    Ok(Exponent {
        value: s.value,
        argmin_ell: 0,
        theta_star: s.theta,
    })
}

/// Finite-`n` upper bound `exp(-n Ĩ(x - d_g b))`.
pub fn theorem3_upper(spec: &SystemSpec, sched: &IterationSchedule, q: &Query) -> Result<BoundReport, BoundError> {
    let f = Frame::new(spec, sched, q)?;
    let t = t_ratio(spec, sched, q)?;
    let e = exponent(&f, t + 1.0 / f.n, q.x)?;
    Ok(BoundReport::new(e, 1.0, f.n, q.x <= f.d_g * f.b))
}

/// Lower bound on the asymptotic decay rate: the `1/n` term vanishes.
pub fn corollary6_asymptotic(spec: &SystemSpec, sched: &IterationSchedule, q: &Query) -> Result<Exponent, BoundError> {
    let f = Frame::new(spec, sched, q)?;
    let t = t_ratio(spec, sched, q)?;
    exponent(&f, t, q.x)
}

/// Sum of the asymptotic exponents over the `d̃/d_g` phases of `t`.
pub fn corollary7_longrun(
    spec: &SystemSpec,
    sched: &IterationSchedule,
    source: SourceId,
    x: f64,
) -> Result<f64, BoundError> {
    let phases = sched.phases(source);
    (2..phases + 2)
        .map(|k| corollary6_asymptotic(spec, sched, &Query::new(source, k, x)).map(|e| e.value))
        .sum()
}

/// Homogeneous exponent: coefficient `(n+1)/n`, or `1` when `n` is `None`
/// (the `n → ∞` limit).
pub fn homogeneous_exponent(n: Option<f64>, b: f64, law: &ServiceLaw, x: f64) -> Result<f64, BoundError> {
    let coeff = n.map_or(1.0, |n| (n + 1.0) / n);
    Ok(sup_rate(x - b, coeff, law, None)?.value)
}

/// Exponential-service plug-in approximations of the asymptotic exponent.
pub fn approx_exponents_spq(
    spec: &SystemSpec,
    sched: &IterationSchedule,
    q: &Query,
    regime: Regime,
) -> Result<f64, BoundError> {
    let ServiceLaw::Exponential { rate: lam } = *spec.service() else {
        return Err(BoundError::WrongLaw);
    };
    let f = Frame::new(spec, sched, q)?;
    let t = t_ratio(spec, sched, q)?;
    let (x, b, dg) = (q.x, f.b, f.d_g);
    let tail = t + t * libm::log(lam * x / t);
    Ok(match regime {
        Regime::ExactPlugIn => lam * x - dg * (lam * b - t * b / x) - tail,
        Regime::LargeRate => lam * x - dg * lam * b - tail,
        Regime::SmallRate => lam * x - dg * (1.0 - t * b / x) - tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GroupSpec, NScaling};
    use alloc::vec;

    fn example_spec() -> SystemSpec {
        SystemSpec::new(
            vec![GroupSpec::new(1, 1), GroupSpec::new(2, 1), GroupSpec::new(3, 1)],
            2.0,
            ServiceLaw::Exponential { rate: 1.0 },
            NScaling::TotalSources,
        )
        .unwrap()
    }

    #[test]
    fn coefficient_uses_interval_count() {
        let spec = example_spec();
        let sched = IterationSchedule::build(&spec);
        let q = Query::new(SourceId::new(2, 1), 2, 9.0);
        let r = theorem3_upper(&spec, &sched, &q).unwrap();
        let expect = sup_rate(9.0 - 4.0, 4.0 / 3.0 + 1.0 / 3.0, spec.service(), None).unwrap();
        assert_eq!(r.exponent, expect.value);
        assert_eq!(r.prefactor, 1.0);
        let inf = corollary6_asymptotic(&spec, &sched, &q).unwrap();
        assert!(inf.value >= r.exponent);
        assert_eq!(
            theorem3_upper(&spec, &sched, &Query::new(SourceId::new(2, 1), 1, 9.0)),
            Err(BoundError::KTooSmall(1))
        );
    }

    #[test]
    fn homogeneous_reduces_to_n_plus_one_over_n() {
        let law = ServiceLaw::Exponential { rate: 0.5 };
        let spec = SystemSpec::new(vec![GroupSpec::new(1, 6)], 3.0, law, NScaling::TotalSources).unwrap();
        let sched = IterationSchedule::build(&spec);
        for i in 1..=6 {
            let r = theorem3_upper(&spec, &sched, &Query::new(SourceId::new(1, i), 3, 7.0)).unwrap();
            let h = homogeneous_exponent(Some(6.0), 3.0, &law, 7.0).unwrap();
            assert!((r.exponent - h).abs() < 1e-14);
        }
    }

    #[test]
    fn exponential_closed_form() {
        let spec = example_spec();
        let sched = IterationSchedule::build(&spec);
        for (g, k, x) in [(1, 2, 5.0), (2, 3, 9.0), (3, 2, 12.0)] {
            let q = Query::new(SourceId::new(g, 1), k, x);
            let t = sched.count_i(q.source, k).unwrap() as f64 / 3.0;
            let y = x - f64::from(spec.group(g).d) * 2.0;
            let closed = y - t - t * libm::log(y / t);
            let e = corollary6_asymptotic(&spec, &sched, &q).unwrap();
            assert!((e.value - closed).abs() < 1e-8);
        }
    }

    #[test]
    fn long_run_sums_phases() {
        let spec = example_spec();
        let sched = IterationSchedule::build(&spec);
        let s = SourceId::new(2, 1);
        let total = corollary7_longrun(&spec, &sched, s, 12.0).unwrap();
        let manual: f64 = (2..5)
            .map(|k| corollary6_asymptotic(&spec, &sched, &Query::new(s, k, 12.0)).unwrap().value)
            .sum();
        assert_eq!(total, manual);
        assert!(total > 0.0);
    }
}
