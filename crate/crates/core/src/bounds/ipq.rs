//! Bounds for the infinite packet queue.
//!
//! With backlog depth `ℓ'` counted in iterations, the upper-bound exponent is
//! the minimum over `ℓ' = 0..k'` of
//!
//! * `ℓ' = 0`: `sup { θ (x - d_g b) - m Λ(θ) }`;
//! * `ℓ' ≥ 1`: `ℓ' sup { θ (x/ℓ' + ((ℓ'-1) d̃ - d_g) b / ℓ') - (S_α + m/ℓ') Λ(θ) }`,
//!
//! where `m = |J⁻| / n` and `S_α = Σ_j (d̃ / d_j) α_j`. The lower bound uses
//! the argument `x/ℓ' + (ℓ' d̃ - d_g) b / ℓ'` and the coefficient
//! `((ℓ'-1) S_α + m) / ℓ'` instead.

use alloc::vec::Vec;

use super::{scaled, BoundError, BoundReport, Exponent, Frame, Query, ELL_CAP};
use crate::dist::ServiceLaw;
use crate::model::{SourceId, SystemSpec};
use crate::rate::{sup_rate, Stability, Supremum};
use crate::schedule::{k_prime, k_tilde, IterationSchedule};

/// Variant of the exponential-service plug-in formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Maximizer `θ* = λ - C/x` substituted without further simplification.
    ExactPlugIn,
    /// `b ≫ 1/λ`.
    LargeRate,
    /// `b ≈ 1/λ`.
    SmallRate,
}

/// Rate term `γ^{(U,ℓ')}`.
pub(crate) fn upper_term(f: &Frame, stab: &Stability, m: f64, ell: u64, x: f64) -> Result<Supremum, BoundError> {
    if ell == 0 {
        return Ok(sup_rate(x - f.d_g * f.b, m, &f.law, Some(stab))?);
    }
    let l = ell as f64;
    let y = x / l + ((l - 1.0) * f.d_tilde - f.d_g) * f.b / l;
    let s = sup_rate(y, f.s_alpha + m / l, &f.law, Some(stab))?;
    Ok(scaled(ell, s))
}

/// Rate term `γ^{(L,ℓ')}`.
pub(crate) fn lower_term(f: &Frame, m: f64, ell: u64, x: f64) -> Result<Supremum, BoundError> {
    if ell == 0 {
        return Ok(sup_rate(x - f.d_g * f.b, m, &f.law, None)?);
    }
    let l = ell as f64;
    let y = x / l + (l * f.d_tilde - f.d_g) * f.b / l;
    let s = sup_rate(y, ((l - 1.0) * f.s_alpha + m) / l, &f.law, None)?;
    Ok(scaled(ell, s))
}

fn m_ratio(spec: &SystemSpec, sched: &IterationSchedule, source: SourceId, k: u64) -> Result<f64, BoundError> {
    Ok(sched.count_j_minus(source, k)? as f64 / spec.scale())
}

/// Largest backlog depth for update `k` of a source with multiplier `d_g`.
pub fn max_depth(d_g: u32, k: u64, d_tilde: u64) -> u64 {
    k_prime(k_tilde(d_g, k), d_tilde)
}

/// Minimizes `term` over `ℓ' = 0..=depth`, capped at [`ELL_CAP`].
fn minimize(
    depth: u64,
    mut term: impl FnMut(u64) -> Result<Supremum, BoundError>,
) -> Result<Exponent, BoundError> {
    let last = depth.min(ELL_CAP);
    let mut terms = Vec::with_capacity(last as usize + 1);
    for ell in 0..=last {
        terms.push((ell, term(ell)?));
    }
    let best = Exponent::from_terms(terms);
    if depth > ELL_CAP && best.argmin_ell == ELL_CAP {
        return Err(BoundError::CapReached(ELL_CAP));
    }
    Ok(best)
}

/// All upper-bound terms `(ℓ', γ^{(U,ℓ')})` of a query, for inspection.
pub fn upper_terms(
    spec: &SystemSpec,
    sched: &IterationSchedule,
    q: &Query,
) -> Result<Vec<(u64, Supremum)>, BoundError> {
    let f = Frame::new(spec, sched, q)?;
    let stab = f.stability()?;
    let m = m_ratio(spec, sched, q.source, q.k)?;
    let depth = max_depth(spec.group(q.source.g).d, q.k, sched.d_tilde()).min(ELL_CAP);
    (0..=depth)
        .map(|ell| Ok((ell, upper_term(&f, &stab, m, ell, q.x)?)))
        .collect()
}

fn upper_exponent(spec: &SystemSpec, sched: &IterationSchedule, q: &Query) -> Result<(Frame, Exponent), BoundError> {
    let f = Frame::new(spec, sched, q)?;
    let stab = f.stability()?;
    let m = m_ratio(spec, sched, q.source, q.k)?;
    let depth = max_depth(spec.group(q.source.g).d, q.k, sched.d_tilde());
    let e = minimize(depth, |ell| upper_term(&f, &stab, m, ell, q.x))?;
    Ok((f, e))
}

fn lower_exponent(spec: &SystemSpec, sched: &IterationSchedule, q: &Query) -> Result<(Frame, Exponent), BoundError> {
    let f = Frame::new(spec, sched, q)?;
    f.stability()?;
    let m = m_ratio(spec, sched, q.source, q.k)?;
    let depth = max_depth(spec.group(q.source.g).d, q.k, sched.d_tilde());
    let e = minimize(depth, |ell| lower_term(&f, m, ell, q.x))?;
    Ok((f, e))
}

/// Finite-`n` upper bound with prefactor `d̃ c' + 1`, `c' = argmin + 1`.
pub fn theorem1_upper(spec: &SystemSpec, sched: &IterationSchedule, q: &Query) -> Result<BoundReport, BoundError> {
    let (f, e) = upper_exponent(spec, sched, q)?;
    let prefactor = f.d_tilde * (e.argmin_ell + 1) as f64 + 1.0;
    Ok(BoundReport::new(e, prefactor, f.n, q.x <= f.d_g * f.b))
}

/// Finite-`n` lower bound `exp(-n (min γ^L + ε))`.
pub fn theorem2_lower(
    spec: &SystemSpec,
    sched: &IterationSchedule,
    q: &Query,
    epsilon: f64,
) -> Result<BoundReport, BoundError> {
    let (f, mut e) = lower_exponent(spec, sched, q)?;
    e.value += epsilon;
    Ok(BoundReport::new(e, 1.0, f.n, q.x <= f.d_g * f.b))
}

/// Limits of `-(1/n) log Pr(A ≥ n x)` as `n → ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRateBounds {
    /// From the lower bound on the probability: the decay rate is at most this.
    pub at_most: Exponent,
    /// From the upper bound on the probability: the decay rate is at least this.
    pub at_least: Exponent,
}

/// Asymptotic decay-rate bounds. The system is scaled with every group's
/// share and the source's position within its group held fixed, so the
/// ratios `m` and `α_j` keep the values they have for `spec`.
pub fn corollary1_asymptotic(
    spec: &SystemSpec,
    sched: &IterationSchedule,
    q: &Query,
) -> Result<DecayRateBounds, BoundError> {
    Ok(DecayRateBounds {
        at_most: lower_exponent(spec, sched, q)?.1,
        at_least: upper_exponent(spec, sched, q)?.1,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongRunBound {
    /// Bound on the long-run fraction of violating updates, clamped to 1.
    pub probability_bound: f64,
    /// Sum over phases of the minimized exponents.
    pub decay_rate_bound: f64,
    /// Minimized exponent of each phase `ζ = 1..d̃/d_g`.
    pub phases: Vec<Exponent>,
}

/// Long-run violation fraction bound: a weighted sum over the `d̃/d_g`
/// phases of the per-update bound with unlimited backlog depth.
pub fn corollary2_longrun(
    spec: &SystemSpec,
    sched: &IterationSchedule,
    source: SourceId,
    x: f64,
) -> Result<LongRunBound, BoundError> {
    let q0 = Query::new(source, 1, x);
    let f = Frame::new(spec, sched, &q0)?;
    let stab = f.stability()?;
    let phases = sched.phases(source);
    let weight = f.d_g / f.d_tilde;
    let mut probability = 0.0;
    let mut decay = 0.0;
    let mut exps = Vec::with_capacity(phases as usize);
    for zeta in 1..=phases {
        let m = m_ratio(spec, sched, source, zeta)?;
        let e = minimize(u64::MAX, |ell| upper_term(&f, &stab, m, ell, x))?;
        probability += weight * (f.d_tilde * (e.argmin_ell + 1) as f64 + 1.0) * libm::exp(-f.n * e.value);
        decay += e.value;
        exps.push(e);
    }
    Ok(LongRunBound {
        probability_bound: probability.min(1.0),
        decay_rate_bound: decay,
        phases: exps,
    })
}

/// Homogeneous exponent `min_{0 ≤ ℓ' ≤ k-1} γ_i^{(ℓ')}` with `frac = i/n`,
/// under the constraint `Λ(θ) < θ b`.
pub fn homogeneous_exponent(frac: f64, b: f64, law: &ServiceLaw, k: u64, x: f64) -> Result<Exponent, BoundError> {
    let stab = Stability { weight: 1.0, budget: b };
    if !stab.satisfiable(law) {
        return Err(BoundError::StabilityViolated {
            load: law.mean(),
            budget: b,
        });
    }
    if k == 0 {
        return Err(BoundError::KTooSmall(0));
    }
    minimize(k - 1, |ell| {
        if ell == 0 {
            return Ok(sup_rate(x - b, frac, law, Some(&stab))?);
        }
        let l = ell as f64;
        let s = sup_rate(x / l + (l - 1.0) * b / l, (l + frac) / l, law, Some(&stab))?;
        Ok(scaled(ell, s))
    })
}

/// Upper and lower bounds for `n` identical sources (`d = 1`), source `i`.
/// Both share one exponent; the upper bound carries the prefactor `c' + 1`.
pub fn homogeneous_bounds(
    n: usize,
    b: f64,
    law: &ServiceLaw,
    i: usize,
    k: u64,
    x: f64,
) -> Result<(BoundReport, BoundReport), BoundError> {
    let e = homogeneous_exponent(i as f64 / n as f64, b, law, k, x)?;
    let nf = n as f64;
    let floor = x <= b;
    Ok((
        BoundReport::new(e, (e.argmin_ell + 2) as f64, nf, floor),
        BoundReport::new(e, 1.0, nf, floor),
    ))
}

/// The exponential-service plug-in approximations of the upper-bound
/// exponent, minimized over the backlog depth.
pub fn approx_exponents_ipq(
    spec: &SystemSpec,
    sched: &IterationSchedule,
    q: &Query,
    regime: Regime,
) -> Result<f64, BoundError> {
    let ServiceLaw::Exponential { rate: lam } = *spec.service() else {
        return Err(BoundError::WrongLaw);
    };
    let f = Frame::new(spec, sched, q)?;
    let m = m_ratio(spec, sched, q.source, q.k)?;
    let depth = max_depth(spec.group(q.source.g).d, q.k, sched.d_tilde()).min(ELL_CAP);
    let (x, b, dg, dt) = (q.x, f.b, f.d_g, f.d_tilde);
    let lb = match regime {
        Regime::SmallRate => 1.0,
        _ => lam * b,
    };
    let mut best = f64::INFINITY;
    for ell in 0..=depth {
        let l = ell as f64;
        let c = l * f.s_alpha + m;
        let log_term = c * (1.0 + libm::log(lam * x / c));
        let v = match (regime, ell) {
            (Regime::LargeRate, 0) => lam * (x - dg * b),
            (_, 0) => lam * x - dg * (lb - m * b / x) - log_term,
            (Regime::LargeRate, _) => {
                lam * x - dg * lam * b - dt * (l - 1.0) * c * b / x + (l - 1.0) * dt * lb - log_term
            }
            _ => lam * x - dg * (lb - c * b / x) - dt * (l - 1.0) * c * b / x - log_term + (l - 1.0) * dt * lb,
        };
        best = best.min(v);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GroupSpec, NScaling};
    use alloc::vec;

    fn paper_spec(mean: f64, per_group: usize) -> SystemSpec {
        SystemSpec::new(
            vec![
                GroupSpec::new(1, per_group),
                GroupSpec::new(2, per_group),
                GroupSpec::new(4, per_group),
            ],
            5.0,
            ServiceLaw::Exponential { rate: 1.0 / mean },
            NScaling::TotalSources,
        )
        .unwrap()
    }

    #[test]
    fn deterministic_below_floor_is_certain() {
        let spec = SystemSpec::new(
            vec![GroupSpec::new(1, 4)],
            2.0,
            ServiceLaw::Deterministic { value: 1.0 },
            NScaling::TotalSources,
        )
        .unwrap();
        let sched = IterationSchedule::build(&spec);
        // Peak age of source 3 is 3 v + n b = 11 = n x at x = 2.75.
        let r = theorem1_upper(&spec, &sched, &Query::new(SourceId::new(1, 3), 1, 2.7)).unwrap();
        assert_eq!(r.exponent, 0.0);
        assert_eq!(r.probability, 1.0);
        let r = theorem1_upper(&spec, &sched, &Query::new(SourceId::new(1, 3), 1, 2.8)).unwrap();
        assert_eq!(r.probability, 0.0);
    }

    #[test]
    fn k_one_matches_closed_form() {
        let spec = paper_spec(3.0, 4);
        let sched = IterationSchedule::build(&spec);
        let lam = 1.0 / 3.0;
        for (g, x) in [(1, 8.0), (2, 14.0), (3, 25.0)] {
            let s = SourceId::new(g, 4);
            let r = theorem1_upper(&spec, &sched, &Query::new(s, 1, x)).unwrap();
            let m = sched.count_j_minus(s, 1).unwrap() as f64 / spec.scale();
            let y = x - f64::from(spec.group(g).d) * 5.0;
            let closed = lam * y - m - m * libm::log(lam * y / m);
            assert!((r.exponent - closed).abs() < 1e-8, "g={g}: {} vs {closed}", r.exponent);
            assert_eq!(r.argmin_ell, 0);
            assert_eq!(r.prefactor, 5.0);
            // The aligned plug-in reproduces the same value; the paper's
            // unshifted plug-in can only be smaller than the supremum.
            let plug = approx_exponents_ipq(&spec, &sched, &Query::new(s, 1, x), Regime::ExactPlugIn).unwrap();
            assert!(plug <= r.exponent + 1e-12);
        }
    }

    #[test]
    fn lower_bound_never_exceeds_upper_bound() {
        let spec = paper_spec(3.0, 3);
        let sched = IterationSchedule::build(&spec);
        for g in 1..=3 {
            for k in 1..8 {
                for x in [6.0, 10.0, 20.0, 30.0] {
                    let q = Query::new(SourceId::new(g, 3), k, x);
                    let u = theorem1_upper(&spec, &sched, &q).unwrap();
                    let l = theorem2_lower(&spec, &sched, &q, 0.0).unwrap();
                    assert!(l.probability <= u.probability, "{q:?}");
                    assert!(l.exponent >= u.exponent);
                    let l2 = theorem2_lower(&spec, &sched, &q, 0.1).unwrap();
                    assert!((l2.exponent - l.exponent - 0.1).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn exponent_grows_with_threshold() {
        let spec = paper_spec(3.0, 2);
        let sched = IterationSchedule::build(&spec);
        let s = SourceId::new(2, 1);
        let mut prev = 0.0;
        for j in 0..60 {
            let x = 5.0 + j as f64;
            let e = theorem1_upper(&spec, &sched, &Query::new(s, 5, x)).unwrap().exponent;
            assert!(e >= prev - 1e-12);
            prev = e;
        }
    }

    #[test]
    fn unstable_system_is_rejected() {
        let spec = paper_spec(9.0, 2);
        let sched = IterationSchedule::build(&spec);
        let q = Query::new(SourceId::new(1, 1), 2, 10.0);
        assert!(matches!(
            theorem1_upper(&spec, &sched, &q),
            Err(BoundError::StabilityViolated { .. })
        ));
    }

    #[test]
    fn homogeneous_bounds_share_exponent() {
        let law = ServiceLaw::Exponential { rate: 1.0 / 3.0 };
        for k in 1..6 {
            for i in 1..=5 {
                let (u, l) = homogeneous_bounds(5, 5.0, &law, i, k, 10.0).unwrap();
                assert_eq!(u.exponent, l.exponent);
                assert!(u.prefactor >= 2.0 && l.prefactor == 1.0);
            }
        }
    }

    #[test]
    fn large_b_homogeneous_matches_single_packet_exponent() {
        let law = ServiceLaw::Exponential { rate: 1.0 };
        let (b, x) = (20.0, 26.0);
        let e = homogeneous_exponent(1.0, b, &law, 4, x).unwrap();
        assert_eq!(e.argmin_ell, 0);
        let spq = sup_rate(x - b, 1.0, &law, None).unwrap();
        assert!((e.value - spq.value).abs() < 1e-9);
    }

    #[test]
    fn long_run_phase_count() {
        let spec = SystemSpec::new(
            vec![GroupSpec::new(1, 2), GroupSpec::new(2, 2)],
            5.0,
            ServiceLaw::Exponential { rate: 1.0 / 3.0 },
            NScaling::TotalSources,
        )
        .unwrap();
        let sched = IterationSchedule::build(&spec);
        let g1 = corollary2_longrun(&spec, &sched, SourceId::new(1, 2), 9.0).unwrap();
        let g2 = corollary2_longrun(&spec, &sched, SourceId::new(2, 2), 14.0).unwrap();
        assert_eq!(g1.phases.len(), 2);
        assert_eq!(g2.phases.len(), 1);
        let single = &g2.phases[0];
        let expect = (2.0 * (single.argmin_ell + 1) as f64 + 1.0) * libm::exp(-4.0 * single.value);
        assert!((g2.probability_bound - expect.min(1.0)).abs() < 1e-15);
    }

    #[test]
    fn approximations_require_exponential_law() {
        let spec = SystemSpec::new(
            vec![GroupSpec::new(1, 2)],
            5.0,
            ServiceLaw::Geometric { p: 0.3 },
            NScaling::TotalSources,
        )
        .unwrap();
        let sched = IterationSchedule::build(&spec);
        let q = Query::new(SourceId::new(1, 1), 1, 9.0);
        assert_eq!(
            approx_exponents_ipq(&spec, &sched, &q, Regime::LargeRate),
            Err(BoundError::WrongLaw)
        );
    }
}
