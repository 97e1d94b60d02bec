//! Chernoff rate functions `sup_θ { θ y - c Λ(θ) }`.
//!
//! The objective is concave in `θ` because `Λ` is convex, so a golden-section
//! search over the feasible interval finds the maximizer. The result is then
//! polished by bisecting the sign of the derivative `y - c Λ'(θ)` near the
//! golden-section point, which pins `θ*` down to machine precision.

use crate::dist::ServiceLaw;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum RateError {
    #[error("no θ > 0 satisfies the stability constraint")]
    EmptyFeasibleSet,
    #[error("rate coefficient must be nonnegative, got {0}")]
    NegativeCoefficient(f64),
}

pub const GOLDEN_MAX_ITER: usize = 200;
pub const GOLDEN_REL_TOL: f64 = 1e-10;
/// Relative guard keeping the search away from `θ_max`.
pub const DOMAIN_GUARD: f64 = 1e-12;
const THETA_FLOOR: f64 = 1e-12;

/// `weight · Λ(θ) - budget · θ < 0`: the load a tilted service law puts on a
/// budget of `budget` time units per unit of `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub weight: f64,
    pub budget: f64,
}

impl Stability {
    pub fn holds(&self, law: &ServiceLaw, theta: f64) -> bool {
        match law.logmgf(theta) {
            Ok(l) => self.weight * l - self.budget * theta < 0.0,
            Err(_) => false,
        }
    }

    /// Whether some `θ > 0` satisfies the constraint. Since `Λ` is convex with
    /// `Λ'(0)` equal to the mean, this is exactly `weight · mean < budget`.
    pub fn satisfiable(&self, law: &ServiceLaw) -> bool {
        self.weight * law.mean() < self.budget
    }

    /// Right end of the feasible interval `(0, θ_s)`, found by bisection
    /// (the feasible set is an interval because the constraint is convex).
    pub fn upper_limit(&self, law: &ServiceLaw) -> Result<f64, RateError> {
        if !self.satisfiable(law) {
            return Err(RateError::EmptyFeasibleSet);
        }
        let cap = guarded_max(law);
        if self.weight == 0.0 || (cap.is_finite() && self.holds(law, cap)) {
            return Ok(cap);
        }
        if let ServiceLaw::Deterministic { .. } = law {
            // Linear constraint, feasible everywhere once satisfiable.
            return Ok(f64::INFINITY);
        }
        let mut lo = 0.0;
        let mut hi = cap;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.holds(law, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

/// Value and maximizer of a rate function. `value == +∞` marks an unbounded
/// supremum (the event is impossible at every tilt).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Supremum {
    pub value: f64,
    pub theta: f64,
}

impl Supremum {
    pub const ZERO: Self = Self {
        value: 0.0,
        theta: 0.0,
    };

    pub fn is_unbounded(&self) -> bool {
        self.value == f64::INFINITY
    }
}

fn guarded_max(law: &ServiceLaw) -> f64 {
    let t = law.theta_max();
    if t.is_finite() {
        t * (1.0 - DOMAIN_GUARD)
    } else {
        t
    }
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
/// Returns the best abscissa seen and its value.
pub fn golden_section_max<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if hi - lo <= rel_tol * (libm::fabs(x1) + libm::fabs(x2)).max(f64::MIN_POSITIVE) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `sup { θ y - coeff · Λ(θ) : 0 < θ < θ_max, stability }`.
pub fn sup_rate(
    y: f64,
    coeff: f64,
    law: &ServiceLaw,
    constraint: Option<&Stability>,
) -> Result<Supremum, RateError> {
    if coeff.is_nan() || coeff < 0.0 {
        return Err(RateError::NegativeCoefficient(coeff));
    }
    let upper = match constraint {
        Some(c) => c.upper_limit(law)?.min(guarded_max(law)),
        None => guarded_max(law),
    };
    let objective = |t: f64| t * y - coeff * law.logmgf(t).unwrap_or(f64::INFINITY);
    let slope = |t: f64| y - coeff * law.logmgf_derivative(t).unwrap_or(f64::INFINITY);

    // Concave objective with nonpositive slope at the origin: the supremum
    // sits at θ = 0.
    if slope(0.0) <= 0.0 {
        return Ok(Supremum::ZERO);
    }
    // Still increasing at the right end of the feasible set.
    if upper.is_infinite() {
        let mut t = 1.0;
        while slope(t) > 0.0 {
            t *= 2.0;
            if t > 1e12 {
                return Ok(Supremum {
                    value: f64::INFINITY,
                    theta: f64::INFINITY,
                });
            }
        }
        return Ok(search(objective, slope, t));
    }
    if slope(upper) >= 0.0 {
        return Ok(Supremum {
            value: objective(upper),
            theta: upper,
        });
    }
    Ok(search(objective, slope, upper))
}

fn search(
    objective: impl Fn(f64) -> f64,
    slope: impl Fn(f64) -> f64,
    upper: f64,
) -> Supremum {
    let lo = THETA_FLOOR.min(upper * 0.5);
    let (tg, _) = golden_section_max(&objective, lo, upper, GOLDEN_REL_TOL, GOLDEN_MAX_ITER);
    // Derivative bisection on a small window around the golden-section point.
    let w = 1e-6 * tg.max(1e-6);
    let mut a = (tg - w).max(0.0);
    let mut b = (tg + w).min(upper);
    if !(slope(a) > 0.0 && slope(b) < 0.0) {
        a = 0.0;
        b = upper;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if slope(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let candidates = [tg, a, b];
    let mut best = Supremum {
        value: objective(tg),
        theta: tg,
    };
    for t in candidates {
        let v = objective(t);
        if v > best.value {
            best = Supremum { value: v, theta: t };
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form for exponential service when `λ y > c`.
    fn exp_closed(rate: f64, c: f64, y: f64) -> (f64, f64) {
        let v = rate * y - c - c * libm::log(rate * y / c);
        (v, rate - c / y)
    }

    #[test]
    fn exponential_matches_closed_form() {
        let law = ServiceLaw::Exponential { rate: 1.0 };
        let y = core::f64::consts::E;
        let s = sup_rate(y, 1.0, &law, None).unwrap();
        assert!((s.value - (y - 2.0)).abs() < 1e-12);
        assert!((s.theta - (1.0 - 1.0 / y)).abs() < 1e-10);
        for &(rate, c, y) in &[(0.2, 1.5, 20.0), (3.0, 0.01, 1.0), (1.0 / 3.0, 2.0 / 3.0, 4.0)] {
            let (v, t) = exp_closed(rate, c, y);
            let s = sup_rate(y, c, &ServiceLaw::Exponential { rate }, None).unwrap();
            assert!((s.value - v).abs() < 1e-10, "{rate} {c} {y}");
            assert!((s.theta - t).abs() < 1e-8);
        }
    }

    #[test]
    fn boundary_cases() {
        let e = ServiceLaw::Exponential { rate: 1.0 / 3.0 };
        assert_eq!(sup_rate(3.0, 1.0, &e, None).unwrap(), Supremum::ZERO);
        assert_eq!(sup_rate(1.0, 1.0, &e, None).unwrap(), Supremum::ZERO);

        let det = ServiceLaw::Deterministic { value: 1.0 };
        assert!(sup_rate(1.0, 0.0, &det, None).unwrap().is_unbounded());
        assert!(sup_rate(2.0, 1.0, &det, None).unwrap().is_unbounded());
        assert_eq!(sup_rate(0.5, 1.0, &det, None).unwrap(), Supremum::ZERO);

        let s = sup_rate(1.0, 0.0, &e, None).unwrap();
        assert!((s.value - 1.0 / 3.0).abs() < 1e-11);
        assert!(sup_rate(1.0, -1.0, &e, None).is_err());
    }

    #[test]
    fn constrained_supremum_sits_on_the_boundary() {
        let law = ServiceLaw::Exponential { rate: 1.0 };
        let c = Stability {
            weight: 1.0,
            budget: 2.0,
        };
        let limit = c.upper_limit(&law).unwrap();
        // -ln(1-θ) = 2θ has its nonzero root near 0.7968.
        assert!((-libm::log1p(-limit) - 2.0 * limit).abs() < 1e-9);
        let s = sup_rate(100.0, 1.0, &law, Some(&c)).unwrap();
        assert!((s.theta - limit).abs() < 1e-9);
        let free = sup_rate(1.5, 1.0, &law, Some(&c)).unwrap();
        assert!((free.theta - (1.0 - 1.0 / 1.5)).abs() < 1e-9);

        let tight = Stability {
            weight: 1.0,
            budget: 0.5,
        };
        assert_eq!(sup_rate(2.0, 1.0, &law, Some(&tight)), Err(RateError::EmptyFeasibleSet));

        let det = ServiceLaw::Deterministic { value: 1.0 };
        let c = Stability {
            weight: 1.0,
            budget: 2.0,
        };
        assert!(sup_rate(2.0, 1.0, &det, Some(&c)).unwrap().is_unbounded());
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx) = golden_section_max(|t| -(t - 0.3) * (t - 0.3), 0.0, 1.0, 1e-12, 200);
        assert!((x - 0.3).abs() < 1e-6);
        assert!(fx.abs() < 1e-12);
    }

    #[test]
    fn geometric_rate_is_positive_above_mean() {
        let law = ServiceLaw::Geometric { p: 0.2835 };
        let s = sup_rate(9.0, 1.0, &law, None).unwrap();
        assert!(s.value > 0.0 && s.theta > 0.0 && s.theta < law.theta_max());
        // Derivative vanishes at the maximizer.
        assert!((9.0 - law.logmgf_derivative(s.theta).unwrap()).abs() < 1e-6);
    }
}
