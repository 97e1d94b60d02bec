//! Monte Carlo estimation of violation probabilities.

use aoi_grr_core::{Discipline, Engine, IterationSchedule, ModelError, ServiceLaw, SourceId, SystemSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.575_829_303_548_900_4;
/// One-sided 99% upper limit for zero events is about `ln(100) / reps`;
/// the conventional rounded constant is used.
pub const ZERO_EVENT_UPPER: f64 = 5.3;
/// Two-sided 99% Student-t quantile with 19 degrees of freedom, for 20 batch means.
pub const T99_DF19: f64 = 2.860_934_606_449_914;
pub const BATCHES: usize = 20;
/// Minimum number of post-warmup updates for a long-run estimate.
pub const MIN_LONGRUN_UPDATES: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum McError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("update index must be at least 1")]
    ZeroK,
    #[error("need at least one replication")]
    NoReplications,
    #[error("horizon too short: {got} updates after warmup, need {need}")]
    HorizonTooShort { got: usize, need: usize },
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub reps: u64,
    pub violations: u64,
    /// No violation observed; `ci_high` is the one-sided zero-event limit.
    pub below_resolution: bool,
}

impl McEstimate {
    /// Point estimate with a 99% Wilson interval.
    pub fn wilson(violations: u64, reps: u64) -> Self {
        let n = reps as f64;
        let p = violations as f64 / n;
        if violations == 0 {
            return Self {
                p_hat: 0.0,
                ci_low: 0.0,
                ci_high: (ZERO_EVENT_UPPER / n).min(1.0),
                reps,
                violations,
                below_resolution: true,
            };
        }
        let z2 = Z99 * Z99;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = Z99 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Self {
            p_hat: p,
            ci_low: (center - half).clamp(0.0, p),
            ci_high: (center + half).clamp(p, 1.0),
            reps,
            violations,
            below_resolution: false,
        }
    }

    /// Estimate without sampling error.
    pub fn exact(violations: u64, reps: u64) -> Self {
        let p = violations as f64 / reps as f64;
        Self {
            p_hat: p,
            ci_low: p,
            ci_high: p,
            reps,
            violations,
            below_resolution: false,
        }
    }
}

/// `Pr(A_{source}(k) >= threshold)`, with `threshold` in time units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub source: SourceId,
    pub k: u64,
    pub threshold: f64,
}

/// Generator for replication `rep`: one stream per replication.
pub fn replication_rng(base_seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(rep);
    rng
}

/// Runs one replication and reports which targets were violated.
fn replicate(
    spec: &SystemSpec,
    sched: &IterationSchedule,
    discipline: Discipline,
    targets: &[Target],
    rng: ChaCha8Rng,
    hits: &mut [u64],
) {
    let mut engine = Engine::new(spec, sched, discipline, rng);
    let mut remaining = targets.len();
    while remaining > 0 {
        let slot = engine.step();
        for (t, hit) in targets.iter().zip(hits.iter_mut()) {
            if t.source == slot.source && t.k == slot.k {
                remaining -= 1;
                if slot.peak_age() >= t.threshold {
                    *hit += 1;
                }
            }
        }
    }
}

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, McError> {
    match threads {
        Some(t) => Ok(rayon::ThreadPoolBuilder::new().num_threads(t).build()?.install(f)),
        None => Ok(f()),
    }
}

/// Estimates every target from the same `reps` independent runs.
pub fn estimate_violation(
    spec: &SystemSpec,
    sched: &IterationSchedule,
    discipline: Discipline,
    targets: &[Target],
    reps: u64,
    base_seed: u64,
) -> Result<Vec<McEstimate>, McError> {
    if reps == 0 {
        return Err(McError::NoReplications);
    }
    for t in targets {
        spec.check_source(t.source)?;
        if t.k == 0 {
            return Err(McError::ZeroK);
        }
    }
    let counts = (0..reps)
        .into_par_iter()
        .fold(
            || vec![0u64; targets.len()],
            |mut acc, rep| {
                replicate(spec, sched, discipline, targets, replication_rng(base_seed, rep), &mut acc);
                acc
            },
        )
        .reduce(
            || vec![0u64; targets.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let deterministic = matches!(spec.service(), ServiceLaw::Deterministic { .. });
    Ok(counts
        .into_iter()
        .map(|v| {
            if deterministic {
                McEstimate::exact(v, reps)
            } else {
                McEstimate::wilson(v, reps)
            }
        })
        .collect())
}

/// Fraction of updates of `source` with peak age at least `threshold` over a
/// single run of `iterations` iterations, first iteration excluded. The
/// interval comes from 20 batch means.
pub fn estimate_longrun_fraction(
    spec: &SystemSpec,
    sched: &IterationSchedule,
    discipline: Discipline,
    source: SourceId,
    threshold: f64,
    iterations: u64,
    seed: u64,
) -> Result<McEstimate, McError> {
    spec.check_source(source)?;
    let rounds = iterations * sched.d_tilde();
    let mut engine = Engine::new(spec, sched, discipline, ChaCha8Rng::seed_from_u64(seed));
    let mut hits = Vec::new();
    while engine.round() < rounds {
        let slot = engine.step();
        if slot.source == source && slot.round >= sched.d_tilde() {
            hits.push(slot.peak_age() >= threshold);
        }
    }
    if hits.len() < MIN_LONGRUN_UPDATES {
        return Err(McError::HorizonTooShort {
            got: hits.len(),
            need: MIN_LONGRUN_UPDATES,
        });
    }
    let violations = hits.iter().filter(|h| **h).count() as u64;
    let reps = hits.len() as u64;
    let p = violations as f64 / reps as f64;
    let size = hits.len() / BATCHES;
    let means: Vec<f64> = hits
        .chunks_exact(size)
        .take(BATCHES)
        .map(|c| c.iter().filter(|h| **h).count() as f64 / size as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    let half = T99_DF19 * (var / BATCHES as f64).sqrt();
    if violations == 0 {
        return Ok(McEstimate::wilson(0, reps));
    }
    Ok(McEstimate {
        p_hat: p,
        ci_low: (p - half).clamp(0.0, p),
        ci_high: (p + half).clamp(p, 1.0),
        reps,
        violations,
        below_resolution: false,
    })
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
