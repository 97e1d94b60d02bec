//! Reference computations shared by the integration tests. Everything here
//! works from the logged service times only, never from the simulator's own
//! waiting-time bookkeeping.
#![allow(dead_code)]

use std::collections::HashMap;

use aoi_grr_core::sim::PeakAgeTrace;
use aoi_grr_core::{GroupSpec, IterationSchedule, NScaling, ServiceLaw, SourceId, SystemSpec};
use rand::{Rng, RngCore};

pub const TOL: f64 = 1e-9;

/// Random system: 1 to 3 groups with multipliers from {1,2,3,4,6}, 1 to 4
/// sources each, any service law, load between 0.3 and 0.9.
pub fn random_spec<R: Rng>(rng: &mut R) -> SystemSpec {
    let pool = [1u32, 2, 3, 4, 6];
    let eta = rng.random_range(1..=3);
    let mut ds: Vec<u32> = Vec::new();
    while ds.len() < eta {
        let d = pool[rng.random_range(0..pool.len())];
        if !ds.contains(&d) {
            ds.push(d);
        }
    }
    ds.sort_unstable();
    let per_group = rng.random_bool(0.5);
    let uniform = rng.random_range(1..=4);
    let groups: Vec<GroupSpec> = ds
        .iter()
        .map(|&d| GroupSpec::new(d, if per_group { uniform } else { rng.random_range(1..=4) }))
        .collect();
    let law = match rng.random_range(0..3) {
        0 => ServiceLaw::Exponential {
            rate: rng.random_range(0.3..3.0),
        },
        1 => ServiceLaw::Geometric {
            p: rng.random_range(0.2..0.8),
        },
        _ => ServiceLaw::Deterministic {
            value: rng.random_range(0.2..2.0),
        },
    };
    let scaling = if per_group {
        NScaling::PerGroupSize
    } else {
        NScaling::TotalSources
    };
    let probe = SystemSpec::new(groups.clone(), 1.0, law, scaling).unwrap();
    let d_tilde = probe.d_tilde() as f64;
    let work: f64 = probe
        .real_groups()
        .map(|(_, g)| d_tilde / f64::from(g.d) * g.count as f64)
        .sum::<f64>()
        * law.mean();
    let rho = rng.random_range(0.3..0.9);
    // Per-iteration work equals rho times the iteration length d̃ n b.
    let b = work / (rho * d_tilde * probe.scale());
    SystemSpec::new(groups, b, law, scaling).unwrap()
}

/// Iterations needed for at least `records` real deliveries.
pub fn iterations_for(sched: &IterationSchedule, records: u64) -> u64 {
    records.div_ceil(sched.services_per_iteration()) + 1
}

/// Total service per round, indexed by round.
pub fn round_totals(trace: &PeakAgeTrace) -> Vec<f64> {
    let mut totals = Vec::new();
    for s in &trace.slots {
        let r = s.round as usize;
        if totals.len() <= r {
            totals.resize(r + 1, 0.0);
        }
        totals[r] += s.service;
    }
    totals
}

/// Peak age of every real delivery from the unrolled recursion
/// `max_{1≤ℓ≤k̃} {Σ_{r=ℓ}^{k̃-1} V(r) - (k̃-ℓ) n b} + Σ_{J⁻} V + d_g n b`
/// (rounds 1-based). Returns `(slot index, expected peak age)`.
pub fn lemma2_peak_ages(spec: &SystemSpec, trace: &PeakAgeTrace) -> Vec<(usize, f64)> {
    let nb = spec.base_period();
    let totals = round_totals(trace);
    // backlog[j] is the max term for k̃ = j + 1, by backward summation.
    let backlog: Vec<f64> = (0..totals.len())
        .map(|j| {
            let mut best: f64 = 0.0;
            let mut acc = 0.0;
            for r in (0..j).rev() {
                acc += totals[r] - nb;
                best = best.max(acc);
            }
            best
        })
        .collect();
    let mut out = Vec::new();
    let mut round = u64::MAX;
    let mut in_round = 0.0;
    for (idx, s) in trace.slots.iter().enumerate() {
        if s.round != round {
            round = s.round;
            in_round = 0.0;
        }
        in_round += s.service;
        if s.is_virtual {
            continue;
        }
        let d = u64::from(spec.group(s.source.g).d);
        let k_tilde = d * (s.k - 1) + 1;
        assert_eq!(k_tilde - 1, s.round, "update {} of {} in an unexpected round", s.k, s.source);
        let expected = backlog[s.round as usize] + in_round + d as f64 * nb;
        out.push((idx, expected));
    }
    out
}

/// Largest violation of `W(k) = (W(k-1) + V(k-1) - n b)^+` for source (1,1),
/// with `V(k-1)` the total service of the round holding its `(k-1)`-th update.
pub fn lemma1_max_residual(spec: &SystemSpec, trace: &PeakAgeTrace) -> (f64, usize) {
    let nb = spec.base_period();
    let totals = round_totals(trace);
    let w: Vec<(u64, f64)> = trace
        .records(SourceId::new(1, 1))
        .map(|s| (s.round, s.waiting()))
        .collect();
    let mut worst: f64 = 0.0;
    for pair in w.windows(2) {
        let (r_prev, w_prev) = pair[0];
        let expect = (w_prev + totals[r_prev as usize] - nb).max(0.0);
        worst = worst.max((pair[1].1 - expect).abs());
    }
    (worst, w.len().saturating_sub(1))
}

/// Residuals of `W(k) = W(k-1) + T(k-1) + N(k-1) - (p(k-1)+1) d_g n b` over
/// all real sources, with `T` and `N` summed from the slot log, and the
/// number of records breaking `A < d_g n b + T + V`, split by `d_g`.
pub struct Lemma3Check {
    pub max_residual: f64,
    pub checked: usize,
    pub bound_violations_unit_d: usize,
    pub bound_violations_larger_d: usize,
}

pub fn lemma3_check(spec: &SystemSpec, trace: &PeakAgeTrace) -> Lemma3Check {
    let nb = spec.base_period();
    let mut last: HashMap<SourceId, usize> = HashMap::new();
    let mut out = Lemma3Check {
        max_residual: 0.0,
        checked: 0,
        bound_violations_unit_d: 0,
        bound_violations_larger_d: 0,
    };
    for (idx, s) in trace.slots.iter().enumerate() {
        if s.is_virtual {
            continue;
        }
        if let Some(&prev) = last.get(&s.source) {
            let p = &trace.slots[prev];
            let busy: f64 = trace.slots[prev..idx].iter().map(|x| x.service).sum();
            let idle: f64 = trace.slots[prev + 1..=idx].iter().map(|x| x.idle_before).sum();
            let d = f64::from(spec.group(s.source.g).d);
            let expect = p.waiting() + busy + idle - (s.preempted as f64 + 1.0) * d * nb;
            out.max_residual = out.max_residual.max((s.waiting() - expect).abs());
            out.checked += 1;
            if s.peak_age() >= d * nb + busy + s.service {
                if d == 1.0 {
                    out.bound_violations_unit_d += 1;
                } else {
                    out.bound_violations_larger_d += 1;
                }
            }
        }
        last.insert(s.source, idx);
    }
    out
}

/// One delivery of the reference round-robin simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrEvent {
    pub i: usize,
    pub k: u64,
    pub packet: u64,
    pub start: f64,
    pub service: f64,
    pub departure: f64,
}

/// Plain round robin over `n` sources sharing the period `n b`: visit
/// sources in order, idle until the visited source has a fresh packet.
/// `freshest` selects the single-packet discipline.
pub fn round_robin_reference<R: RngCore>(
    n: usize,
    nb: f64,
    law: &ServiceLaw,
    rounds: u64,
    freshest: bool,
    rng: &mut R,
) -> Vec<RrEvent> {
    let mut now: f64 = 0.0;
    let mut delivered = vec![0u64; n];
    let mut last_packet = vec![0u64; n];
    let mut out = Vec::new();
    for _ in 0..rounds {
        for i in 0..n {
            let mut q = last_packet[i] + 1;
            if freshest {
                while (q as f64) * nb <= now {
                    q += 1;
                }
            }
            let arrival = (q - 1) as f64 * nb;
            let start = now.max(arrival);
            let v = law.sample(rng);
            now = start + v;
            delivered[i] += 1;
            last_packet[i] = q;
            out.push(RrEvent {
                i: i + 1,
                k: delivered[i],
                packet: q,
                start,
                service: v,
                departure: now,
            });
        }
    }
    out
}
