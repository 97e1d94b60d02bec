//! The generalized round-robin service order and the slot counts the bound
//! formulas are built from.
//!
//! One iteration consists of `d̃ = lcm(d_1, .., d_η)` rounds. Round `r`
//! serves every group with `r mod d_g == 0`, groups in ascending order and
//! sources inside a group in ascending order. The schedule is static, so the
//! `k`-th service of source `(g, i)` happens in round `d_g (k - 1)`.

use alloc::vec::Vec;

use crate::model::{lcm, SourceId, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("source {0} is never served by this schedule")]
    SourceNotServedInRound(SourceId),
    #[error("update index k={0} is too small for this count")]
    KTooSmall(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationSchedule {
    d_tilde: u64,
    rounds: Vec<Vec<SourceId>>,
    /// Group index whose slots carry no service time.
    virtual_group: Option<usize>,
}

impl IterationSchedule {
    /// GRR order for a normalized system.
    pub fn build(spec: &SystemSpec) -> Self {
        let d_tilde = spec.groups().iter().fold(1u64, |acc, g| lcm(acc, u64::from(g.d)));
        let rounds = (0..d_tilde)
            .map(|r| {
                spec.groups()
                    .iter()
                    .enumerate()
                    .filter(|(_, g)| r % u64::from(g.d) == 0)
                    .flat_map(|(k, g)| (1..=g.count).map(move |i| SourceId::new(k + 1, i)))
                    .collect()
            })
            .collect();
        Self {
            d_tilde,
            rounds,
            virtual_group: spec.has_virtual_group().then_some(1),
        }
    }

    /// Conventional round robin over the same sources: every source is
    /// visited once per round regardless of its arrival period.
    pub fn round_robin(spec: &SystemSpec) -> Self {
        Self {
            d_tilde: 1,
            rounds: alloc::vec![spec.sources().collect()],
            virtual_group: spec.has_virtual_group().then_some(1),
        }
    }

    pub fn d_tilde(&self) -> u64 {
        self.d_tilde
    }

    /// Service order of round `r` (taken modulo `d̃`).
    pub fn round(&self, r: u64) -> &[SourceId] {
        &self.rounds[(r % self.d_tilde) as usize]
    }

    pub fn rounds(&self) -> &[Vec<SourceId>] {
        &self.rounds
    }

    pub fn is_virtual(&self, s: SourceId) -> bool {
        self.virtual_group == Some(s.g)
    }

    /// Slots of round `r` that carry real service.
    pub fn real_slots(&self, r: u64) -> u64 {
        self.round(r).iter().filter(|s| !self.is_virtual(**s)).count() as u64
    }

    /// Real services in one full iteration, `Σ_g (d̃ / d_g) n_g`.
    pub fn services_per_iteration(&self) -> u64 {
        (0..self.d_tilde).map(|r| self.real_slots(r)).sum()
    }

    fn appearances(&self, s: SourceId) -> Vec<u64> {
        (0..self.d_tilde)
            .filter(|&r| self.round(r).contains(&s))
            .collect()
    }

    /// Round (counted from zero since time zero) of the `k`-th service of `s`.
    pub fn service_round(&self, s: SourceId, k: u64) -> Result<u64, ScheduleError> {
        if k == 0 {
            return Err(ScheduleError::KTooSmall(k));
        }
        let app = self.appearances(s);
        if app.is_empty() {
            return Err(ScheduleError::SourceNotServedInRound(s));
        }
        let per = app.len() as u64;
        let idx = k - 1;
        Ok((idx / per) * self.d_tilde + app[(idx % per) as usize])
    }

    /// Position of `s` in round `r`, counting real slots only, inclusive.
    fn real_position(&self, s: SourceId, r: u64) -> Result<u64, ScheduleError> {
        let round = self.round(r);
        let pos = round
            .iter()
            .position(|x| *x == s)
            .ok_or(ScheduleError::SourceNotServedInRound(s))?;
        Ok(round[..=pos].iter().filter(|x| !self.is_virtual(**x)).count() as u64)
    }

    /// `|J⁻_{g,i}(k)|`: real slots of the round holding the `k`-th service
    /// of `s`, from the start of the round up to and including `s` itself.
    pub fn count_j_minus(&self, s: SourceId, k: u64) -> Result<u64, ScheduleError> {
        let r = self.service_round(s, k)?;
        self.real_position(s, r)
    }

    /// `|J⁺_{g,i}(k)|`: real slots from `s` (inclusive) to the end of the round
    /// holding its `k`-th service.
    pub fn count_j_plus(&self, s: SourceId, k: u64) -> Result<u64, ScheduleError> {
        let r = self.service_round(s, k)?;
        let pos = self.real_position(s, r)?;
        Ok(self.real_slots(r) - pos + u64::from(!self.is_virtual(s)))
    }

    /// `|I_{g,i}(k-1)|`: real slots from the `(k-1)`-th service of `s`
    /// (inclusive) up to the start of its `k`-th service (exclusive).
    pub fn count_i(&self, s: SourceId, k: u64) -> Result<u64, ScheduleError> {
        if k < 2 {
            return Err(ScheduleError::KTooSmall(k));
        }
        let r1 = self.service_round(s, k - 1)?;
        let r2 = self.service_round(s, k)?;
        let own = u64::from(!self.is_virtual(s));
        let head = self.real_slots(r1) - self.real_position(s, r1)? + own;
        let middle: u64 = (r1 + 1..r2).map(|r| self.real_slots(r)).sum();
        let tail = self.real_position(s, r2)? - own;
        Ok(head + middle + tail)
    }

    /// Number of distinct phases of `count_i` / `count_j_minus` in `k`:
    /// appearances of `s` per iteration (`d̃ / d_g` under GRR).
    pub fn phases(&self, s: SourceId) -> u64 {
        self.appearances(s).len() as u64
    }
}

/// `k̃ = d_g (k - 1) + 1`: index of the group-1 round holding update `k`.
pub fn k_tilde(d_g: u32, k: u64) -> u64 {
    u64::from(d_g) * (k - 1) + 1
}

/// `ℓ' = ⌈(k̃ - ℓ) / d̃⌉`.
pub fn ell_prime(ell: u64, k_tilde: u64, d_tilde: u64) -> u64 {
    (k_tilde - ell).div_ceil(d_tilde)
}

/// `k' = ⌈(k̃ - 1) / d̃⌉`, the largest `ℓ'`.
pub fn k_prime(k_tilde: u64, d_tilde: u64) -> u64 {
    (k_tilde - 1).div_ceil(d_tilde)
}
