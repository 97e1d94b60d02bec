//! System description shared by the simulator and the analytic bounds.
//!
//! A system is a list of source groups. Every source of group `g` receives
//! a fresh packet every `d_g * n * b` time units, all groups in phase at
//! time zero. What `n` means is selected by [`NScaling`].
//!
//! The analysis assumes the first group has `d = 1`. When the caller's
//! first group has a larger multiplier, [`SystemSpec::new`] prepends a
//! one-source *virtual* group with `d = 1` whose packets need no service
//! time. The virtual group never appears in reports and carries no weight
//! in the bound formulas.

use alloc::vec::Vec;
use core::fmt;

use crate::dist::ServiceLaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("system must contain at least one group")]
    EmptyGroups,
    #[error("parameter `{0}` must be positive and finite")]
    NonPositiveParameter(&'static str),
    #[error("group multipliers must be strictly increasing (group {index} has d={d} after d={prev})")]
    DuplicateOrDecreasingD { index: usize, prev: u32, d: u32 },
    #[error("per-group scaling requires every group to have the same size")]
    NonUniformGroupSizes,
    #[error("source ({g},{i}) does not exist")]
    UnknownSource { g: usize, i: usize },
    #[error("source ({g},{i}) belongs to the virtual group")]
    VirtualSource { g: usize, i: usize },
}

/// One class of sources sharing the period multiplier `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupSpec {
    pub d: u32,
    pub count: usize,
}

impl GroupSpec {
    pub const fn new(d: u32, count: usize) -> Self {
        Self { d, count }
    }
}

/// What the `n` in the base period `n * b` and the threshold `n * x` counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NScaling {
    /// `n` is the total number of (real) sources; group fractions sum to one.
    TotalSources,
    /// `n` is the size of each group; all real groups must be equally sized.
    #[default]
    PerGroupSize,
}

/// A source address, both indices 1-based and relative to the normalized
/// group list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceId {
    pub g: usize,
    pub i: usize,
}

impl SourceId {
    pub const fn new(g: usize, i: usize) -> Self {
        Self { g, i }
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.g, self.i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    groups: Vec<GroupSpec>,
    b: f64,
    service: ServiceLaw,
    n_scaling: NScaling,
    virtual_lead: bool,
}

impl SystemSpec {
    /// Builds and normalizes a system. See [`SystemSpec::validate_and_normalize`].
    pub fn new(
        groups: Vec<GroupSpec>,
        b: f64,
        service: ServiceLaw,
        n_scaling: NScaling,
    ) -> Result<Self, ModelError> {
        Self {
            groups,
            b,
            service,
            n_scaling,
            virtual_lead: false,
        }
        .validate_and_normalize()
    }

    /// Checks the invariants and prepends the virtual `d = 1` group when the
    /// first real group has `d > 1`. Idempotent.
    pub fn validate_and_normalize(mut self) -> Result<Self, ModelError> {
        if self.groups.is_empty() {
            return Err(ModelError::EmptyGroups);
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(ModelError::NonPositiveParameter("b"));
        }
        self.service
            .validate()
            .map_err(|_| ModelError::NonPositiveParameter("service"))?;
        for g in &self.groups {
            if g.d == 0 {
                return Err(ModelError::NonPositiveParameter("d"));
            }
            if g.count == 0 {
                return Err(ModelError::NonPositiveParameter("count"));
            }
        }
        for (index, w) in self.groups.windows(2).enumerate() {
            if w[1].d <= w[0].d {
                return Err(ModelError::DuplicateOrDecreasingD {
                    index: index + 2,
                    prev: w[0].d,
                    d: w[1].d,
                });
            }
        }
        if self.n_scaling == NScaling::PerGroupSize {
            let mut sizes = self.real_groups().map(|(_, g)| g.count);
            let first = sizes.next().ok_or(ModelError::EmptyGroups)?;
            if sizes.any(|c| c != first) {
                return Err(ModelError::NonUniformGroupSizes);
            }
        }
        if self.groups[0].d != 1 {
            self.groups.insert(0, GroupSpec::new(1, 1));
            self.virtual_lead = true;
        }
        Ok(self)
    }

    pub fn groups(&self) -> &[GroupSpec] {
        &self.groups
    }

    /// Number of groups after normalization (virtual group included).
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn group(&self, g: usize) -> &GroupSpec {
        &self.groups[g - 1]
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn service(&self) -> &ServiceLaw {
        &self.service
    }

    pub fn n_scaling(&self) -> NScaling {
        self.n_scaling
    }

    pub fn has_virtual_group(&self) -> bool {
        self.virtual_lead
    }

    pub fn is_virtual(&self, g: usize) -> bool {
        self.virtual_lead && g == 1
    }

    /// Real groups with their normalized 1-based index.
    pub fn real_groups(&self) -> impl Iterator<Item = (usize, &GroupSpec)> + '_ {
        let skip = usize::from(self.virtual_lead);
        self.groups.iter().enumerate().skip(skip).map(|(k, g)| (k + 1, g))
    }

    /// Every source in schedule order, virtual one included.
    pub fn sources(&self) -> impl Iterator<Item = SourceId> + '_ {
        self.groups
            .iter()
            .enumerate()
            .flat_map(|(k, g)| (1..=g.count).map(move |i| SourceId::new(k + 1, i)))
    }

    pub fn real_source_count(&self) -> usize {
        self.real_groups().map(|(_, g)| g.count).sum()
    }

    /// The scaling count `n`.
    pub fn scale(&self) -> f64 {
        match self.n_scaling {
            NScaling::TotalSources => self.real_source_count() as f64,
            NScaling::PerGroupSize => self
                .real_groups()
                .map(|(_, g)| g.count)
                .next()
                .unwrap_or(1) as f64,
        }
    }

    /// `n * b`, the length of one round's arrival period.
    pub fn base_period(&self) -> f64 {
        self.scale() * self.b
    }

    pub fn arrival_period(&self, g: usize) -> f64 {
        f64::from(self.group(g).d) * self.base_period()
    }

    /// `alpha_g = n_g / n`; zero for the virtual group.
    pub fn alpha(&self, g: usize) -> f64 {
        if self.is_virtual(g) {
            0.0
        } else {
            self.group(g).count as f64 / self.scale()
        }
    }

    /// Least common multiple of all multipliers: rounds per iteration.
    pub fn d_tilde(&self) -> u64 {
        self.groups.iter().fold(1u64, |acc, g| lcm(acc, u64::from(g.d)))
    }

    /// Maps a caller-facing group number (as written in the configuration)
    /// to the normalized index.
    pub fn internal_group(&self, user_g: usize) -> usize {
        user_g + usize::from(self.virtual_lead)
    }

    /// Inverse of [`SystemSpec::internal_group`]; `None` for the virtual group.
    pub fn user_group(&self, g: usize) -> Option<usize> {
        if self.is_virtual(g) {
            None
        } else {
            Some(g - usize::from(self.virtual_lead))
        }
    }

    /// Validates that `source` is a real source of this system.
    pub fn check_source(&self, source: SourceId) -> Result<(), ModelError> {
        let SourceId { g, i } = source;
        if g == 0 || g > self.groups.len() || i == 0 || i > self.groups[g - 1].count {
            return Err(ModelError::UnknownSource { g, i });
        }
        if self.is_virtual(g) {
            return Err(ModelError::VirtualSource { g, i });
        }
        Ok(())
    }

    /// Same system with every real group resized to `count`.
    pub fn with_group_size(&self, count: usize) -> Result<Self, ModelError> {
        let groups = self.real_groups().map(|(_, g)| GroupSpec::new(g.d, count)).collect();
        Self::new(groups, self.b, self.service, self.n_scaling)
    }

    pub fn with_b(&self, b: f64) -> Result<Self, ModelError> {
        let groups = self.real_groups().map(|(_, g)| *g).collect();
        Self::new(groups, b, self.service, self.n_scaling)
    }

    pub fn with_service(&self, service: ServiceLaw) -> Result<Self, ModelError> {
        let groups = self.real_groups().map(|(_, g)| *g).collect();
        Self::new(groups, self.b, service, self.n_scaling)
    }
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub(crate) fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}
