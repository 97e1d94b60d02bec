//! Parameter sweeps producing the CSV datasets behind the figures.

use std::io::Write;

use aoi_grr_core::bounds::{ipq, spq};
use aoi_grr_core::{
    BoundError, Discipline, IterationSchedule, Query, ServiceLaw, SourceId, SystemSpec,
};
use serde::{Deserialize, Serialize};

use crate::config::{Config, ConfigError};
use crate::mc::{self, McError, McEstimate, Target};

pub const SCHEMA_ID: &str = "aoi-grr-sweep/1";
const DEFAULT_LONGRUN_ITERATIONS: u64 = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    /// Sources per group.
    N,
    /// Base period `n b`.
    ArrivalPeriod,
    /// Mean service time.
    MeanService,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::N => "n",
            Axis::ArrivalPeriod => "arrival_period",
            Axis::MeanService => "mean_service",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisciplineName {
    Ipq,
    Spq,
}

impl From<DisciplineName> for Discipline {
    fn from(d: DisciplineName) -> Self {
        match d {
            DisciplineName::Ipq => Discipline::Ipq,
            DisciplineName::Spq => Discipline::Spq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LongRun {
    Longrun,
}

/// Which update to look at: a fixed index or the long-run fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum UpdateSelector {
    Index(u64),
    LongRun(LongRun),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub discipline: DisciplineName,
    /// Threshold coefficient per real group.
    pub x: Vec<f64>,
    pub k: UpdateSelector,
    pub reps: u64,
    /// Iterations of the single long run (long-run mode only).
    pub iterations: Option<u64>,
    /// Source index within each group; defaults to the group's last source.
    pub source: Option<usize>,
    #[serde(default = "yes")]
    pub rr_baseline: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("configuration has no [sweep] table")]
    MissingSweep,
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub schema_id: &'static str,
    pub axis: &'static str,
    pub axis_value: f64,
    pub discipline: &'static str,
    pub g: usize,
    pub i: usize,
    pub k_or_longrun: String,
    pub x: f64,
    pub p_hat: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub ub_prob: Option<f64>,
    pub lb_prob: Option<f64>,
    pub ub_exponent: Option<f64>,
    pub lb_exponent: Option<f64>,
    pub rr_p_hat: Option<f64>,
    pub flags: String,
}

impl SweepConfig {
    fn validate(&self, groups: usize) -> Result<(), SweepError> {
        if self.values.is_empty() {
            return Err(SweepError::Invalid("values must not be empty".into()));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SweepError::Invalid("values must be strictly increasing".into()));
        }
        if self.x.len() != groups {
            return Err(SweepError::Invalid(format!(
                "need one threshold per group ({groups}), got {}",
                self.x.len()
            )));
        }
        if self.reps == 0 {
            return Err(SweepError::Invalid("reps must be positive".into()));
        }
        Ok(())
    }
}

/// `spec` with the axis parameter set to `value`.
pub fn apply_axis(spec: &SystemSpec, axis: Axis, value: f64) -> Result<SystemSpec, SweepError> {
    let out = match axis {
        Axis::N => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(SweepError::Invalid(format!("n must be a positive integer, got {value}")));
            }
            spec.with_group_size(value as usize)
        }
        Axis::ArrivalPeriod => spec.with_b(value / spec.scale()),
        Axis::MeanService => spec.with_service(match spec.service() {
            ServiceLaw::Exponential { .. } => ServiceLaw::Exponential { rate: 1.0 / value },
            ServiceLaw::Geometric { .. } => ServiceLaw::Geometric { p: 1.0 / value },
            ServiceLaw::Deterministic { .. } => ServiceLaw::Deterministic { value },
        }),
    };
    out.map_err(|e| SweepError::Config(e.into()))
}

fn flag_bound(flags: &mut Vec<String>, tag: &str, e: &BoundError) {
    let what = match e {
        BoundError::StabilityViolated { .. } => "unstable".to_string(),
        BoundError::CapReached(_) => "cap-reached".to_string(),
        other => other.to_string().replace(',', " "),
    };
    flags.push(format!("{tag}:{what}"));
}

fn flag_estimate(flags: &mut Vec<String>, tag: &str, e: &McEstimate) {
    if e.below_resolution {
        flags.push(format!("{tag}:below resolution"));
    }
}

struct Point<'a> {
    spec: &'a SystemSpec,
    sched: &'a IterationSchedule,
    discipline: Discipline,
    sources: Vec<(SourceId, f64)>,
}

impl Point<'_> {
    fn targets(&self, k: u64) -> Vec<Target> {
        let n = self.spec.scale();
        self.sources
            .iter()
            .map(|&(source, x)| Target {
                source,
                k,
                threshold: n * x,
            })
            .collect()
    }
}

/// Runs the sweep described by `cfg.sweep`.
pub fn run_sweep(cfg: &Config, seed: u64) -> Result<Vec<SweepRow>, SweepError> {
    let sweep = cfg.sweep.as_ref().ok_or(SweepError::MissingSweep)?;
    let base = cfg.system()?;
    let real_groups = base.real_groups().count();
    sweep.validate(real_groups)?;
    let discipline: Discipline = sweep.discipline.into();
    let mut rows = Vec::new();

    for &value in &sweep.values {
        let spec = apply_axis(&base, sweep.axis, value)?;
        let sched = IterationSchedule::build(&spec);
        let rr = IterationSchedule::round_robin(&spec);
        let sources: Vec<(SourceId, f64)> = spec
            .real_groups()
            .zip(&sweep.x)
            .map(|((g, grp), &x)| (SourceId::new(g, sweep.source.unwrap_or(grp.count).min(grp.count)), x))
            .collect();
        let point = Point {
            spec: &spec,
            sched: &sched,
            discipline,
            sources,
        };
        let mut point_rows = match sweep.k {
            UpdateSelector::Index(k) => fixed_k_rows(&point, &rr, k, sweep, seed)?,
            UpdateSelector::LongRun(_) => longrun_rows(&point, &rr, sweep, seed)?,
        };
        for row in &mut point_rows {
            row.axis = sweep.axis.name();
            row.axis_value = value;
        }
        rows.extend(point_rows);
    }
    Ok(rows)
}

fn empty_row(point: &Point, source: SourceId, x: f64, k: String) -> SweepRow {
    SweepRow {
        schema_id: SCHEMA_ID,
        axis: "",
        axis_value: 0.0,
        discipline: match point.discipline {
            Discipline::Ipq => "ipq",
            Discipline::Spq => "spq",
        },
        g: point.spec.user_group(source.g).unwrap_or(source.g),
        i: source.i,
        k_or_longrun: k,
        x,
        p_hat: None,
        ci_low: None,
        ci_high: None,
        ub_prob: None,
        lb_prob: None,
        ub_exponent: None,
        lb_exponent: None,
        rr_p_hat: None,
        flags: String::new(),
    }
}

fn fixed_k_rows(
    point: &Point,
    rr: &IterationSchedule,
    k: u64,
    sweep: &SweepConfig,
    seed: u64,
) -> Result<Vec<SweepRow>, SweepError> {
    let targets = point.targets(k);
    let est = mc::estimate_violation(point.spec, point.sched, point.discipline, &targets, sweep.reps, seed)?;
    let rr_est = if sweep.rr_baseline {
        Some(mc::estimate_violation(
            point.spec,
            rr,
            point.discipline,
            &targets,
            sweep.reps,
            seed ^ 0x5252,
        )?)
    } else {
        None
    };
    let mut rows = Vec::new();
    for (idx, &(source, x)) in point.sources.iter().enumerate() {
        let mut row = empty_row(point, source, x, k.to_string());
        let mut flags = Vec::new();
        let e = est[idx];
        row.p_hat = Some(e.p_hat);
        row.ci_low = Some(e.ci_low);
        row.ci_high = Some(e.ci_high);
        flag_estimate(&mut flags, "mc", &e);
        if let Some(rr_est) = &rr_est {
            row.rr_p_hat = Some(rr_est[idx].p_hat);
            flag_estimate(&mut flags, "rr", &rr_est[idx]);
        }
        let q = Query::new(source, k, x);
        match point.discipline {
            Discipline::Ipq => {
                match ipq::theorem1_upper(point.spec, point.sched, &q) {
                    Ok(r) => {
                        row.ub_prob = Some(r.probability);
                        row.ub_exponent = Some(r.exponent);
                        if r.below_floor {
                            flags.push("below floor".into());
                        }
                    }
                    Err(e) => flag_bound(&mut flags, "ub", &e),
                }
                match ipq::theorem2_lower(point.spec, point.sched, &q, 0.0) {
                    Ok(r) => {
                        row.lb_prob = Some(r.probability);
                        row.lb_exponent = Some(r.exponent);
                    }
                    Err(e) => flag_bound(&mut flags, "lb", &e),
                }
            }
            Discipline::Spq => match spq::theorem3_upper(point.spec, point.sched, &q) {
                Ok(r) => {
                    row.ub_prob = Some(r.probability);
                    row.ub_exponent = Some(r.exponent);
                    if r.below_floor {
                        flags.push("below floor".into());
                    }
                }
                Err(e) => flag_bound(&mut flags, "ub", &e),
            },
        }
        row.flags = flags.join(";");
        rows.push(row);
    }
    Ok(rows)
}

fn longrun_rows(
    point: &Point,
    rr: &IterationSchedule,
    sweep: &SweepConfig,
    seed: u64,
) -> Result<Vec<SweepRow>, SweepError> {
    let iterations = sweep.iterations.unwrap_or(DEFAULT_LONGRUN_ITERATIONS);
    let n = point.spec.scale();
    let mut rows = Vec::new();
    for &(source, x) in &point.sources {
        let mut row = empty_row(point, source, x, "longrun".into());
        let mut flags = Vec::new();
        let threshold = n * x;
        match mc::estimate_longrun_fraction(point.spec, point.sched, point.discipline, source, threshold, iterations, seed) {
            Ok(e) => {
                row.p_hat = Some(e.p_hat);
                row.ci_low = Some(e.ci_low);
                row.ci_high = Some(e.ci_high);
                flag_estimate(&mut flags, "mc", &e);
            }
            Err(e) => flags.push(format!("mc:{e}").replace(',', " ")),
        }
        if sweep.rr_baseline {
            let rr_iter = iterations * point.sched.d_tilde();
            match mc::estimate_longrun_fraction(point.spec, rr, point.discipline, source, threshold, rr_iter, seed ^ 0x5252) {
                Ok(e) => row.rr_p_hat = Some(e.p_hat),
                Err(e) => flags.push(format!("rr:{e}").replace(',', " ")),
            }
        }
        match point.discipline {
            Discipline::Ipq => match ipq::corollary2_longrun(point.spec, point.sched, source, x) {
                Ok(b) => {
                    row.ub_prob = Some(b.probability_bound);
                    row.ub_exponent = Some(b.decay_rate_bound);
                }
                Err(e) => flag_bound(&mut flags, "ub", &e),
            },
            Discipline::Spq => match spq::corollary7_longrun(point.spec, point.sched, source, x) {
                Ok(d) => row.ub_exponent = Some(d),
                Err(e) => flag_bound(&mut flags, "ub", &e),
            },
        }
        row.flags = flags.join(";");
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record([
            "schema_id", "axis", "axis_value", "discipline", "g", "i", "k_or_longrun", "x", "p_hat",
            "ci_low", "ci_high", "ub_prob", "lb_prob", "ub_exponent", "lb_exponent", "rr_p_hat", "flags",
        ])?;
    }
    w.flush().map_err(|e| SweepError::Csv(e.into()))?;
    Ok(())
}
