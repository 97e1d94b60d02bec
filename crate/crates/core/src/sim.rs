//! Slot-by-slot simulation of a single server walking the service schedule.
//!
//! Packets of source `(g, i)` arrive at `(q - 1) d_g n b` for `q = 1, 2, ..`.
//! When a source's slot comes up the server serves one packet of that source:
//!
//! * [`Discipline::Ipq`]: the oldest unserved packet (unbounded FCFS queue);
//! * [`Discipline::Spq`]: the freshest arrived packet, older queued packets
//!   being discarded.
//!
//! If the source has nothing new the server idles until its next arrival.
//! Virtual sources take zero service time and consume no random draws, so
//! they only pace the rounds.

use alloc::vec::Vec;

use rand::Rng;

use crate::model::{SourceId, SystemSpec};
use crate::schedule::IterationSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Discipline {
    /// Infinite packet queue, first come first served.
    #[default]
    Ipq,
    /// Single packet queue with preemption of stale waiting packets.
    Spq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("simulation horizon must be at least one iteration")]
    HorizonTooShort,
}

/// One service slot: the delivery of packet `packet` as the `k`-th update of
/// `source`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slot {
    /// Round index counted from zero.
    pub round: u64,
    pub source: SourceId,
    pub is_virtual: bool,
    /// Delivered-update index (1-based).
    pub k: u64,
    /// Arrival index of the delivered packet (1-based).
    pub packet: u64,
    pub arrival: f64,
    /// Arrival time of the previously delivered packet; `-d_g n b` for `k = 1`.
    pub s_prev: f64,
    /// Server idle time right before this slot.
    pub idle_before: f64,
    pub start: f64,
    pub service: f64,
    pub departure: f64,
    /// Packets of this source discarded since the previous delivery.
    pub preempted: u64,
    /// Service time spent from the previous delivery's start to this start.
    pub busy_since_prev: f64,
    /// Idle time over the same interval.
    pub idle_since_prev: f64,
}

impl Slot {
    pub fn peak_age(&self) -> f64 {
        self.departure - self.s_prev
    }

    pub fn waiting(&self) -> f64 {
        self.start - self.arrival
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct SourceState {
    d: u64,
    served: u64,
    last_packet: u64,
    last_arrival: f64,
    busy_mark: f64,
    idle_mark: f64,
}

/// Stepwise simulator. Each call to [`Engine::step`] performs one slot.
pub struct Engine<'a, R> {
    schedule: &'a IterationSchedule,
    discipline: Discipline,
    rng: R,
    service: crate::dist::ServiceLaw,
    nb: f64,
    offsets: Vec<usize>,
    sources: Vec<SourceState>,
    now: f64,
    round: u64,
    pos: usize,
    busy_total: f64,
    idle_total: f64,
}

impl<'a, R: Rng> Engine<'a, R> {
    pub fn new(
        spec: &SystemSpec,
        schedule: &'a IterationSchedule,
        discipline: Discipline,
        rng: R,
    ) -> Self {
        let mut offsets = Vec::with_capacity(spec.group_count() + 1);
        let mut sources = Vec::new();
        for g in spec.groups() {
            offsets.push(sources.len());
            sources.extend((0..g.count).map(|_| SourceState {
                d: u64::from(g.d),
                ..SourceState::default()
            }));
        }
        Self {
            schedule,
            discipline,
            rng,
            service: *spec.service(),
            nb: spec.base_period(),
            offsets,
            sources,
            now: 0.0,
            round: 0,
            pos: 0,
            busy_total: 0.0,
            idle_total: 0.0,
        }
    }

    /// Current time (end of the last completed slot).
    pub fn now(&self) -> f64 {
        self.now
    }

    /// Round that the next slot belongs to.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn into_rng(self) -> R {
        self.rng
    }

    /// Arrival time of packet `q` of a source with multiplier `d`. The
    /// integer product keeps arrivals of different groups bit-identical when
    /// they coincide.
    fn arrival_time(&self, d: u64, q: u64) -> f64 {
        ((q - 1) * d) as f64 * self.nb
    }

    /// Largest packet index that has arrived by `now`.
    fn freshest(&self, d: u64) -> u64 {
        let period = d as f64 * self.nb;
        let mut q = (self.now / period) as u64 + 1;
        while q > 1 && self.arrival_time(d, q) > self.now {
            q -= 1;
        }
        while self.arrival_time(d, q + 1) <= self.now {
            q += 1;
        }
        q
    }

    pub fn step(&mut self) -> Slot {
        let round = self.schedule.round(self.round);
        let source = round[self.pos];
        let is_virtual = self.schedule.is_virtual(source);
        let round_index = self.round;
        self.pos += 1;
        if self.pos == round.len() {
            self.pos = 0;
            self.round += 1;
        }

        let idx = self.offsets[source.g - 1] + source.i - 1;
        let st = self.sources[idx];
        let packet = match self.discipline {
            Discipline::Ipq => st.last_packet + 1,
            Discipline::Spq => self.freshest(st.d).max(st.last_packet + 1),
        };
        let arrival = self.arrival_time(st.d, packet);
        let start = if arrival > self.now { arrival } else { self.now };
        let idle_before = start - self.now;
        self.idle_total += idle_before;

        let service = if is_virtual {
            0.0
        } else {
            self.service.sample(&mut self.rng)
        };
        let k = st.served + 1;
        let (busy_since_prev, idle_since_prev) = if k == 1 {
            (0.0, 0.0)
        } else {
            (self.busy_total - st.busy_mark, self.idle_total - st.idle_mark)
        };
        let s_prev = if k == 1 {
            -(st.d as f64) * self.nb
        } else {
            st.last_arrival
        };
        let departure = start + service;

        self.sources[idx] = SourceState {
            d: st.d,
            served: k,
            last_packet: packet,
            last_arrival: arrival,
            busy_mark: self.busy_total,
            idle_mark: self.idle_total,
        };
        self.busy_total += service;
        self.now = departure;

        Slot {
            round: round_index,
            source,
            is_virtual,
            k,
            packet,
            arrival,
            s_prev,
            idle_before,
            start,
            service,
            departure,
            preempted: packet - st.last_packet - 1,
            busy_since_prev,
            idle_since_prev,
        }
    }
}

/// Every slot of a simulation run, in service order.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakAgeTrace {
    pub discipline: Discipline,
    pub slots: Vec<Slot>,
    /// Rounds in the first iteration; slots before this round are warmup.
    pub warmup_rounds: u64,
}

impl PeakAgeTrace {
    /// Deliveries of one source in order of `k`.
    pub fn records(&self, source: SourceId) -> impl Iterator<Item = &Slot> + '_ {
        self.slots.iter().filter(move |s| s.source == source)
    }

    pub fn is_warmup(&self, slot: &Slot) -> bool {
        slot.round < self.warmup_rounds
    }

    pub fn waiting_times(&self, source: SourceId) -> Vec<f64> {
        self.records(source).map(Slot::waiting).collect()
    }
}

/// Simulates `iterations` full iterations of `schedule`.
pub fn simulate<R: Rng>(
    spec: &SystemSpec,
    schedule: &IterationSchedule,
    discipline: Discipline,
    iterations: u64,
    rng: R,
) -> Result<PeakAgeTrace, SimError> {
    if iterations == 0 {
        return Err(SimError::HorizonTooShort);
    }
    let rounds = iterations * schedule.d_tilde();
    let mut engine = Engine::new(spec, schedule, discipline, rng);
    let mut slots = Vec::new();
    while engine.round() < rounds {
        slots.push(engine.step());
    }
    Ok(PeakAgeTrace {
        discipline,
        slots,
        warmup_rounds: schedule.d_tilde(),
    })
}

pub fn run_ipq<R: Rng>(
    spec: &SystemSpec,
    schedule: &IterationSchedule,
    iterations: u64,
    rng: R,
) -> Result<PeakAgeTrace, SimError> {
    simulate(spec, schedule, Discipline::Ipq, iterations, rng)
}

pub fn run_spq<R: Rng>(
    spec: &SystemSpec,
    schedule: &IterationSchedule,
    iterations: u64,
    rng: R,
) -> Result<PeakAgeTrace, SimError> {
    simulate(spec, schedule, Discipline::Spq, iterations, rng)
}
