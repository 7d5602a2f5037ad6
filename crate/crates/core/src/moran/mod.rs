//! The spatial Moran model with fluctuating selection on a circle of demes,
//! with ancestral-origin tracking.
//!
//! Every scenario consumes the same event times (event stream) and the same
//! individual choices (outcome stream); only environment values differ. So
//! runs of different scenarios under one seed see identical event sequences.

mod clock;
mod records;

use rand::Rng;

use crate::environment::uniform_sign;
use crate::error::{ensure_finite, Error, Result};
use crate::rng::{RngContract, SimRng, Substream};

pub use clock::{ClockEvent, EventClock, EventKind, Slot};
pub use records::{
    origin_file_name, parse_rows, write_records, RecordWriters, EVENTS_FILE, PROPORTIONS_FILE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Allele {
    /// Type a.
    Lower,
    /// Type A.
    Upper,
}

/// The type favoured by `ζ = -1`; `ζ = +1` favours the other one.
pub const FAVOURED_BY_NEGATIVE: Allele = Allele::Lower;

pub fn favoured(zeta: i8) -> Allele {
    match (zeta < 0, FAVOURED_BY_NEGATIVE) {
        (true, a) => a,
        (false, Allele::Lower) => Allele::Upper,
        (false, Allele::Upper) => Allele::Lower,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// The first `⌈β/2⌉` demes share one fluctuating value, the rest its negative.
    Anticorrelated,
    /// One fluctuating value for all demes.
    Correlated,
    /// Fixed: `+1` (favouring A) in the first `⌈β/2⌉` demes, `-1` (favouring a) in the rest.
    Constant,
    /// Selective events pick the potential parent regardless of type.
    Neutral,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Anticorrelated,
        Scenario::Correlated,
        Scenario::Constant,
        Scenario::Neutral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Anticorrelated => "anticorrelated",
            Scenario::Correlated => "correlated",
            Scenario::Constant => "constant",
            Scenario::Neutral => "neutral",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    fn fluctuates(self) -> bool {
        matches!(self, Scenario::Anticorrelated | Scenario::Correlated)
    }
}

/// Initial types.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialTypes {
    /// Each individual independently type a with this probability.
    Bernoulli(f64),
    /// Exactly this many type-a individuals per deme (the first ones).
    PerDeme(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoranConfig {
    pub demes: usize,
    pub deme_size: usize,
    pub selection: f64,
    pub env_rate: f64,
    /// Nearest-neighbour migration rate `m` per adjacent pair on the circle.
    pub migration: f64,
    pub scenario: Scenario,
    pub initial: InitialTypes,
    /// Record after every `record_every` events (0 disables event-count records).
    pub record_every: u64,
    /// Additionally record at multiples of this time.
    pub record_dt: Option<f64>,
    pub horizon: f64,
    /// Stop as soon as one type is lost from the whole population.
    pub stop_at_fixation: bool,
}

impl Default for MoranConfig {
    /// The 100-deme circle with `N_d = 400`, `s = 0.1`, `α = 10`, `m = 1`.
    fn default() -> Self {
        Self {
            demes: 100,
            deme_size: 400,
            selection: 0.1,
            env_rate: 10.0,
            migration: 1.0,
            scenario: Scenario::Anticorrelated,
            initial: InitialTypes::Bernoulli(0.5),
            record_every: 100_000,
            record_dt: None,
            horizon: 10.0,
            stop_at_fixation: false,
        }
    }
}

impl MoranConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("selection", self.selection)?;
        ensure_finite("environment rate", self.env_rate)?;
        ensure_finite("migration rate", self.migration)?;
        ensure_finite("horizon", self.horizon)?;
        let mut problems = Vec::new();
        if self.demes < 2 {
            problems.push(format!("need at least 2 demes, got {}", self.demes));
        }
        if self.deme_size < 2 {
            problems.push(format!("need at least 2 individuals per deme, got {}", self.deme_size));
        }
        if !(0.0..=1.0).contains(&self.selection) {
            problems.push(format!("selection {} must lie in [0, 1]", self.selection));
        }
        if self.env_rate < 0.0 || self.migration < 0.0 {
            problems.push("rates must be non-negative".into());
        }
        if self.horizon < 0.0 {
            problems.push(format!("horizon {} must be non-negative", self.horizon));
        }
        if let Some(dt) = self.record_dt {
            if !(dt.is_finite() && dt > 0.0) {
                problems.push(format!("record interval {dt} must be positive"));
            }
        }
        match self.initial {
            InitialTypes::Bernoulli(p) if !(0.0..=1.0).contains(&p) => {
                problems.push(format!("initial proportion {p} outside [0, 1]"))
            }
            InitialTypes::PerDeme(k) if k > self.deme_size => {
                problems.push(format!("{k} initial type-a individuals exceed the deme size"))
            }
            _ => {}
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }

    /// Number of adjacent pairs on the circle (a circle of two demes has one).
    pub fn migration_pairs(&self) -> usize {
        if self.demes == 2 {
            1
        } else {
            self.demes
        }
    }

    pub fn pair(&self, index: usize) -> (usize, usize) {
        (index, (index + 1) % self.demes)
    }

    /// Demes `0..⌈β/2⌉` form the first half.
    pub fn first_half(&self) -> usize {
        self.demes.div_ceil(2)
    }

    pub fn neutral_rate(&self) -> f64 {
        let n = self.deme_size as f64;
        n * (n - 1.0) / 2.0
    }

    pub fn selective_rate(&self) -> f64 {
        self.selection * self.deme_size as f64
    }

    pub fn migration_rate(&self) -> f64 {
        self.migration * self.deme_size as f64
    }

    /// Clock slots in their fixed drawing order.
    pub fn clock_slots(&self) -> Vec<(Slot, f64)> {
        let mut slots = Vec::with_capacity(3 * self.demes + 1);
        for d in 0..self.demes {
            slots.push((
                Slot {
                    kind: EventKind::Neutral,
                    site: d,
                },
                self.neutral_rate(),
            ));
            slots.push((
                Slot {
                    kind: EventKind::Selective,
                    site: d,
                },
                self.selective_rate(),
            ));
        }
        for p in 0..self.migration_pairs() {
            slots.push((
                Slot {
                    kind: EventKind::Migration,
                    site: p,
                },
                self.migration_rate(),
            ));
        }
        slots.push((
            Slot {
                kind: EventKind::Environment,
                site: 0,
            },
            self.env_rate,
        ));
        slots
    }
}

/// One deme: types and ancestral origins of its individuals.
#[derive(Debug, Clone, PartialEq)]
pub struct Deme {
    types: Vec<Allele>,
    origins: Vec<u32>,
    lower: usize,
    /// Number of individuals of each origin.
    origin_counts: Vec<u32>,
}

impl Deme {
    fn new(types: Vec<Allele>, home: usize, demes: usize) -> Self {
        let n = types.len();
        let lower = types.iter().filter(|&&a| a == Allele::Lower).count();
        let mut origin_counts = vec![0; demes];
        origin_counts[home] = n as u32;
        Self {
            types,
            origins: vec![home as u32; n],
            lower,
            origin_counts,
        }
    }

    pub fn size(&self) -> usize {
        self.types.len()
    }

    pub fn types(&self) -> &[Allele] {
        &self.types
    }

    pub fn origins(&self) -> &[u32] {
        &self.origins
    }

    pub fn lower_count(&self) -> usize {
        self.lower
    }

    fn set(&mut self, i: usize, allele: Allele, origin: u32) {
        if self.types[i] == Allele::Lower {
            self.lower -= 1;
        }
        if allele == Allele::Lower {
            self.lower += 1;
        }
        self.origin_counts[self.origins[i] as usize] -= 1;
        self.origin_counts[origin as usize] += 1;
        self.types[i] = allele;
        self.origins[i] = origin;
    }
}

/// All demes of the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    demes: Vec<Deme>,
    deme_size: usize,
}

impl Population {
    pub fn initial<R: Rng + ?Sized>(config: &MoranConfig, rng: &mut R) -> Self {
        let demes = (0..config.demes)
            .map(|d| {
                let types = (0..config.deme_size)
                    .map(|i| {
                        let lower = match config.initial {
                            InitialTypes::Bernoulli(p) => rng.random::<f64>() < p,
                            InitialTypes::PerDeme(k) => i < k,
                        };
                        if lower {
                            Allele::Lower
                        } else {
                            Allele::Upper
                        }
                    })
                    .collect();
                Deme::new(types, d, config.demes)
            })
            .collect();
        Self {
            demes,
            deme_size: config.deme_size,
        }
    }

    pub fn demes(&self) -> usize {
        self.demes.len()
    }

    pub fn deme_size(&self) -> usize {
        self.deme_size
    }

    pub fn deme(&self, d: usize) -> &Deme {
        &self.demes[d]
    }

    pub fn lower_count(&self, d: usize) -> usize {
        self.demes[d].lower
    }

    pub fn total_lower(&self) -> usize {
        self.demes.iter().map(|d| d.lower).sum()
    }

    pub fn global_proportion(&self) -> f64 {
        self.total_lower() as f64 / (self.deme_size * self.demes.len()) as f64
    }

    /// Individuals in deme `d` whose ancestral origin is `gamma`.
    pub fn origin_count(&self, d: usize, gamma: usize) -> u32 {
        self.demes[d].origin_counts[gamma]
    }

    /// The type that has taken over, if any.
    pub fn fixed(&self) -> Option<Allele> {
        match self.total_lower() {
            0 => Some(Allele::Upper),
            n if n == self.deme_size * self.demes.len() => Some(Allele::Lower),
            _ => None,
        }
    }
}

/// Reproduction kind for [`apply_reproduction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reproduction {
    Neutral,
    Selective,
}

/// What a reproduction event did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReproductionOutcome {
    pub parent: usize,
    pub replaced: usize,
}

/// Two distinct uniform individuals, then a fair bit naming the potential parent.
///
/// A neutral event, or a selective event with `env = None` or a
/// type-homogeneous pair, uses the potential parent. Otherwise the individual
/// of the type favoured by `env` is the parent. The other individual takes
/// the parent's type and origin.
pub fn apply_reproduction<R: Rng + ?Sized>(
    deme: &mut Deme,
    kind: Reproduction,
    env: Option<i8>,
    rng: &mut R,
) -> ReproductionOutcome {
    let n = deme.size();
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    let (potential, other) = if rng.random::<bool>() { (i, j) } else { (j, i) };
    let (parent, replaced) = match (kind, env) {
        (Reproduction::Selective, Some(zeta)) if deme.types[i] != deme.types[j] => {
            if deme.types[potential] == favoured(zeta) {
                (potential, other)
            } else {
                (other, potential)
            }
        }
        _ => (potential, other),
    };
    let (allele, origin) = (deme.types[parent], deme.origins[parent]);
    deme.set(replaced, allele, origin);
    ReproductionOutcome { parent, replaced }
}

/// Swaps one uniform individual of each deme.
pub fn apply_migration<R: Rng + ?Sized>(first: &mut Deme, second: &mut Deme, rng: &mut R) {
    let i = rng.random_range(0..first.size());
    let j = rng.random_range(0..second.size());
    let (a, oa) = (first.types[i], first.origins[i]);
    let (b, ob) = (second.types[j], second.origins[j]);
    first.set(i, b, ob);
    second.set(j, a, oa);
}

/// Environment per deme.
pub fn initial_environment<R: Rng + ?Sized>(config: &MoranConfig, rng: &mut R) -> Vec<i8> {
    let half = config.first_half();
    match config.scenario {
        Scenario::Constant => (0..config.demes)
            .map(|d| if d < half { 1 } else { -1 })
            .collect(),
        Scenario::Neutral => vec![1; config.demes],
        _ => {
            let mut env = vec![1; config.demes];
            apply_environment(config, &mut env, rng);
            env
        }
    }
}

/// Resamples the environment; a no-op for the constant and neutral scenarios.
pub fn apply_environment<R: Rng + ?Sized>(config: &MoranConfig, env: &mut [i8], rng: &mut R) {
    if !config.scenario.fluctuates() {
        return;
    }
    let v = uniform_sign(rng);
    let half = config.first_half();
    for (d, z) in env.iter_mut().enumerate() {
        *z = match config.scenario {
            Scenario::Anticorrelated if d >= half => -v,
            _ => v,
        };
    }
}

/// One trajectory of the model.
#[derive(Debug, Clone)]
pub struct MoranSimulator {
    config: MoranConfig,
    population: Population,
    env: Vec<i8>,
    clock: EventClock,
    events_rng: SimRng,
    outcomes_rng: SimRng,
    env_rng: SimRng,
    time: f64,
    events: u64,
}

impl MoranSimulator {
    /// Streams of replicate `replicate` under `contract`. Initial types come
    /// from the outcome stream, so they agree across scenarios.
    pub fn new(config: MoranConfig, contract: &RngContract, replicate: u64) -> Result<Self> {
        config.validate()?;
        let mut events_rng = contract.stream(Substream::EventTimes, replicate);
        let mut outcomes_rng = contract.stream(Substream::Outcomes, replicate);
        let mut env_rng = contract.stream(Substream::Environment, replicate);
        let population = Population::initial(&config, &mut outcomes_rng);
        let env = initial_environment(&config, &mut env_rng);
        let clock = EventClock::new(config.clock_slots(), &mut events_rng);
        Ok(Self {
            config,
            population,
            env,
            clock,
            events_rng,
            outcomes_rng,
            env_rng,
            time: 0.0,
            events: 0,
        })
    }

    pub fn config(&self) -> &MoranConfig {
        &self.config
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn environment(&self) -> &[i8] {
        &self.env
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    /// Time of the next event, if any.
    pub fn peek_time(&self) -> Option<f64> {
        self.clock.peek_time()
    }

    /// Fires and executes the next event.
    pub fn step(&mut self) -> Option<ClockEvent> {
        let event = self.clock.next_event(&mut self.events_rng)?;
        self.time = event.time;
        self.events += 1;
        let site = event.slot.site;
        match event.slot.kind {
            EventKind::Neutral | EventKind::Selective => {
                let kind = if event.slot.kind == EventKind::Neutral {
                    Reproduction::Neutral
                } else {
                    Reproduction::Selective
                };
                let env = (self.config.scenario != Scenario::Neutral).then(|| self.env[site]);
                apply_reproduction(
                    &mut self.population.demes[site],
                    kind,
                    env,
                    &mut self.outcomes_rng,
                );
            }
            EventKind::Migration => {
                let (a, b) = self.config.pair(site);
                let (lo, hi) = (a.min(b), a.max(b));
                let (left, right) = self.population.demes.split_at_mut(hi);
                let (first, second) = (&mut left[lo], &mut right[0]);
                if a < b {
                    apply_migration(first, second, &mut self.outcomes_rng);
                } else {
                    apply_migration(second, first, &mut self.outcomes_rng);
                }
            }
            EventKind::Environment => {
                apply_environment(&self.config, &mut self.env, &mut self.env_rng);
            }
        }
        Some(event)
    }

    /// Advances the clock to the horizon without executing further events.
    fn finish(&mut self, at: f64) {
        self.time = self.time.max(at);
    }
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct MoranSummary {
    pub final_time: f64,
    pub events: u64,
    pub records: u64,
    pub fixed: Option<Allele>,
    pub population: Population,
}

struct Recorder<'a, W: std::io::Write> {
    writers: Option<&'a mut RecordWriters<W>>,
    records: u64,
    last: f64,
}

impl<W: std::io::Write> Recorder<'_, W> {
    fn record(&mut self, sim: &MoranSimulator, t: f64) -> Result<()> {
        if let Some(w) = self.writers.as_deref_mut() {
            write_records(sim.population(), t, w)?;
        }
        self.records += 1;
        self.last = t;
        Ok(())
    }
}

/// Runs one trajectory to the horizon (or fixation), writing records at
/// time 0, after every `record_every` events, at multiples of `record_dt`
/// (state just before the first event past that time) and at the end.
pub fn run_experiment<W: std::io::Write>(
    config: &MoranConfig,
    contract: &RngContract,
    replicate: u64,
    writers: Option<&mut RecordWriters<W>>,
) -> Result<MoranSummary> {
    let mut sim = MoranSimulator::new(config.clone(), contract, replicate)?;
    let mut rec = Recorder {
        writers,
        records: 0,
        last: f64::NAN,
    };
    rec.record(&sim, 0.0)?;
    let mut next_timed = config.record_dt;
    loop {
        if config.stop_at_fixation && sim.population().fixed().is_some() {
            break;
        }
        let next = match sim.peek_time() {
            Some(t) if t <= config.horizon => t,
            _ => break,
        };
        if let (Some(dt), Some(due)) = (config.record_dt, next_timed.as_mut()) {
            while *due < next {
                rec.record(&sim, *due)?;
                *due += dt;
            }
        }
        let event = sim.step().expect("peeked event exists");
        if let Some(w) = rec.writers.as_deref_mut() {
            w.log_event(&event)?;
        }
        if config.record_every > 0 && sim.event_count() % config.record_every == 0 {
            rec.record(&sim, sim.time())?;
        }
    }
    let end = if config.stop_at_fixation && sim.population().fixed().is_some() {
        sim.time()
    } else {
        config.horizon
    };
    if let (Some(dt), Some(due)) = (config.record_dt, next_timed.as_mut()) {
        while *due <= end {
            rec.record(&sim, *due)?;
            *due += dt;
        }
    }
    sim.finish(end);
    if rec.last != end {
        rec.record(&sim, end)?;
    }
    if let Some(w) = rec.writers {
        w.flush()?;
    }
    let records = rec.records;
    Ok(MoranSummary {
        final_time: end,
        events: sim.event_count(),
        records,
        fixed: sim.population().fixed(),
        population: sim.population.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scenario: Scenario) -> MoranConfig {
        MoranConfig {
            demes: 4,
            deme_size: 10,
            selection: 0.5,
            env_rate: 2.0,
            migration: 1.0,
            scenario,
            initial: InitialTypes::Bernoulli(0.5),
            record_every: 50,
            record_dt: None,
            horizon: 1.0,
            stop_at_fixation: false,
        }
    }

    #[test]
    fn negative_environment_favours_a() {
        assert_eq!(favoured(-1), Allele::Lower);
        assert_eq!(favoured(1), Allele::Upper);
    }

    #[test]
    fn default_rates() {
        let c = MoranConfig::default();
        assert_eq!(c.neutral_rate(), 79800.0);
        assert!((c.selective_rate() - 40.0).abs() < 1e-12);
        assert_eq!(c.migration_rate(), 400.0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn mixed_pair_under_selection_grows_the_favoured_type() {
        let mut rng = RngContract::new(1).stream(Substream::Outcomes, 0);
        for _ in 0..200 {
            let mut deme = Deme::new(vec![Allele::Lower, Allele::Upper], 0, 1);
            apply_reproduction(&mut deme, Reproduction::Selective, Some(-1), &mut rng);
            assert_eq!(deme.lower_count(), 2);
        }
    }

    #[test]
    fn homogeneous_pair_uses_the_potential_parent() {
        let mut rng = RngContract::new(1).stream(Substream::Outcomes, 0);
        let mut deme = Deme::new(vec![Allele::Lower; 2], 0, 2);
        deme.origins[1] = 1;
        deme.origin_counts = vec![1, 1];
        let o = apply_reproduction(&mut deme, Reproduction::Selective, Some(1), &mut rng);
        assert_ne!(o.parent, o.replaced);
        assert_eq!(deme.lower_count(), 2);
    }

    #[test]
    fn migration_between_pure_demes() {
        let mut rng = RngContract::new(2).stream(Substream::Outcomes, 0);
        let mut a = Deme::new(vec![Allele::Lower; 5], 0, 2);
        let mut b = Deme::new(vec![Allele::Upper; 5], 1, 2);
        apply_migration(&mut a, &mut b, &mut rng);
        assert_eq!(a.lower_count(), 4);
        assert_eq!(b.lower_count(), 1);
        assert_eq!(a.origin_counts, vec![4, 1]);
    }

    #[test]
    fn environment_scenarios() {
        let mut rng = RngContract::new(3).stream(Substream::Environment, 0);
        let c = small(Scenario::Anticorrelated);
        let mut env = initial_environment(&c, &mut rng);
        for _ in 0..20 {
            apply_environment(&c, &mut env, &mut rng);
            assert_eq!(&env[..2], &[env[0]; 2]);
            assert_eq!(&env[2..], &[-env[0]; 2]);
        }
        let c = small(Scenario::Constant);
        let mut env = initial_environment(&c, &mut rng);
        let before = env.clone();
        apply_environment(&c, &mut env, &mut rng);
        assert_eq!(env, before);
        assert_eq!(env, vec![1, 1, -1, -1]);
    }

    #[test]
    fn initial_records() {
        let mut c = small(Scenario::Neutral);
        c.initial = InitialTypes::PerDeme(10);
        c.horizon = 0.0;
        let mut w = RecordWriters::in_memory(4, false);
        run_experiment(&c, &RngContract::new(4), 0, Some(&mut w)).unwrap();
        let rows = parse_rows(std::str::from_utf8(w.proportions()).unwrap()).unwrap();
        assert_eq!(rows, vec![vec![0.0, 1.0, 1.0, 1.0, 1.0, 1.0]]);
        let origin = parse_rows(std::str::from_utf8(w.origin(2)).unwrap()).unwrap();
        assert_eq!(origin, vec![vec![0.0, 0.0, 0.0, 1.0, 0.0]]);
    }

    #[test]
    fn sizes_and_origins_are_conserved() {
        let c = small(Scenario::Anticorrelated);
        let mut sim = MoranSimulator::new(c, &RngContract::new(5), 0).unwrap();
        for _ in 0..5000 {
            sim.step().unwrap();
            let pop = sim.population();
            let mut total = 0;
            for d in 0..pop.demes() {
                assert_eq!(pop.deme(d).size(), 10);
                let s: u32 = (0..pop.demes()).map(|g| pop.origin_count(d, g)).sum();
                assert_eq!(s, 10);
                total += s;
            }
            assert_eq!(total, 40);
        }
    }

    #[test]
    fn invalid_configs() {
        let mut c = small(Scenario::Neutral);
        c.deme_size = 1;
        c.demes = 1;
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("demes") && err.contains("individuals"), "{err}");
    }

    #[test]
    fn two_deme_circle_has_one_pair() {
        let mut c = small(Scenario::Neutral);
        c.demes = 2;
        let migrations = c
            .clock_slots()
            .iter()
            .filter(|(s, _)| s.kind == EventKind::Migration)
            .count();
        assert_eq!(migrations, 1);
    }
}
