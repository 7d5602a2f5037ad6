//! The spatial Lambda-Fleming-Viot process with fluctuating selection on a
//! periodic grid, with optional tracers.
//!
//! The state is a density per cell. An event of centre `x` and radius `R`
//! affects every cell whose centre lies in the closed ball `B(x, R)`; parent
//! locations are uniform points of the ball, resolved to the cell that
//! contains them.

mod rescale;

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::domain::{Point, SpatialDomain};
use crate::environment::{EnvironmentField, EnvironmentSampler};
use crate::error::{ensure_finite, Error, Result};
use crate::field::FrequencyField;
use crate::kernel::EnvironmentKernel;
use crate::rng::ReplicateStreams;

pub use rescale::{local_average, run_rescaled_slfv, RescaleSpec, RescaledRun};

/// Minimum ratio of torus side to event radius.
pub const MIN_SIDE_OVER_RADIUS: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct SlfvParams {
    domain: SpatialDomain,
    radius: f64,
    impact: f64,
    selection: f64,
    env_rate: f64,
    intensity: f64,
    sampler: Arc<EnvironmentSampler>,
}

impl SlfvParams {
    /// `intensity` is the reproduction-event rate per unit volume and time
    /// (1 for the unscaled process). `env_rate` is `τ_env`.
    pub fn new(
        kernel: EnvironmentKernel,
        radius: f64,
        impact: f64,
        selection: f64,
        env_rate: f64,
        intensity: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("radius", radius),
            ("impact", impact),
            ("selection", selection),
            ("environment rate", env_rate),
            ("event intensity", intensity),
        ] {
            ensure_finite(name, v)?;
        }
        let domain = *kernel.domain();
        let h = domain.spacing();
        let mut problems = Vec::new();
        if radius < 2.0 * h {
            problems.push(format!(
                "radius {radius} must be at least twice the grid spacing {h}"
            ));
        }
        if domain.side() < MIN_SIDE_OVER_RADIUS * radius {
            problems.push(format!(
                "torus side {} must be at least {MIN_SIDE_OVER_RADIUS} times the radius {radius}",
                domain.side()
            ));
        }
        if !(impact > 0.0 && impact < 1.0) {
            problems.push(format!("impact {impact} must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&selection) {
            problems.push(format!("selection {selection} must lie in [0, 1]"));
        }
        if env_rate < 0.0 {
            problems.push(format!("environment rate {env_rate} must be non-negative"));
        }
        if intensity <= 0.0 {
            problems.push(format!("event intensity {intensity} must be positive"));
        }
        if !problems.is_empty() {
            return Err(Error::config(problems.join("; ")));
        }
        let sampler = Arc::new(EnvironmentSampler::new(kernel)?);
        Ok(Self {
            domain,
            radius,
            impact,
            selection,
            env_rate,
            intensity,
            sampler,
        })
    }

    pub fn domain(&self) -> &SpatialDomain {
        &self.domain
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn impact(&self) -> f64 {
        self.impact
    }

    pub fn selection(&self) -> f64 {
        self.selection
    }

    pub fn env_rate(&self) -> f64 {
        self.env_rate
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn kernel(&self) -> &EnvironmentKernel {
        self.sampler.kernel()
    }

    pub fn sampler(&self) -> &EnvironmentSampler {
        &self.sampler
    }

    /// Total reproduction-event rate over the torus.
    pub fn event_rate(&self) -> f64 {
        self.intensity * self.domain.volume()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Neutral,
    Selective,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::Neutral => "neutral",
            EventKind::Selective => "selective",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub t: f64,
    pub centre: Point,
    pub radius: f64,
    pub impact: f64,
    pub kind: EventKind,
}

/// Population density, optional marked sub-population, environment and time.
#[derive(Debug, Clone, PartialEq)]
pub struct SlfvState {
    w: FrequencyField,
    v: Option<FrequencyField>,
    env: EnvironmentField,
    t: f64,
}

impl SlfvState {
    pub fn new(w: FrequencyField, v: Option<FrequencyField>, env: EnvironmentField) -> Result<Self> {
        if env.values.len() != w.domain().cell_count() {
            return Err(Error::State(format!(
                "environment has {} cells, grid has {}",
                env.values.len(),
                w.domain().cell_count()
            )));
        }
        if env.values.iter().any(|&z| z != 1 && z != -1) {
            return Err(Error::State("environment values must be ±1".into()));
        }
        if let Some(v) = &v {
            if v.domain() != w.domain() {
                return Err(Error::State("tracer and population grids differ".into()));
            }
            if let Some(c) = (0..w.values().len()).find(|&c| v.get(c) > w.get(c)) {
                return Err(Error::State(format!(
                    "tracer exceeds population in cell {c}"
                )));
            }
        }
        Ok(Self { w, v, env, t: 0.0 })
    }

    /// Initial state with an environment drawn from `params`' kernel.
    pub fn initial<R: Rng + ?Sized>(
        params: &SlfvParams,
        w: FrequencyField,
        v: Option<FrequencyField>,
        env_rng: &mut R,
        seed: u64,
    ) -> Result<Self> {
        if w.domain() != params.domain() {
            return Err(Error::State("initial field is not on the parameter grid".into()));
        }
        let env = params.sampler.sample(env_rng, seed, 0);
        Self::new(w, v, env)
    }

    pub fn w(&self) -> &FrequencyField {
        &self.w
    }

    pub fn v(&self) -> Option<&FrequencyField> {
        self.v.as_ref()
    }

    pub fn env(&self) -> &EnvironmentField {
        &self.env
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    fn check_params(&self, params: &SlfvParams) -> Result<()> {
        if self.w.domain() != params.domain() {
            return Err(Error::State("state is not on the parameter grid".into()));
        }
        Ok(())
    }
}

/// Parental type with tracer information.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Parent {
    /// Type a carrying the marker.
    Marked,
    /// Type a without the marker.
    Unmarked,
    /// Type A.
    Upper,
}

impl Parent {
    fn is_a(self) -> bool {
        self != Parent::Upper
    }
}

fn uniform_in_ball<R: Rng + ?Sized>(domain: &SpatialDomain, centre: Point, radius: f64, rng: &mut R) -> Point {
    let p = match domain.dimension() {
        1 => [centre[0] + radius * (2.0 * rng.random::<f64>() - 1.0), 0.0],
        _ => {
            let r = radius * rng.random::<f64>().sqrt();
            let (s, c) = (2.0 * PI * rng.random::<f64>()).sin_cos();
            [centre[0] + r * c, centre[1] + r * s]
        }
    };
    domain.wrap_point(p)
}

fn draw_parent<R: Rng + ?Sized>(state: &SlfvState, centre: Point, radius: f64, rng: &mut R) -> Parent {
    let domain = state.w.domain();
    let cell = domain.cell_containing(uniform_in_ball(domain, centre, radius, rng));
    let w = state.w.get(cell);
    let v = state.v.as_ref().map_or(0.0, |v| v.get(cell));
    let u: f64 = rng.random();
    if u < v {
        Parent::Marked
    } else if u < w {
        Parent::Unmarked
    } else {
        Parent::Upper
    }
}

/// Replaces a fraction `impact` of every affected cell by the offspring type.
fn reproduce(state: &mut SlfvState, ev: &EventRecord, offspring: Parent, cells: &mut Vec<usize>) {
    let u = ev.impact;
    state.w.domain().cells_in_ball(ev.centre, ev.radius, cells);
    let w = state.w.values_mut();
    for &c in cells.iter() {
        w[c] = if offspring.is_a() {
            w[c] + u * (1.0 - w[c])
        } else {
            w[c] * (1.0 - u)
        };
    }
    if let Some(v) = state.v.as_mut() {
        let w = state.w.values();
        let v = v.values_mut();
        for &c in cells.iter() {
            let next = if offspring == Parent::Marked {
                v[c] + u * (1.0 - v[c])
            } else {
                v[c] * (1.0 - u)
            };
            v[c] = next.min(w[c]);
        }
    }
}

/// A neutral event: one parent, offspring inherit its type and marker.
pub fn apply_neutral_event<R: Rng + ?Sized>(
    state: &mut SlfvState,
    ev: &EventRecord,
    rng: &mut R,
) -> Result<()> {
    if ev.kind != EventKind::Neutral {
        return Err(Error::State("apply_neutral_event called with a selective event".into()));
    }
    let parent = draw_parent(state, ev.centre, ev.radius, rng);
    reproduce(state, ev, parent, &mut Vec::new());
    Ok(())
}

/// Offspring of a selective event given the two parents and the environment
/// at the event centre. `ζ = +1` needs both parents of type a to produce
/// type a; `ζ = -1` produces type a unless both parents are of type A.
fn selective_offspring(k0: Parent, k1: Parent, zeta: i8) -> Parent {
    if zeta > 0 {
        match (k0, k1) {
            (Parent::Marked, k) if k.is_a() => Parent::Marked,
            (k, j) if k.is_a() && j.is_a() => Parent::Unmarked,
            _ => Parent::Upper,
        }
    } else {
        match k0 {
            Parent::Upper => k1,
            k => k,
        }
    }
}

/// A selective event: two parents, the environment at the centre decides.
pub fn apply_selective_event<R: Rng + ?Sized>(
    state: &mut SlfvState,
    ev: &EventRecord,
    rng: &mut R,
) -> Result<()> {
    if ev.kind != EventKind::Selective {
        return Err(Error::State("apply_selective_event called with a neutral event".into()));
    }
    selective(state, ev, rng, &mut Vec::new());
    Ok(())
}

fn selective<R: Rng + ?Sized>(state: &mut SlfvState, ev: &EventRecord, rng: &mut R, cells: &mut Vec<usize>) {
    let k0 = draw_parent(state, ev.centre, ev.radius, rng);
    let k1 = draw_parent(state, ev.centre, ev.radius, rng);
    let zeta = state.env.get(state.w.domain().cell_containing(ev.centre));
    reproduce(state, ev, selective_offspring(k0, k1, zeta), cells);
}

/// Counts of what happened during a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub neutral: u64,
    pub selective: u64,
    pub environment: u64,
}

/// Event-driven simulator owning one trajectory.
///
/// Event times, centres and kinds are drawn from the event stream, parent
/// choices from the outcome stream and environment values from the
/// environment stream. Environment resampling times also come from the event
/// stream, so runs that differ only in the kernel see the same events.
#[derive(Debug)]
pub struct SlfvSimulator<'a> {
    params: &'a SlfvParams,
    state: SlfvState,
    streams: ReplicateStreams,
    next_event: f64,
    next_env: f64,
    cells: Vec<usize>,
    log: Option<Vec<EventRecord>>,
    counts: EventCounts,
}

impl<'a> SlfvSimulator<'a> {
    pub fn new(params: &'a SlfvParams, state: SlfvState, streams: ReplicateStreams) -> Result<Self> {
        state.check_params(params)?;
        let mut sim = Self {
            params,
            state,
            streams,
            next_event: f64::INFINITY,
            next_env: f64::INFINITY,
            cells: Vec::new(),
            log: None,
            counts: EventCounts::default(),
        };
        let t = sim.state.t;
        sim.next_event = t + sim.draw_wait(sim.params.event_rate());
        sim.next_env = t + sim.draw_wait(sim.params.env_rate);
        Ok(sim)
    }

    /// Keeps every reproduction event in memory.
    pub fn with_event_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    fn draw_wait(&mut self, rate: f64) -> f64 {
        if rate > 0.0 {
            Exp::new(rate).expect("positive rate").sample(&mut self.streams.events)
        } else {
            f64::INFINITY
        }
    }

    /// Runs all events with time `≤ until` and sets the clock to `until`.
    pub fn advance_to(&mut self, until: f64) {
        loop {
            let next = self.next_event.min(self.next_env);
            if next > until {
                break;
            }
            if self.next_env < self.next_event {
                self.state.t = self.next_env;
                let epoch = self.state.env.epoch + 1;
                let seed = self.state.env.seed;
                self.state.env =
                    self.params
                        .sampler
                        .sample(&mut self.streams.environment, seed, epoch);
                self.counts.environment += 1;
                self.next_env = self.state.t + self.draw_wait(self.params.env_rate);
            } else {
                self.state.t = self.next_event;
                let ev = self.draw_event();
                match ev.kind {
                    EventKind::Neutral => {
                        let parent =
                            draw_parent(&self.state, ev.centre, ev.radius, &mut self.streams.outcomes);
                        reproduce(&mut self.state, &ev, parent, &mut self.cells);
                        self.counts.neutral += 1;
                    }
                    EventKind::Selective => {
                        selective(&mut self.state, &ev, &mut self.streams.outcomes, &mut self.cells);
                        self.counts.selective += 1;
                    }
                }
                if let Some(log) = self.log.as_mut() {
                    log.push(ev);
                }
                self.next_event = self.state.t + self.draw_wait(self.params.event_rate());
            }
        }
        self.state.t = self.state.t.max(until);
    }

    fn draw_event(&mut self) -> EventRecord {
        let domain = &self.params.domain;
        let rng = &mut self.streams.events;
        let side = domain.side();
        let mut centre = [0.0; 2];
        for c in centre.iter_mut().take(domain.dimension()) {
            *c = side * rng.random::<f64>();
        }
        let centre = domain.wrap_point(centre);
        let kind = if rng.random::<f64>() < self.params.selection {
            EventKind::Selective
        } else {
            EventKind::Neutral
        };
        EventRecord {
            t: self.state.t,
            centre,
            radius: self.params.radius,
            impact: self.params.impact,
            kind,
        }
    }

    pub fn state(&self) -> &SlfvState {
        &self.state
    }

    pub fn into_state(self) -> SlfvState {
        self.state
    }

    pub fn counts(&self) -> EventCounts {
        self.counts
    }

    pub fn events(&self) -> Option<&[EventRecord]> {
        self.log.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlfvSnapshot {
    pub t: f64,
    pub w: Vec<f64>,
    pub v: Option<Vec<f64>>,
    pub epoch: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlfvRun {
    pub snapshots: Vec<SlfvSnapshot>,
    pub events: Vec<EventRecord>,
    pub counts: EventCounts,
    pub final_state: SlfvState,
}

/// Runs to `horizon`, recording at `0, record_dt, 2 record_dt, …` and at the horizon.
///
/// When `log_events` is set the run also returns every reproduction event.
pub fn run_slfv(
    params: &SlfvParams,
    initial: SlfvState,
    horizon: f64,
    record_dt: f64,
    streams: ReplicateStreams,
    log_events: bool,
) -> Result<SlfvRun> {
    ensure_finite("horizon", horizon)?;
    ensure_finite("record interval", record_dt)?;
    if horizon < 0.0 || record_dt <= 0.0 {
        return Err(Error::config(
            "horizon must be non-negative and the record interval positive",
        ));
    }
    let start = initial.t;
    let mut sim = SlfvSimulator::new(params, initial, streams)?;
    if log_events {
        sim = sim.with_event_log();
    }
    let mut snapshots = Vec::new();
    let mut k = 0u64;
    loop {
        let t = (start + k as f64 * record_dt).min(start + horizon);
        sim.advance_to(t);
        let s = sim.state();
        snapshots.push(SlfvSnapshot {
            t,
            w: s.w.values().to_vec(),
            v: s.v.as_ref().map(|v| v.values().to_vec()),
            epoch: s.env.epoch,
        });
        if t >= start + horizon {
            break;
        }
        k += 1;
    }
    let counts = sim.counts();
    let events = sim.events().map(<[_]>::to_vec).unwrap_or_default();
    Ok(SlfvRun {
        snapshots,
        events,
        counts,
        final_state: sim.into_state(),
    })
}

/// Event log as CSV with columns `t,x0[,x1],kind,u,r`.
pub fn write_event_log<W: Write>(out: &mut W, dimension: usize, events: &[EventRecord]) -> std::io::Result<()> {
    write!(out, "t")?;
    for axis in 0..dimension {
        write!(out, ",x{axis}")?;
    }
    writeln!(out, ",kind,u,r")?;
    for ev in events {
        write!(out, "{:?}", ev.t)?;
        for axis in 0..dimension {
            write!(out, ",{:?}", ev.centre[axis])?;
        }
        writeln!(out, ",{},{:?},{:?}", ev.kind.label(), ev.impact, ev.radius)?;
    }
    Ok(())
}
