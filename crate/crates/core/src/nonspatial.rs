//! Non-spatial Lambda-Fleming-Viot process with fluctuating selection.
//!
//! Reproduction events arrive at rate `λ`; at each one a parental type is
//! drawn with a selective bias whose direction is set by the environment
//! `ζ ∈ {-1, +1}` (ζ = -1 favours type a), and a fraction `u` of the
//! population is replaced by its offspring. The environment is resampled
//! uniformly at the points of an independent rate `τ_env` Poisson process.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::environment::uniform_sign;
use crate::error::{ensure_finite, Error, Result};
use crate::parallel::map_replicates;
use crate::rng::{ReplicateStreams, RngContract};
use crate::stats::Summary;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonspatialState {
    /// Proportion of type a.
    pub p: f64,
    pub zeta: i8,
    pub t: f64,
}

impl NonspatialState {
    pub fn new(p: f64, zeta: i8) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::State(format!("frequency {p} outside [0, 1]")));
        }
        if zeta != 1 && zeta != -1 {
            return Err(Error::State(format!("environment {zeta} is not ±1")));
        }
        Ok(Self { p, zeta, t: 0.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonspatialParams {
    event_rate: f64,
    impact: f64,
    selection: f64,
    env_rate: f64,
}

impl NonspatialParams {
    pub fn new(event_rate: f64, impact: f64, selection: f64, env_rate: f64) -> Result<Self> {
        for (name, v) in [
            ("event rate", event_rate),
            ("impact", impact),
            ("selection", selection),
            ("environment rate", env_rate),
        ] {
            ensure_finite(name, v)?;
        }
        let mut problems = Vec::new();
        if event_rate < 0.0 {
            problems.push(format!("event rate {event_rate} must be >= 0"));
        }
        if !(impact > 0.0 && impact < 1.0) {
            problems.push(format!("impact {impact} must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&selection) {
            problems.push(format!("selection {selection} must lie in [0, 1)"));
        }
        if env_rate <= 0.0 {
            problems.push(format!("environment rate {env_rate} must be > 0"));
        }
        if problems.is_empty() {
            Ok(Self {
                event_rate,
                impact,
                selection,
                env_rate,
            })
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }

    pub fn event_rate(&self) -> f64 {
        self.event_rate
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
}

/// Probability that the parent of a reproduction event is of type a.
pub fn parent_a_probability(p: f64, zeta: i8, selection: f64) -> f64 {
    if zeta < 0 {
        (1.0 + selection) * p / (1.0 + selection * p)
    } else {
        p / (1.0 + selection * (1.0 - p))
    }
}

/// Frequency after replacing a fraction `impact` by offspring of one type.
///
/// Written as `p + u(1-p)` / `p(1-u)` so the result never leaves `[0, 1]`
/// under rounding and both boundaries are fixed exactly.
pub fn replace_fraction(p: f64, impact: f64, offspring_a: bool) -> f64 {
    if offspring_a {
        p + impact * (1.0 - p)
    } else {
        p * (1.0 - impact)
    }
}

/// One reproduction event; consumes a single uniform from `rng`.
pub fn reproduction_step<R: Rng + ?Sized>(
    state: NonspatialState,
    params: &NonspatialParams,
    rng: &mut R,
) -> NonspatialState {
    let prob = parent_a_probability(state.p, state.zeta, params.selection);
    let offspring_a = rng.random::<f64>() < prob;
    NonspatialState {
        p: replace_fraction(state.p, params.impact, offspring_a),
        ..state
    }
}

/// Resamples the environment uniformly from {-1, +1}.
pub fn environment_step<R: Rng + ?Sized>(state: NonspatialState, rng: &mut R) -> NonspatialState {
    NonspatialState {
        zeta: uniform_sign(rng),
        ..state
    }
}

/// Simulates one trajectory and samples it at multiples of `record_dt`.
///
/// The environment starts from a uniform draw. Samples are left limits: a
/// jump exactly at a record time is not included in that record.
pub fn run_nonspatial(
    params: &NonspatialParams,
    p0: f64,
    horizon: f64,
    record_dt: f64,
    streams: &mut ReplicateStreams,
) -> Result<Vec<NonspatialState>> {
    ensure_finite("horizon", horizon)?;
    ensure_finite("record interval", record_dt)?;
    if horizon <= 0.0 || record_dt <= 0.0 {
        return Err(Error::config("horizon and record interval must be positive"));
    }
    let records = (horizon / record_dt * (1.0 + 1e-12)).floor() as usize;
    let mut out = Vec::with_capacity(records + 1);
    simulate(params, p0, horizon, streams, |t, s| {
        while out.len() <= records && (out.len() as f64) * record_dt <= t {
            out.push(NonspatialState {
                t: out.len() as f64 * record_dt,
                ..s
            });
        }
    })?;
    Ok(out)
}

/// Frequency at `horizon` without recording the path.
pub fn final_frequency(
    params: &NonspatialParams,
    p0: f64,
    horizon: f64,
    streams: &mut ReplicateStreams,
) -> Result<f64> {
    simulate(params, p0, horizon, streams, |_, _| {}).map(|s| s.p)
}

/// Core event loop. `observe(t, state)` is called with the pre-jump state
/// before every event at time `t`, and once at `horizon`.
fn simulate<F>(
    params: &NonspatialParams,
    p0: f64,
    horizon: f64,
    streams: &mut ReplicateStreams,
    mut observe: F,
) -> Result<NonspatialState>
where
    F: FnMut(f64, NonspatialState),
{
    let mut state = NonspatialState::new(p0, uniform_sign(&mut streams.environment))?;
    let total = params.event_rate + params.env_rate;
    let waiting = Exp::new(total).map_err(|e| Error::config(e.to_string()))?;
    let reproduction_share = params.event_rate / total;
    loop {
        let t_next = state.t + waiting.sample(&mut streams.events);
        if t_next > horizon {
            observe(horizon, state);
            state.t = horizon;
            return Ok(state);
        }
        observe(t_next, state);
        state.t = t_next;
        if streams.events.random::<f64>() < reproduction_share {
            state = reproduction_step(state, params, &mut streams.outcomes);
        } else {
            state = environment_step(state, &mut streams.environment);
        }
    }
}

/// The rescaling `u_n = ū n^{-1/2}`, `s_n = s n^{-1/2+α}`, event rate `n`,
/// environment rate `n^{2α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingSchedule {
    pub level: f64,
    pub alpha: f64,
    pub base_impact: f64,
    pub base_selection: f64,
}

impl ScalingSchedule {
    pub fn new(level: f64, alpha: f64, base_impact: f64, base_selection: f64) -> Result<Self> {
        for (name, v) in [
            ("level", level),
            ("alpha", alpha),
            ("base impact", base_impact),
            ("base selection", base_selection),
        ] {
            ensure_finite(name, v)?;
        }
        let mut problems = Vec::new();
        if level < 1.0 {
            problems.push(format!("level n = {level} must be >= 1"));
        }
        if !(alpha > 0.0 && alpha < 0.25) {
            problems.push(format!("alpha = {alpha} must lie in (0, 1/4)"));
        }
        if base_impact <= 0.0 {
            problems.push("base impact must be positive".to_string());
        }
        if base_selection < 0.0 {
            problems.push("base selection must be non-negative".to_string());
        }
        if !problems.is_empty() {
            return Err(Error::config(problems.join("; ")));
        }
        let s = Self {
            level,
            alpha,
            base_impact,
            base_selection,
        };
        s.params()?;
        Ok(s)
    }

    pub fn impact(&self) -> f64 {
        self.base_impact * self.level.powf(-0.5)
    }

    pub fn selection(&self) -> f64 {
        self.base_selection * self.level.powf(-0.5 + self.alpha)
    }

    pub fn env_rate(&self) -> f64 {
        self.level.powf(2.0 * self.alpha)
    }

    /// Unscaled parameters at this level.
    pub fn params(&self) -> Result<NonspatialParams> {
        let (u, s) = (self.impact(), self.selection());
        if u >= 1.0 || s >= 1.0 {
            return Err(Error::config(format!(
                "at level n = {} the scaled impact {u} and selection {s} must both be < 1",
                self.level
            )));
        }
        NonspatialParams::new(self.level, u, s, self.env_rate())
    }
}

/// Empirical law of a scalar across replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    pub values: Vec<f64>,
    pub summary: Summary,
}

impl EmpiricalLaw {
    pub fn new(values: Vec<f64>) -> Self {
        let summary = Summary::of(&values);
        Self { values, summary }
    }
}

/// Law of `p(horizon)` for the rescaled process at `schedule.level`.
pub fn run_rescaled(
    schedule: &ScalingSchedule,
    p0: f64,
    horizon: f64,
    replicates: usize,
    contract: &RngContract,
) -> Result<EmpiricalLaw> {
    let params = schedule.params()?;
    if replicates == 0 {
        return Err(Error::config("at least one replicate is required"));
    }
    let values = map_replicates(replicates, |r| {
        final_frequency(&params, p0, horizon, &mut contract.replicate(r))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(EmpiricalLaw::new(values))
}

/// Writes `t,p,zeta` rows with one header line.
pub fn write_trajectory_csv<W: Write>(out: &mut W, trajectory: &[NonspatialState]) -> std::io::Result<()> {
    writeln!(out, "t,p,zeta")?;
    for s in trajectory {
        writeln!(out, "{:?},{:?},{}", s.t, s.p, s.zeta)?;
    }
    Ok(())
}
