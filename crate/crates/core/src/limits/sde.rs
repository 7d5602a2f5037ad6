//! Euler-Maruyama for the limiting diffusion of the rescaled non-spatial process:
//!
//! `dp = ū²s² p(1-p)(1-2p) dt + ū √(p(1-p)) dB¹ + √2 ū s p(1-p) dB²`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_finite, Error, Result};
use crate::nonspatial::EmpiricalLaw;
use crate::parallel::map_replicates;
use crate::rng::{RngContract, Substream};

/// Default and conventional upper limit for the time step.
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionParams {
    impact: f64,
    selection: f64,
    dt: f64,
}

impl DiffusionParams {
    /// `impact` is `ū ∈ (0, 1]`, `selection` is `s ≥ 0`.
    pub fn new(impact: f64, selection: f64, dt: f64) -> Result<Self> {
        ensure_finite("impact", impact)?;
        ensure_finite("selection", selection)?;
        ensure_finite("time step", dt)?;
        let mut problems = Vec::new();
        if !(impact > 0.0 && impact <= 1.0) {
            problems.push(format!("impact {impact} must lie in (0, 1]"));
        }
        if selection < 0.0 {
            problems.push(format!("selection {selection} must be non-negative"));
        }
        if dt <= 0.0 {
            problems.push(format!("time step {dt} must be positive"));
        }
        if !problems.is_empty() {
            return Err(Error::config(problems.join("; ")));
        }
        Ok(Self {
            impact,
            selection,
            dt,
        })
    }

    pub fn impact(&self) -> f64 {
        self.impact
    }

    pub fn selection(&self) -> f64 {
        self.selection
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

/// How often an integrator had to project back onto its state space.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClampCounter {
    pub clamps: u64,
    /// Number of scalar updates (cell-steps for fields).
    pub updates: u64,
}

impl ClampCounter {
    pub fn rate(&self) -> f64 {
        if self.updates == 0 {
            0.0
        } else {
            self.clamps as f64 / self.updates as f64
        }
    }

    pub fn merge(&mut self, other: ClampCounter) {
        self.clamps += other.clamps;
        self.updates += other.updates;
    }

    /// Clamps `x` into `[lo, hi]`, counting the update.
    pub(crate) fn clamp(&mut self, x: f64, lo: f64, hi: f64) -> f64 {
        self.updates += 1;
        if x < lo {
            self.clamps += 1;
            lo
        } else if x > hi {
            self.clamps += 1;
            hi
        } else {
            x
        }
    }
}

/// One Euler-Maruyama step driven by the standard normals `z = [Z₁, Z₂]`.
pub fn sde_step(p: f64, params: &DiffusionParams, z: [f64; 2], clamps: &mut ClampCounter) -> f64 {
    let (u, s, dt) = (params.impact, params.selection, params.dt);
    let q = p * (1.0 - p);
    let sqrt_dt = dt.sqrt();
    let next = p
        + u * u * s * s * q * (1.0 - 2.0 * p) * dt
        + u * q.max(0.0).sqrt() * sqrt_dt * z[0]
        + std::f64::consts::SQRT_2 * u * s * q * sqrt_dt * z[1];
    clamps.clamp(next, 0.0, 1.0)
}

/// Integrates from `p0` over `[0, horizon]`; the last step is shortened to land on `horizon`.
pub fn simulate_diffusion<R: Rng + ?Sized>(
    params: &DiffusionParams,
    p0: f64,
    horizon: f64,
    rng: &mut R,
    clamps: &mut ClampCounter,
) -> f64 {
    let mut p = p0;
    let mut t = 0.0;
    while t < horizon {
        let step = params.dt.min(horizon - t);
        let local = DiffusionParams { dt: step, ..*params };
        let z = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
        p = sde_step(p, &local, z, clamps);
        // Near-multiples of dt would otherwise leave a spurious tiny last step.
        t = if horizon - (t + step) < 1e-12 * horizon {
            horizon
        } else {
            t + step
        };
    }
    p
}

/// Empirical law of `p(horizon)` over independent replicates, with the pooled clamp counter.
pub fn diffusion_law(
    params: &DiffusionParams,
    p0: f64,
    horizon: f64,
    replicates: usize,
    contract: &RngContract,
) -> Result<(EmpiricalLaw, ClampCounter)> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::config(format!("initial frequency {p0} outside [0, 1]")));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::config(format!("horizon {horizon} must be non-negative")));
    }
    let runs = map_replicates(replicates, |r| {
        let mut rng = contract.stream(Substream::Noise, r);
        let mut clamps = ClampCounter::default();
        let p = simulate_diffusion(params, p0, horizon, &mut rng, &mut clamps);
        (p, clamps)
    });
    let mut total = ClampCounter::default();
    let values = runs
        .into_iter()
        .map(|(p, c)| {
            total.merge(c);
            p
        })
        .collect();
    Ok((EmpiricalLaw::new(values), total))
}
