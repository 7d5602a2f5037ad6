//! Branching-annihilating duals and Monte-Carlo checks of moment duality.
//!
//! With `X = 1 - 2p` the limiting diffusion becomes
//! `dX = ½ū²s²(X³ - X) dt + ū√(1-X²) dB¹ + (√2/2) ū s (1-X²) dB²`,
//! and `E_{X₀}[X_t^{N₀}] = E_{N₀}[X₀^{N_t}]` for the jump process `N` of
//! [`jump_rates`].

mod lattice;

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{ensure_finite, Error, Result};
use crate::limits::ClampCounter;
use crate::parallel::map_replicates;
use crate::rng::{RngContract, Substream};
use crate::stats::{z_score, Summary};

pub use lattice::{
    duality_check_lattice, lattice_dual_step, lattice_rates, lattice_sde_step, simulate_lattice_dual,
    simulate_lattice_sde, LatticeDualState, LatticeParams, LatticeRates, LatticeSdeState,
    MAX_LATTICE_SITES,
};

/// Agreement threshold of the duality reports, in combined standard errors.
pub const PASS_Z: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpDualState {
    pub n: u64,
    pub t: f64,
}

fn pairs(n: u64) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// `(up, down)` rates of `N ↦ N ± 2`.
pub fn jump_rates(n: u64, impact: f64, selection: f64) -> (f64, f64) {
    let (u2, s2) = (impact * impact, selection * selection);
    let c2 = pairs(n);
    (0.5 * u2 * s2 * (n as f64 + c2), u2 * (1.0 + 0.5 * s2) * c2)
}

/// The next transition, or `None` once both rates vanish.
pub fn jump_dual_step<R: Rng + ?Sized>(
    state: JumpDualState,
    impact: f64,
    selection: f64,
    rng: &mut R,
) -> Option<JumpDualState> {
    let (up, down) = jump_rates(state.n, impact, selection);
    let total = up + down;
    if total <= 0.0 {
        return None;
    }
    let wait = Exp::new(total).expect("positive rate").sample(rng);
    let n = if rng.random::<f64>() * total < up {
        state.n + 2
    } else {
        state.n - 2
    };
    Some(JumpDualState {
        n,
        t: state.t + wait,
    })
}

/// `N_horizon` from `N_0 = n0`.
pub fn simulate_jump_dual<R: Rng + ?Sized>(
    n0: u64,
    impact: f64,
    selection: f64,
    horizon: f64,
    rng: &mut R,
) -> u64 {
    let mut state = JumpDualState { n: n0, t: 0.0 };
    while let Some(next) = jump_dual_step(state, impact, selection, rng) {
        if next.t > horizon {
            break;
        }
        state = next;
    }
    state.n
}

/// One Euler-Maruyama step of the transformed diffusion, clamped to `[-1, 1]`.
pub fn transformed_sde_step(
    x: f64,
    impact: f64,
    selection: f64,
    dt: f64,
    z: [f64; 2],
    clamps: &mut ClampCounter,
) -> f64 {
    let (u, s) = (impact, selection);
    let q = 1.0 - x * x;
    let sqdt = dt.sqrt();
    let next = x
        + 0.5 * u * u * s * s * (x * x * x - x) * dt
        + u * q.max(0.0).sqrt() * sqdt * z[0]
        + std::f64::consts::FRAC_1_SQRT_2 * u * s * q * sqdt * z[1];
    clamps.clamp(next, -1.0, 1.0)
}

pub fn simulate_transformed<R: Rng + ?Sized>(
    x0: f64,
    impact: f64,
    selection: f64,
    dt: f64,
    horizon: f64,
    rng: &mut R,
    clamps: &mut ClampCounter,
) -> f64 {
    let steps = step_count(horizon, dt);
    let h = if steps == 0 { 0.0 } else { horizon / steps as f64 };
    let mut x = x0;
    for _ in 0..steps {
        let z = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
        x = transformed_sde_step(x, impact, selection, h, z, clamps);
    }
    x
}

/// Number of equal steps of length at most `dt` covering `horizon`.
pub(crate) fn step_count(horizon: f64, dt: f64) -> u64 {
    let raw = horizon / dt;
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 * raw.max(1.0) {
        rounded as u64
    } else {
        raw.ceil() as u64
    }
}

/// Both sides of a duality identity with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityReport {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub z_score: f64,
    pub pass: bool,
    /// Set when the dual started from an odd number of particles: the
    /// identity still holds but the dual need not die out.
    pub odd_start: bool,
    pub clamp_rate: f64,
}

impl DualityReport {
    pub(crate) fn from_samples(lhs: &[f64], rhs: &[f64], odd_start: bool, clamps: ClampCounter) -> Self {
        let (l, r) = (Summary::of(lhs), Summary::of(rhs));
        let z = z_score(l.mean, l.mean_se, r.mean, r.mean_se);
        Self {
            lhs: l.mean,
            lhs_se: l.mean_se,
            rhs: r.mean,
            rhs_se: r.mean_se,
            z_score: z,
            pass: z.abs() <= PASS_Z,
            odd_start,
            clamp_rate: clamps.rate(),
        }
    }
}

pub(crate) fn check_rates(impact: f64, selection: f64) -> Result<()> {
    ensure_finite("impact", impact)?;
    ensure_finite("selection", selection)?;
    if !(impact > 0.0 && impact <= 1.0) {
        return Err(Error::config(format!("impact {impact} must lie in (0, 1]")));
    }
    if selection < 0.0 {
        return Err(Error::config(format!("selection {selection} must be non-negative")));
    }
    Ok(())
}

pub(crate) fn check_time(horizon: f64, dt: f64) -> Result<()> {
    ensure_finite("horizon", horizon)?;
    ensure_finite("time step", dt)?;
    if horizon < 0.0 || dt <= 0.0 {
        return Err(Error::config("horizon must be non-negative and the time step positive"));
    }
    Ok(())
}

/// Monte-Carlo estimates of `E_{X₀}[X_t^{N₀}]` (Euler-Maruyama, noise stream)
/// and `E_{N₀}[X₀^{N_t}]` (jump dual, outcome stream).
#[allow(clippy::too_many_arguments)]
pub fn duality_check_nonspatial(
    x0: f64,
    n0: u64,
    impact: f64,
    selection: f64,
    horizon: f64,
    dt: f64,
    replicates: usize,
    contract: &RngContract,
) -> Result<DualityReport> {
    check_rates(impact, selection)?;
    check_time(horizon, dt)?;
    if !(-1.0..=1.0).contains(&x0) {
        return Err(Error::config(format!("X0 = {x0} outside [-1, 1]")));
    }
    if replicates < 2 {
        return Err(Error::config("a duality check needs at least two replicates"));
    }
    let power = i32::try_from(n0).map_err(|_| Error::config("N0 too large"))?;
    let forward = map_replicates(replicates, |r| {
        let mut rng = contract.stream(Substream::Noise, r);
        let mut clamps = ClampCounter::default();
        let x = simulate_transformed(x0, impact, selection, dt, horizon, &mut rng, &mut clamps);
        (x.powi(power), clamps)
    });
    let mut clamps = ClampCounter::default();
    let lhs: Vec<f64> = forward
        .into_iter()
        .map(|(v, c)| {
            clamps.merge(c);
            v
        })
        .collect();
    let rhs = map_replicates(replicates, |r| {
        let mut rng = contract.stream(Substream::Outcomes, r);
        let n = simulate_jump_dual(n0, impact, selection, horizon, &mut rng);
        power_of(x0, n)
    });
    Ok(DualityReport::from_samples(&lhs, &rhs, n0 % 2 == 1, clamps))
}

/// `x^n` with `0^0 = 1`.
pub(crate) fn power_of(x: f64, n: u64) -> f64 {
    match i32::try_from(n) {
        Ok(k) => x.powi(k),
        Err(_) => x.powf(n as f64),
    }
}

pub const REPORT_HEADER: &str = "lhs,lhs_se,rhs,rhs_se,z_score,pass";

pub fn write_report_csv<W: Write>(out: &mut W, reports: &[DualityReport]) -> std::io::Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{:?},{:?},{:?},{:?},{:?},{}",
            r.lhs, r.lhs_se, r.rhs, r.rhs_se, r.z_score, r.pass
        )?;
    }
    Ok(())
}
