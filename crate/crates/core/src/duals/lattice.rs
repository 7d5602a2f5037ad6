//! Lattice analogue of the spatial duality in one dimension.
//!
//! Sites `0..K` on a ring of spacing `δ`. The lattice system
//!
//! `dX_i = D (X_{i+1} + X_{i-1} - 2X_i) dt + ½ū²s²(X_i³ - X_i) dt
//!        + ū √((1 - X_i²)/δ) dB_i¹ + ū s √(1/(2δ)) (1 - X_i²) dB_i²`
//!
//! with `D = ūΓ_R/δ²` is dual to branching-annihilating random walks that jump
//! to each neighbour at rate `D`, split into three at rate `ū²s²/2`, and per
//! collocated pair annihilate at rate `ū²(1 + s²/2)/δ` or replicate at rate
//! `ū²s²/(2δ)`.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::{EnvironmentKernel, KernelKind};
use crate::limits::{gamma_r, ClampCounter};
use crate::parallel::map_replicates;
use crate::rng::{RngContract, Substream};

use super::{check_rates, check_time, power_of, step_count, DualityReport};

/// Largest ring on which the lattice check is run.
pub const MAX_LATTICE_SITES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeParams {
    sites: usize,
    spacing: f64,
    impact: f64,
    selection: f64,
    gamma: f64,
}

impl LatticeParams {
    /// The environment must be white across sites: with spatially correlated
    /// noise the cross terms `g(x,y) X(x) X(y) (1 - X(x)²)(1 - X(y)²)` have no
    /// particle interpretation and the identity fails.
    pub fn new(kernel: &EnvironmentKernel, impact: f64, selection: f64, radius: f64) -> Result<Self> {
        check_rates(impact, selection)?;
        if kernel.kind() != KernelKind::WhiteLattice {
            return Err(Error::Duality(
                "the lattice duality only holds for independent per-site environments".into(),
            ));
        }
        let domain = kernel.domain();
        if domain.dimension() != 1 {
            return Err(Error::Duality("the lattice dual lives on a one-dimensional ring".into()));
        }
        let sites = domain.cells_per_side();
        if !(2..=MAX_LATTICE_SITES).contains(&sites) {
            return Err(Error::config(format!(
                "lattice must have between 2 and {MAX_LATTICE_SITES} sites, got {sites}"
            )));
        }
        Ok(Self {
            sites,
            spacing: domain.spacing(),
            impact,
            selection,
            gamma: gamma_r(radius, 1)?,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn impact(&self) -> f64 {
        self.impact
    }

    pub fn selection(&self) -> f64 {
        self.selection
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rates(&self) -> LatticeRates {
        lattice_rates(self.impact, self.selection, self.gamma, self.spacing)
    }
}

/// Per-particle and per-pair rates of the lattice dual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeRates {
    /// To each neighbour.
    pub walk: f64,
    pub branch: f64,
    /// Per collocated pair.
    pub annihilate: f64,
    /// Per collocated pair.
    pub replicate: f64,
}

pub fn lattice_rates(impact: f64, selection: f64, gamma: f64, spacing: f64) -> LatticeRates {
    let (u2, s2) = (impact * impact, selection * selection);
    LatticeRates {
        walk: impact * gamma / (spacing * spacing),
        branch: 0.5 * u2 * s2,
        annihilate: u2 * (1.0 + 0.5 * s2) / spacing,
        replicate: 0.5 * u2 * s2 / spacing,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDualState {
    pub counts: Vec<u64>,
    pub t: f64,
}

impl LatticeDualState {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn site_rate(n: u64, r: &LatticeRates) -> f64 {
    let pairs = (n * n.saturating_sub(1) / 2) as f64;
    n as f64 * (2.0 * r.walk + r.branch) + pairs * (r.annihilate + r.replicate)
}

/// Performs the next transition in place; returns `false` if nothing can happen.
pub fn lattice_dual_step<R: Rng + ?Sized>(
    state: &mut LatticeDualState,
    rates: &LatticeRates,
    rng: &mut R,
) -> bool {
    let per_site: Vec<f64> = state.counts.iter().map(|&n| site_rate(n, rates)).collect();
    let total: f64 = per_site.iter().sum();
    if total <= 0.0 {
        return false;
    }
    state.t += Exp::new(total).expect("positive rate").sample(rng);
    let mut target = rng.random::<f64>() * total;
    let k = state.counts.len();
    let mut site = k - 1;
    for (i, &r) in per_site.iter().enumerate() {
        if target < r {
            site = i;
            break;
        }
        target -= r;
    }
    let n = state.counts[site];
    let walk = n as f64 * 2.0 * rates.walk;
    let branch = n as f64 * rates.branch;
    let pairs = (n * n.saturating_sub(1) / 2) as f64;
    let annihilate = pairs * rates.annihilate;
    if target < walk {
        let to = if target < 0.5 * walk {
            (site + k - 1) % k
        } else {
            (site + 1) % k
        };
        state.counts[site] -= 1;
        state.counts[to] += 1;
    } else if target < walk + branch {
        state.counts[site] += 2;
    } else if target < walk + branch + annihilate {
        state.counts[site] -= 2;
    } else {
        state.counts[site] += 2;
    }
    true
}

pub fn simulate_lattice_dual<R: Rng + ?Sized>(
    initial: &[u64],
    rates: &LatticeRates,
    horizon: f64,
    rng: &mut R,
) -> Vec<u64> {
    let mut state = LatticeDualState {
        counts: initial.to_vec(),
        t: 0.0,
    };
    loop {
        let before = state.clone();
        if !lattice_dual_step(&mut state, rates, rng) || state.t > horizon {
            return before.counts;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSdeState {
    pub x: Vec<f64>,
}

/// One Euler-Maruyama step of the lattice system, clamped to `[-1, 1]`.
pub fn lattice_sde_step<R: Rng + ?Sized>(
    state: &mut LatticeSdeState,
    params: &LatticeParams,
    dt: f64,
    rng: &mut R,
    clamps: &mut ClampCounter,
) {
    let k = state.x.len();
    let (u, s, delta) = (params.impact, params.selection, params.spacing);
    let d = params.rates().walk;
    let sqdt = dt.sqrt();
    let sigma1 = u / delta.sqrt();
    let sigma2 = u * s / (2.0 * delta).sqrt();
    let old = state.x.clone();
    for i in 0..k {
        let x = old[i];
        let lap = old[(i + 1) % k] + old[(i + k - 1) % k] - 2.0 * x;
        let q = 1.0 - x * x;
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let next = x
            + (d * lap + 0.5 * u * u * s * s * (x * x * x - x)) * dt
            + sigma1 * q.max(0.0).sqrt() * sqdt * z1
            + sigma2 * q * sqdt * z2;
        state.x[i] = clamps.clamp(next, -1.0, 1.0);
    }
}

pub fn simulate_lattice_sde<R: Rng + ?Sized>(
    x0: &[f64],
    params: &LatticeParams,
    dt: f64,
    horizon: f64,
    rng: &mut R,
    clamps: &mut ClampCounter,
) -> Vec<f64> {
    let steps = step_count(horizon, dt);
    let h = if steps == 0 { 0.0 } else { horizon / steps as f64 };
    let mut state = LatticeSdeState { x: x0.to_vec() };
    for _ in 0..steps {
        lattice_sde_step(&mut state, params, h, rng, clamps);
    }
    state.x
}

fn moment(x: &[f64], counts: &[u64]) -> f64 {
    x.iter().zip(counts).map(|(&x, &n)| power_of(x, n)).product()
}

/// `E[∏ X_t(i)^{η₀(i)}]` against `E[∏ X₀(i)^{η_t(i)}]`.
#[allow(clippy::too_many_arguments)]
pub fn duality_check_lattice(
    params: &LatticeParams,
    x0: &[f64],
    dual0: &[u64],
    horizon: f64,
    dt: f64,
    replicates: usize,
    contract: &RngContract,
) -> Result<DualityReport> {
    check_time(horizon, dt)?;
    let k = params.sites;
    if x0.len() != k || dual0.len() != k {
        return Err(Error::config(format!(
            "initial values and dual counts must both have {k} entries"
        )));
    }
    if x0.iter().any(|x| !(-1.0..=1.0).contains(x)) {
        return Err(Error::config("initial values must lie in [-1, 1]"));
    }
    if replicates < 2 {
        return Err(Error::config("a duality check needs at least two replicates"));
    }
    let forward = map_replicates(replicates, |r| {
        let mut rng = contract.stream(Substream::Noise, r);
        let mut clamps = ClampCounter::default();
        let x = simulate_lattice_sde(x0, params, dt, horizon, &mut rng, &mut clamps);
        (moment(&x, dual0), clamps)
    });
    let mut clamps = ClampCounter::default();
    let lhs: Vec<f64> = forward
        .into_iter()
        .map(|(v, c)| {
            clamps.merge(c);
            v
        })
        .collect();
    let rates = params.rates();
    let rhs = map_replicates(replicates, |r| {
        let mut rng = contract.stream(Substream::Outcomes, r);
        let counts = simulate_lattice_dual(dual0, &rates, horizon, &mut rng);
        moment(x0, &counts)
    });
    let odd = dual0.iter().sum::<u64>() % 2 == 1;
    Ok(DualityReport::from_samples(&lhs, &rhs, odd, clamps))
}
