//! Explicit finite-difference integrators for the limiting SPDEs of the
//! rescaled spatial process and of its tracer extension.
//!
//! `dw = [(ūΓ_R/2) Δw + ū²V_R²s² w(1-w)(1-2w)] dt + √2 ū V_R s w(1-w) W(dt, dx)`
//! with, in `d = 1`, an additional `2Rū √(w(1-w)) 𝒲(dt, dx)` space-time white noise.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::domain::SpatialDomain;
use crate::error::{ensure_finite, Error, Result};
use crate::field::{laplacian, FrequencyField};
use crate::kernel::EnvironmentKernel;

use super::constants::{gamma_r, v_r};
use super::noise::ColouredNoise;
use super::sde::ClampCounter;

/// Which parts of the equation are integrated. The Laplacian is always on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpdeTerms {
    pub reaction: bool,
    pub coloured_noise: bool,
    /// Space-time white noise; only meaningful in `d = 1`.
    pub white_noise: bool,
}

impl SpdeTerms {
    /// Reaction and coloured noise, plus white noise when `dimension == 1`.
    pub fn full(dimension: usize) -> Self {
        Self {
            reaction: true,
            coloured_noise: true,
            white_noise: dimension == 1,
        }
    }

    /// The discrete heat equation.
    pub fn heat_only() -> Self {
        Self {
            reaction: false,
            coloured_noise: false,
            white_noise: false,
        }
    }

    /// Reaction and coloured noise, no white noise.
    pub fn without_white_noise() -> Self {
        Self {
            reaction: true,
            coloured_noise: true,
            white_noise: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpdeParams {
    domain: SpatialDomain,
    impact: f64,
    selection: f64,
    radius: f64,
    kernel: EnvironmentKernel,
    terms: SpdeTerms,
    dt: f64,
    gamma: f64,
    volume: f64,
    noise: Option<Arc<ColouredNoise>>,
}

impl SpdeParams {
    /// Validates the parameters, checks the Courant bound `dt ≤ h²/(2d ūΓ_R)`
    /// and factorises the noise covariance when coloured noise is enabled.
    pub fn new(
        kernel: EnvironmentKernel,
        impact: f64,
        selection: f64,
        radius: f64,
        dt: f64,
        terms: SpdeTerms,
    ) -> Result<Self> {
        ensure_finite("impact", impact)?;
        ensure_finite("selection", selection)?;
        ensure_finite("radius", radius)?;
        ensure_finite("time step", dt)?;
        let domain = *kernel.domain();
        let d = domain.dimension();
        let mut problems = Vec::new();
        if !(impact > 0.0 && impact <= 1.0) {
            problems.push(format!("impact {impact} must lie in (0, 1]"));
        }
        if selection < 0.0 {
            problems.push(format!("selection {selection} must be non-negative"));
        }
        if radius <= 0.0 {
            problems.push(format!("radius {radius} must be positive"));
        }
        if dt <= 0.0 {
            problems.push(format!("time step {dt} must be positive"));
        }
        if terms.white_noise && d != 1 {
            problems.push("space-time white noise is only defined in dimension 1".into());
        }
        if !problems.is_empty() {
            return Err(Error::config(problems.join("; ")));
        }
        let gamma = gamma_r(radius, d)?;
        let volume = v_r(radius, d)?;
        let h = domain.spacing();
        let courant = h * h / (2.0 * d as f64 * impact * gamma);
        if dt > courant {
            return Err(Error::config(format!(
                "time step {dt} exceeds the stability bound h²/(2d·ūΓ_R) = {courant:.6e}"
            )));
        }
        let noise = if terms.coloured_noise && selection > 0.0 {
            Some(Arc::new(ColouredNoise::new(&kernel)?))
        } else {
            None
        };
        Ok(Self {
            domain,
            impact,
            selection,
            radius,
            kernel,
            terms,
            dt,
            gamma,
            volume,
            noise,
        })
    }

    pub fn domain(&self) -> &SpatialDomain {
        &self.domain
    }

    pub fn impact(&self) -> f64 {
        self.impact
    }

    pub fn selection(&self) -> f64 {
        self.selection
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn kernel(&self) -> &EnvironmentKernel {
        &self.kernel
    }

    pub fn terms(&self) -> SpdeTerms {
        self.terms
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// The cached covariance factor, if coloured noise is active.
    pub fn noise(&self) -> Option<&ColouredNoise> {
        self.noise.as_deref()
    }

    fn diffusion(&self) -> f64 {
        0.5 * self.impact * self.gamma
    }

    fn reaction_coefficient(&self) -> f64 {
        let (u, s, v) = (self.impact, self.selection, self.volume);
        u * u * v * v * s * s
    }

    fn coloured_coefficient(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.impact * self.volume * self.selection
    }

    fn white_coefficient(&self) -> f64 {
        2.0 * self.radius * self.impact * (self.dt / self.domain.spacing()).sqrt()
    }

    fn coloured_increment<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> bool {
        match &self.noise {
            Some(noise) if self.terms.coloured_noise => {
                noise.increment(rng, self.dt, out);
                true
            }
            _ => false,
        }
    }
}

/// Advances `field` by one time step in place.
pub fn spde_step<R: Rng + ?Sized>(
    field: &mut FrequencyField,
    params: &SpdeParams,
    rng: &mut R,
    clamps: &mut ClampCounter,
) -> Result<()> {
    check_domain(field.domain(), params)?;
    let n = field.values().len();
    let mut lap = vec![0.0; n];
    laplacian(&params.domain, field.values(), &mut lap);
    let mut dw = vec![0.0; n];
    let coloured = params.coloured_increment(rng, &mut dw);
    let dt = params.dt;
    let diffusion = params.diffusion();
    let reaction = params.reaction_coefficient();
    let sigma = params.coloured_coefficient();
    let white = params.terms.white_noise;
    let white_coefficient = params.white_coefficient();
    for (c, w) in field.values_mut().iter_mut().enumerate() {
        let x = *w;
        let q = x * (1.0 - x);
        let mut next = x + diffusion * lap[c] * dt;
        if params.terms.reaction {
            next += reaction * q * (1.0 - 2.0 * x) * dt;
        }
        if coloured {
            next += sigma * q * dw[c];
        }
        if white {
            let z: f64 = rng.sample(StandardNormal);
            next += white_coefficient * q.max(0.0).sqrt() * z;
        }
        *w = clamps.clamp(next, 0.0, 1.0);
    }
    Ok(())
}

/// Pair `(w, v)` of a population and its marked sub-population.
#[derive(Debug, Clone, PartialEq)]
pub struct TracerSpdeState {
    w: FrequencyField,
    v: FrequencyField,
}

impl TracerSpdeState {
    pub fn new(w: FrequencyField, v: FrequencyField) -> Result<Self> {
        check_tracer(&w, &v)?;
        Ok(Self { w, v })
    }

    pub fn w(&self) -> &FrequencyField {
        &self.w
    }

    pub fn v(&self) -> &FrequencyField {
        &self.v
    }
}

fn check_tracer(w: &FrequencyField, v: &FrequencyField) -> Result<()> {
    if w.domain() != v.domain() {
        return Err(Error::State("tracer and population live on different grids".into()));
    }
    if let Some(c) = (0..w.values().len()).find(|&c| v.get(c) > w.get(c)) {
        return Err(Error::State(format!(
            "tracer exceeds population in cell {c}: v = {} > w = {}",
            v.get(c),
            w.get(c)
        )));
    }
    Ok(())
}

/// Advances the tracer system by one step.
///
/// Both fields see the same coloured increment. In `d = 1` with white noise
/// on, `w` is driven by `𝒲⁰, 𝒲¹` and `v` by `𝒲⁰, 𝒲²`, where the three white
/// noises are independent; the result is projected onto `0 ≤ v ≤ w ≤ 1`.
pub fn tracer_spde_step<R: Rng + ?Sized>(
    state: &mut TracerSpdeState,
    params: &SpdeParams,
    rng: &mut R,
    clamps: &mut ClampCounter,
) -> Result<()> {
    check_tracer(&state.w, &state.v)?;
    check_domain(state.w.domain(), params)?;
    let n = state.w.values().len();
    let mut lap_w = vec![0.0; n];
    let mut lap_v = vec![0.0; n];
    laplacian(&params.domain, state.w.values(), &mut lap_w);
    laplacian(&params.domain, state.v.values(), &mut lap_v);
    let mut dw = vec![0.0; n];
    let coloured = params.coloured_increment(rng, &mut dw);
    let dt = params.dt;
    let diffusion = params.diffusion();
    let reaction = params.reaction_coefficient();
    let sigma = params.coloured_coefficient();
    let white = params.terms.white_noise;
    let white_coefficient = params.white_coefficient();
    let (ws, vs) = (state.w.values_mut(), state.v.values_mut());
    for c in 0..n {
        let (w, v) = (ws[c], vs[c]);
        let mut next_w = w + diffusion * lap_w[c] * dt;
        let mut next_v = v + diffusion * lap_v[c] * dt;
        if params.terms.reaction {
            next_w += reaction * w * (1.0 - w) * (1.0 - 2.0 * w) * dt;
            next_v += reaction * v * (1.0 - w) * (1.0 - 2.0 * w) * dt;
        }
        if coloured {
            next_w += sigma * w * (1.0 - w) * dw[c];
            next_v += sigma * v * (1.0 - w) * dw[c];
        }
        if white {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let a0 = (v * (1.0 - w)).max(0.0).sqrt();
            let a1 = ((w - v) * (1.0 - w)).max(0.0).sqrt();
            let a2 = (v * (w - v)).max(0.0).sqrt();
            next_w += white_coefficient * (a0 * z0 + a1 * z1);
            next_v += white_coefficient * (a0 * z0 + a2 * z2);
        }
        let w_new = clamps.clamp(next_w, 0.0, 1.0);
        let v_new = clamps.clamp(next_v, 0.0, w_new);
        ws[c] = w_new;
        vs[c] = v_new;
    }
    Ok(())
}

fn check_domain(domain: &SpatialDomain, params: &SpdeParams) -> Result<()> {
    if *domain != params.domain {
        return Err(Error::State(
            "field grid differs from the integrator grid".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RngContract, Substream};

    fn block_params(selection: f64, terms: SpdeTerms) -> SpdeParams {
        let d = SpatialDomain::with_cells(1, 10.0, 64).unwrap();
        let k = EnvironmentKernel::block(d, 2, 0.5).unwrap();
        SpdeParams::new(k, 0.5, selection, 1.0, 1e-3, terms).unwrap()
    }

    #[test]
    fn fixation_state_is_fixed() {
        let p = block_params(1.0, SpdeTerms::full(1));
        let mut w = FrequencyField::constant(*p.domain(), 1.0).unwrap();
        let mut rng = RngContract::new(1).stream(Substream::Noise, 0);
        let mut c = ClampCounter::default();
        for _ in 0..10 {
            spde_step(&mut w, &p, &mut rng, &mut c).unwrap();
        }
        assert!(w.values().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn one_half_is_a_deterministic_fixed_point() {
        let terms = SpdeTerms {
            reaction: true,
            coloured_noise: false,
            white_noise: false,
        };
        let p = block_params(1.0, terms);
        let mut w = FrequencyField::constant(*p.domain(), 0.5).unwrap();
        let mut rng = RngContract::new(1).stream(Substream::Noise, 0);
        let mut c = ClampCounter::default();
        spde_step(&mut w, &p, &mut rng, &mut c).unwrap();
        assert!(w.values().iter().all(|&x| x == 0.5));
    }

    #[test]
    fn reaction_pushes_towards_one_half() {
        let terms = SpdeTerms {
            reaction: true,
            coloured_noise: false,
            white_noise: false,
        };
        let p = block_params(1.0, terms);
        let mut rng = RngContract::new(1).stream(Substream::Noise, 0);
        let mut c = ClampCounter::default();
        for (start, up) in [(0.2, true), (0.8, false)] {
            let mut w = FrequencyField::constant(*p.domain(), start).unwrap();
            spde_step(&mut w, &p, &mut rng, &mut c).unwrap();
            assert_eq!(w.get(0) > start, up);
        }
    }

    #[test]
    fn courant_violation_is_rejected() {
        let d = SpatialDomain::with_cells(1, 10.0, 64).unwrap();
        let k = EnvironmentKernel::block(d, 1, 1.0).unwrap();
        let err = SpdeParams::new(k, 0.5, 0.0, 1.0, 0.1, SpdeTerms::heat_only()).unwrap_err();
        assert!(err.to_string().contains("stability"));
    }

    #[test]
    fn white_noise_needs_one_dimension() {
        let d = SpatialDomain::with_cells(2, 10.0, 16).unwrap();
        let k = EnvironmentKernel::block(d, 1, 1.0).unwrap();
        assert!(SpdeParams::new(k, 0.5, 0.0, 1.0, 1e-4, SpdeTerms::full(1)).is_err());
    }

    #[test]
    fn tracer_equal_to_population_stays_equal() {
        let p = block_params(1.0, SpdeTerms::without_white_noise());
        let w = FrequencyField::from_fn(*p.domain(), |x| 0.3 + 0.4 * (x[0] / 10.0)).unwrap();
        let mut s = TracerSpdeState::new(w.clone(), w).unwrap();
        let mut rng = RngContract::new(2).stream(Substream::Noise, 0);
        let mut c = ClampCounter::default();
        for _ in 0..100 {
            tracer_spde_step(&mut s, &p, &mut rng, &mut c).unwrap();
        }
        assert_eq!(s.w(), s.v());
    }

    #[test]
    fn empty_tracer_stays_empty() {
        let p = block_params(1.0, SpdeTerms::full(1));
        let w = FrequencyField::constant(*p.domain(), 0.4).unwrap();
        let v = FrequencyField::constant(*p.domain(), 0.0).unwrap();
        let mut s = TracerSpdeState::new(w, v).unwrap();
        let mut rng = RngContract::new(3).stream(Substream::Noise, 0);
        let mut c = ClampCounter::default();
        for _ in 0..100 {
            tracer_spde_step(&mut s, &p, &mut rng, &mut c).unwrap();
        }
        assert!(s.v().values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn tracer_above_population_is_rejected() {
        let d = SpatialDomain::with_cells(1, 10.0, 4).unwrap();
        let w = FrequencyField::constant(d, 0.4).unwrap();
        let v = FrequencyField::constant(d, 0.5).unwrap();
        assert!(TracerSpdeState::new(w, v).is_err());
    }
}
