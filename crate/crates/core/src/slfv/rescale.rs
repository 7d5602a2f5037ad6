//! Local averages and the rescaled family of spatial processes.

use crate::domain::Point;
use crate::error::{ensure_finite, Error, Result};
use crate::field::FrequencyField;
use crate::kernel::EnvironmentKernel;
use crate::parallel::map_replicates;
use crate::rng::RngContract;
use crate::stats::Summary;

use super::{SlfvParams, SlfvSimulator, SlfvState};

/// Mean of `field` over the cells whose centre lies in `B(x, radius)`, for every cell `x`.
pub fn local_average(field: &FrequencyField, radius: f64) -> Result<FrequencyField> {
    let domain = *field.domain();
    if !(radius >= domain.spacing()) {
        return Err(Error::config(format!(
            "averaging radius {radius} is below the grid spacing {}",
            domain.spacing()
        )));
    }
    let stencil = domain.ball_stencil(radius);
    let k = stencil.len() as f64;
    let values = (0..domain.cell_count())
        .map(|c| {
            let [i, j] = domain.cell_coords(c);
            let sum: f64 = stencil
                .iter()
                .map(|o| field.get(domain.wrapped_index([i as i64 + o[0], j as i64 + o[1]])))
                .sum();
            (sum / k).clamp(0.0, 1.0)
        })
        .collect();
    FrequencyField::new(domain, values)
}

/// The scaling `u_n = ū n^{-1/3}`, `s_n = s n^{α - 2/3}`, `R_n = R n^{-1/3}`
/// with environment rate `n^{2α}` and event intensity `n^{1 + d/3}` per unit
/// scaled volume and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleSpec {
    level: f64,
    alpha: f64,
    impact: f64,
    selection: f64,
    radius: f64,
}

impl RescaleSpec {
    pub fn new(level: f64, alpha: f64, impact: f64, selection: f64, radius: f64) -> Result<Self> {
        for (name, v) in [
            ("level", level),
            ("alpha", alpha),
            ("impact", impact),
            ("selection", selection),
            ("radius", radius),
        ] {
            ensure_finite(name, v)?;
        }
        let mut problems = Vec::new();
        if level < 1.0 {
            problems.push(format!("level {level} must be at least 1"));
        }
        if !(alpha > 0.0 && alpha < 1.0 / 6.0) {
            problems.push(format!("alpha {alpha} must lie in (0, 1/6)"));
        }
        if !(impact > 0.0) {
            problems.push(format!("base impact {impact} must be positive"));
        }
        if selection < 0.0 {
            problems.push(format!("base selection {selection} must be non-negative"));
        }
        if !(radius > 0.0) {
            problems.push(format!("base radius {radius} must be positive"));
        }
        if !problems.is_empty() {
            return Err(Error::config(problems.join("; ")));
        }
        let spec = Self {
            level,
            alpha,
            impact,
            selection,
            radius,
        };
        if !(spec.impact() < 1.0) {
            problems.push(format!("u_n = {} must be below 1", spec.impact()));
        }
        if !(spec.selection() <= 1.0) {
            problems.push(format!("s_n = {} must not exceed 1", spec.selection()));
        }
        if !problems.is_empty() {
            return Err(Error::config(problems.join("; ")));
        }
        Ok(spec)
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn impact(&self) -> f64 {
        self.impact * self.level.powf(-1.0 / 3.0)
    }

    pub fn selection(&self) -> f64 {
        self.selection * self.level.powf(self.alpha - 2.0 / 3.0)
    }

    pub fn radius(&self) -> f64 {
        self.radius * self.level.powf(-1.0 / 3.0)
    }

    pub fn env_rate(&self) -> f64 {
        self.level.powf(2.0 * self.alpha)
    }

    pub fn intensity(&self, dimension: usize) -> f64 {
        self.level.powf(1.0 + dimension as f64 / 3.0)
    }

    /// Simulation parameters at this level on the grid of `kernel`.
    ///
    /// Fails when the grid does not resolve `R_n` (`h > R_n / 2`).
    pub fn params(&self, kernel: EnvironmentKernel) -> Result<SlfvParams> {
        let d = kernel.domain().dimension();
        SlfvParams::new(
            kernel,
            self.radius(),
            self.impact(),
            self.selection(),
            self.env_rate(),
            self.intensity(d),
        )
    }
}

/// `⟨w̄_n(t), f⟩` per replicate, record time and test function.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledRun {
    pub times: Vec<f64>,
    /// `values[replicate][time][function]`.
    pub values: Vec<Vec<Vec<f64>>>,
}

impl RescaledRun {
    pub fn summary(&self, time: usize, function: usize) -> Summary {
        let sample: Vec<f64> = self.values.iter().map(|r| r[time][function]).collect();
        Summary::of(&sample)
    }
}

/// Simulates the process at level `spec` from `initial` over independent
/// replicates and records `⟨w̄_n(t), f⟩` at each of `times` (non-decreasing).
pub fn run_rescaled_slfv(
    spec: &RescaleSpec,
    kernel: EnvironmentKernel,
    initial: &FrequencyField,
    times: &[f64],
    test_functions: &[&(dyn Fn(Point) -> f64 + Sync)],
    replicates: usize,
    contract: &RngContract,
) -> Result<RescaledRun> {
    if initial.domain() != kernel.domain() {
        return Err(Error::config("initial field is not on the kernel grid"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::config("record times must be finite, non-negative and sorted"));
    }
    let params = spec.params(kernel)?;
    let radius = params.radius();
    let runs = map_replicates(replicates, |r| -> Result<Vec<Vec<f64>>> {
        let mut streams = contract.replicate(r);
        let state = SlfvState::initial(
            &params,
            initial.clone(),
            None,
            &mut streams.environment,
            contract.master_seed(),
        )?;
        let mut sim = SlfvSimulator::new(&params, state, streams)?;
        let mut rows = Vec::with_capacity(times.len());
        for &t in times {
            sim.advance_to(t);
            let avg = local_average(sim.state().w(), radius)?;
            rows.push(test_functions.iter().map(|f| avg.pairing(f)).collect());
        }
        Ok(rows)
    });
    Ok(RescaledRun {
        times: times.to_vec(),
        values: runs.into_iter().collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SpatialDomain;

    #[test]
    fn averaging_identities() {
        let d = SpatialDomain::with_cells(2, 1.0, 16).unwrap();
        let c = FrequencyField::constant(d, 0.3).unwrap();
        let avg = local_average(&c, 0.13).unwrap();
        assert!(avg.values().iter().all(|&x| (x - 0.3).abs() < 1e-15));

        let mut values = vec![0.0; 256];
        values[17] = 1.0;
        let spike = FrequencyField::new(d, values).unwrap();
        let k = d.ball_stencil(0.13).len();
        let avg = local_average(&spike, 0.13).unwrap();
        assert!((avg.get(17) - 1.0 / k as f64).abs() < 1e-15);

        let noisy = FrequencyField::from_fn(d, |x| (0.5 + 0.4 * (7.0 * x[0]).sin() * (3.0 * x[1]).cos()).abs()).unwrap();
        let avg = local_average(&noisy, 0.2).unwrap();
        assert!((avg.mean() - noisy.mean()).abs() < 1e-12);
    }

    #[test]
    fn radius_below_spacing_is_rejected() {
        let d = SpatialDomain::with_cells(1, 1.0, 10).unwrap();
        let c = FrequencyField::constant(d, 0.3).unwrap();
        assert!(local_average(&c, 0.05).is_err());
    }

    #[test]
    fn level_one_is_the_base_process() {
        let s = RescaleSpec::new(1.0, 0.1, 0.5, 0.3, 0.2).unwrap();
        assert_eq!(s.impact(), 0.5);
        assert_eq!(s.selection(), 0.3);
        assert_eq!(s.radius(), 0.2);
        assert_eq!(s.env_rate(), 1.0);
        assert_eq!(s.intensity(2), 1.0);
    }

    #[test]
    fn alpha_range() {
        assert!(RescaleSpec::new(10.0, 0.2, 0.5, 0.3, 0.2).is_err());
        assert!(RescaleSpec::new(10.0, 0.0, 0.5, 0.3, 0.2).is_err());
    }
}
