//! Frequency fields on a periodic grid.

use crate::domain::{Point, SpatialDomain};
use crate::error::{Error, Result};

/// Allele-`a` frequencies, one value per cell, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyField {
    domain: SpatialDomain,
    values: Vec<f64>,
}

impl FrequencyField {
    pub fn new(domain: SpatialDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.cell_count() {
            return Err(Error::State(format!(
                "field has {} values but the grid has {} cells",
                values.len(),
                domain.cell_count()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::State(format!(
                "frequency {v} in cell {i} lies outside [0, 1]"
            )));
        }
        Ok(Self { domain, values })
    }

    pub fn constant(domain: SpatialDomain, value: f64) -> Result<Self> {
        let n = domain.cell_count();
        Self::new(domain, vec![value; n])
    }

    /// Samples `f` at cell centres.
    pub fn from_fn<F: Fn(Point) -> f64>(domain: SpatialDomain, f: F) -> Result<Self> {
        let values = (0..domain.cell_count())
            .map(|c| f(domain.cell_centre(c)))
            .collect();
        Self::new(domain, values)
    }

    pub fn domain(&self) -> &SpatialDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access for integrators; callers keep values in [0, 1].
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    /// Spatial mean over the torus.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `∫ w dx`, as a Riemann sum.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.domain.cell_volume()
    }

    /// `⟨w, f⟩ = ∫ w f dx`, with `f` evaluated at cell centres.
    pub fn pairing<F: Fn(Point) -> f64>(&self, f: F) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(c, w)| w * f(self.domain.cell_centre(c)))
            .sum::<f64>()
            * self.domain.cell_volume()
    }
}

/// Five-point (or three-point) periodic Laplacian of `values` into `out`.
pub(crate) fn laplacian(domain: &SpatialDomain, values: &[f64], out: &mut [f64]) {
    let k = domain.cells_per_side();
    let inv_h2 = 1.0 / (domain.spacing() * domain.spacing());
    match domain.dimension() {
        1 => {
            for i in 0..k {
                let left = values[(i + k - 1) % k];
                let right = values[(i + 1) % k];
                out[i] = (left + right - 2.0 * values[i]) * inv_h2;
            }
        }
        _ => {
            for i in 0..k {
                let up = ((i + k - 1) % k) * k;
                let down = ((i + 1) % k) * k;
                let row = i * k;
                for j in 0..k {
                    let left = row + (j + k - 1) % k;
                    let right = row + (j + 1) % k;
                    out[row + j] = (values[up + j] + values[down + j] + values[left]
                        + values[right]
                        - 4.0 * values[row + j])
                        * inv_h2;
                }
            }
        }
    }
}
