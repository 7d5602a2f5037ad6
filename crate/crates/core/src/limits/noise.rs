//! Gaussian noise that is white in time and coloured in space.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::factor::{pivoted_cholesky, LowRankFactor};
use crate::kernel::{EnvironmentKernel, KernelKind};

/// Relative tolerance of the covariance factorisation.
const COVARIANCE_TOLERANCE: f64 = 1e-10;

/// Cached factorisation of the grid covariance `g(x_i, x_j)`.
#[derive(Debug, Clone)]
pub struct ColouredNoise {
    cells: usize,
    /// `None` for the white kernel, where the covariance is the identity.
    factor: Option<LowRankFactor>,
}

impl ColouredNoise {
    /// Factorises the covariance of `kernel` on its grid.
    ///
    /// Fails with the most negative eigenvalue when the matrix is not PSD.
    pub fn new(kernel: &EnvironmentKernel) -> Result<Self> {
        let cells = kernel.domain().cell_count();
        let factor = match kernel.kind() {
            KernelKind::WhiteLattice => None,
            _ => Some(pivoted_cholesky(
                cells,
                |i, j| kernel.eval_cells(i, j),
                COVARIANCE_TOLERANCE,
            )?),
        };
        Ok(Self { cells, factor })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Number of independent normals consumed per increment.
    pub fn rank(&self) -> usize {
        self.factor.as_ref().map_or(self.cells, LowRankFactor::rank)
    }

    /// Fills `out` with one increment of covariance `g · dt`.
    pub fn increment<R: Rng + ?Sized>(&self, rng: &mut R, dt: f64, out: &mut [f64]) {
        let scale = dt.sqrt();
        match &self.factor {
            None => {
                for o in out.iter_mut() {
                    *o = scale * rng.sample::<f64, _>(StandardNormal);
                }
            }
            Some(factor) => {
                let z: Vec<f64> = (0..factor.rank())
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                factor.apply(&z, out);
            }
        }
    }
}

/// One increment of covariance `g · dt`, as a fresh vector.
pub fn coloured_noise_increment<R: Rng + ?Sized>(
    noise: &ColouredNoise,
    rng: &mut R,
    dt: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; noise.cells()];
    noise.increment(rng, dt, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SpatialDomain;
    use crate::rng::{RngContract, Substream};

    #[test]
    fn fully_correlated_block_gives_identical_increments() {
        let d = SpatialDomain::with_cells(1, 1.0, 16).unwrap();
        let noise = ColouredNoise::new(&EnvironmentKernel::block(d, 2, 1.0).unwrap()).unwrap();
        assert_eq!(noise.rank(), 1);
        let mut rng = RngContract::new(5).stream(Substream::Noise, 0);
        let inc = coloured_noise_increment(&noise, &mut rng, 0.01);
        assert!(inc.iter().all(|&x| x == inc[0]));
    }

    #[test]
    fn anticorrelated_blocks_are_exact_negatives() {
        let d = SpatialDomain::with_cells(1, 1.0, 16).unwrap();
        let noise = ColouredNoise::new(&EnvironmentKernel::block(d, 2, -1.0).unwrap()).unwrap();
        let mut rng = RngContract::new(6).stream(Substream::Noise, 0);
        let inc = coloured_noise_increment(&noise, &mut rng, 0.01);
        for c in 0..8 {
            assert_eq!(inc[c], inc[0]);
            assert_eq!(inc[c + 8], -inc[0]);
        }
    }
}
