//! Sampling of ±1 environment fields with a prescribed correlation kernel.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::factor::{pivoted_cholesky, LowRankFactor};
use crate::kernel::{EnvironmentKernel, KernelKind};
use crate::error::Result;

/// Relative truncation tolerance of the latent Gaussian factorisation.
const LATENT_FACTOR_TOLERANCE: f64 = 1e-10;

/// One draw of the environment: exactly ±1 in every cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvironmentField {
    pub values: Vec<i8>,
    /// Master seed of the stream that produced the draw.
    pub seed: u64,
    /// Number of resamplings so far (0 for the initial field).
    pub epoch: u64,
}

impl EnvironmentField {
    /// A field with every cell set to `value`.
    pub fn constant(cells: usize, value: i8) -> Self {
        Self {
            values: vec![value; cells],
            seed: 0,
            epoch: 0,
        }
    }

    pub fn get(&self, cell: usize) -> i8 {
        self.values[cell]
    }
}

/// Reusable sampler; holds the latent Gaussian factor for sign kernels.
#[derive(Debug, Clone)]
pub struct EnvironmentSampler {
    kernel: EnvironmentKernel,
    latent: Option<LowRankFactor>,
}

impl EnvironmentSampler {
    pub fn new(kernel: EnvironmentKernel) -> Result<Self> {
        let latent = match kernel.kind() {
            KernelKind::GaussianSign { .. } => {
                let n = kernel.domain().cell_count();
                Some(pivoted_cholesky(
                    n,
                    |i, j| {
                        if i == j {
                            1.0
                        } else {
                            kernel.underlying_cells(i, j).unwrap_or(0.0)
                        }
                    },
                    LATENT_FACTOR_TOLERANCE,
                )?)
            }
            _ => None,
        };
        Ok(Self { kernel, latent })
    }

    pub fn kernel(&self) -> &EnvironmentKernel {
        &self.kernel
    }

    /// Draws a fresh, independent field.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, seed: u64, epoch: u64) -> EnvironmentField {
        let cells = self.kernel.domain().cell_count();
        let values = match self.kernel.kind() {
            KernelKind::Block {
                blocks,
                correlation,
            } => {
                let per_block = sample_block_signs(rng, blocks, correlation);
                (0..cells)
                    .map(|c| per_block[self.kernel.block_of_cell(c).unwrap_or(0)])
                    .collect()
            }
            KernelKind::GaussianSign { .. } => {
                let factor = self.latent.as_ref().expect("latent factor built for sign kernels");
                let z: Vec<f64> = (0..factor.rank())
                    .map(|_| rng.sample(StandardNormal))
                    .collect();
                let mut g = vec![0.0; cells];
                factor.apply(&z, &mut g);
                g.into_iter().map(|x| if x >= 0.0 { 1 } else { -1 }).collect()
            }
            KernelKind::WhiteLattice => (0..cells).map(|_| uniform_sign(rng)).collect(),
        };
        EnvironmentField {
            values,
            seed,
            epoch,
        }
    }
}

/// Builds a sampler and draws one field; see [`EnvironmentSampler`].
pub fn sample_environment<R: Rng + ?Sized>(
    kernel: &EnvironmentKernel,
    rng: &mut R,
) -> Result<EnvironmentField> {
    Ok(EnvironmentSampler::new(kernel.clone())?.sample(rng, 0, 0))
}

pub fn uniform_sign<R: Rng + ?Sized>(rng: &mut R) -> i8 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

/// Per-block signs with pairwise correlation `correlation`.
///
/// Non-negative correlation: with probability ρ all blocks share one sign,
/// otherwise they are independent. Two blocks with ρ < 0: with probability |ρ|
/// the second is the negation of the first.
fn sample_block_signs<R: Rng + ?Sized>(rng: &mut R, blocks: usize, correlation: f64) -> Vec<i8> {
    let first = uniform_sign(rng);
    let mut out = Vec::with_capacity(blocks);
    out.push(first);
    if blocks == 1 {
        return out;
    }
    let coupled = rng.random::<f64>() < correlation.abs();
    for _ in 1..blocks {
        let value = if coupled {
            if correlation < 0.0 {
                -first
            } else {
                first
            }
        } else {
            uniform_sign(rng)
        };
        out.push(value);
    }
    out
}
