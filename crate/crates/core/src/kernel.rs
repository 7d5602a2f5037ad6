//! Correlation kernels `g(x, y)` of the ±1 environment.
//!
//! The stored kernel is always the correlation of the ±1 field itself. For
//! the sign-of-Gaussian construction this is the arcsine transform of the
//! underlying Gaussian correlation, `g = (2/π) asin(ρ_G)`.

use std::f64::consts::PI;

use crate::domain::{Point, SpatialDomain};
use crate::error::{ensure_finite, Error, Result};

/// Correlation function of the latent Gaussian field of a sign kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnderlyingCorrelation {
    /// `exp(-r² / (2ℓ²))`, summed over periodic images on the torus;
    /// `1 - ρ = O(r²)` so the sign kernel is Lipschitz.
    SquaredExponential,
    /// `exp(-r / ℓ)`; only Hölder-1/2 after the sign map, always rejected.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// Field constant on each of `blocks` equal slabs along the first axis,
    /// with correlation `correlation` between distinct slabs.
    Block { blocks: usize, correlation: f64 },
    /// Sign of a stationary Gaussian field.
    GaussianSign {
        length_scale: f64,
        underlying: UnderlyingCorrelation,
    },
    /// Independent values in every cell.
    WhiteLattice,
}

/// A validated kernel bound to a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentKernel {
    kind: KernelKind,
    domain: SpatialDomain,
    lipschitz: Option<f64>,
}

impl EnvironmentKernel {
    pub fn block(domain: SpatialDomain, blocks: usize, correlation: f64) -> Result<Self> {
        ensure_finite("block correlation", correlation)?;
        if blocks == 0 || blocks > domain.cells_per_side() {
            return Err(Error::Kernel(format!(
                "block count {blocks} must lie in 1..={}",
                domain.cells_per_side()
            )));
        }
        if !(-1.0..=1.0).contains(&correlation) {
            return Err(Error::Kernel(format!(
                "cross-block correlation {correlation} outside [-1, 1]"
            )));
        }
        if blocks > 2 && correlation < 0.0 {
            return Err(Error::Kernel(format!(
                "{blocks} mutually negatively correlated ±1 blocks cannot be realised; use two blocks or a non-negative correlation"
            )));
        }
        // Across a block boundary the nearest pair of cells is one spacing apart.
        let lipschitz = if blocks == 1 {
            0.0
        } else {
            (1.0 - correlation) / domain.spacing()
        };
        Ok(Self {
            kind: KernelKind::Block {
                blocks,
                correlation,
            },
            domain,
            lipschitz: Some(lipschitz),
        })
    }

    pub fn gaussian_sign(
        domain: SpatialDomain,
        length_scale: f64,
        underlying: UnderlyingCorrelation,
    ) -> Result<Self> {
        ensure_finite("length scale", length_scale)?;
        if length_scale <= 0.0 {
            return Err(Error::Kernel("length scale must be positive".into()));
        }
        if underlying == UnderlyingCorrelation::Exponential {
            return Err(Error::Kernel(
                "sign of a Gaussian field with exponential correlation has 1 - g(r) ~ (2/π)·sqrt(2r/ℓ), \
                 which is only Hölder-1/2 and violates the Lipschitz bound |g(x,x) - g(x,y)| <= C|x - y|; \
                 use a squared-exponential underlying correlation"
                    .into(),
            ));
        }
        let mut kernel = Self {
            kind: KernelKind::GaussianSign {
                length_scale,
                underlying,
            },
            domain,
            lipschitz: None,
        };
        kernel.lipschitz = Some(sign_kernel_lipschitz(&domain, length_scale));
        Ok(kernel)
    }

    pub fn white_lattice(domain: SpatialDomain) -> Self {
        Self {
            kind: KernelKind::WhiteLattice,
            domain,
            lipschitz: None,
        }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn domain(&self) -> &SpatialDomain {
        &self.domain
    }

    /// Lipschitz constant `C` of `|g(x,x) - g(x,y)| <= C|x-y|`; `None` for the white kernel.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        self.lipschitz
    }

    /// Block index of a cell (block kernels only).
    pub fn block_of_cell(&self, cell: usize) -> Option<usize> {
        match self.kind {
            KernelKind::Block { blocks, .. } => {
                let axis0 = self.domain.cell_coords(cell)[0];
                Some(axis0 * blocks / self.domain.cells_per_side())
            }
            _ => None,
        }
    }

    /// Correlation of the latent Gaussian field between two cells (sign kernels only).
    pub fn underlying_cells(&self, i: usize, j: usize) -> Option<f64> {
        match self.kind {
            KernelKind::GaussianSign { length_scale, .. } => {
                let (a, b) = (self.domain.cell_coords(i), self.domain.cell_coords(j));
                let k = self.domain.cells_per_side();
                let h = self.domain.spacing();
                let mut rho = 1.0;
                for axis in 0..self.domain.dimension() {
                    let delta = a[axis].abs_diff(b[axis]);
                    let delta = delta.min(k - delta) as f64 * h;
                    rho *= wrapped_gaussian(delta, length_scale, self.domain.side());
                }
                Some(rho)
            }
            _ => None,
        }
    }

    /// `g` between two grid cells.
    pub fn eval_cells(&self, i: usize, j: usize) -> f64 {
        match self.kind {
            KernelKind::Block { correlation, .. } => {
                if self.block_of_cell(i) == self.block_of_cell(j) {
                    1.0
                } else {
                    correlation
                }
            }
            KernelKind::GaussianSign { .. } => {
                if i == j {
                    1.0
                } else {
                    arcsine_law(self.underlying_cells(i, j).unwrap_or(1.0))
                }
            }
            KernelKind::WhiteLattice => {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `g(x, y)` for two positions inside the domain.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let px = self.domain.checked_point(x)?;
        let py = self.domain.checked_point(y)?;
        Ok(self.eval_points(px, py))
    }

    fn eval_points(&self, x: Point, y: Point) -> f64 {
        match self.kind {
            KernelKind::GaussianSign { length_scale, .. } => {
                let d = self.domain.displacement(x, y);
                let rho: f64 = d[..self.domain.dimension()]
                    .iter()
                    .map(|delta| wrapped_gaussian(delta.abs(), length_scale, self.domain.side()))
                    .product();
                arcsine_law(rho)
            }
            _ => self.eval_cells(
                self.domain.cell_containing(x),
                self.domain.cell_containing(y),
            ),
        }
    }

    /// Exhaustive check of the Lipschitz bound over all pairs of cell centres.
    ///
    /// Returns the worst ratio `|g(x,x) - g(x,y)| / |x - y|` found.
    pub fn verify_lipschitz(&self) -> Result<f64> {
        let c = self.lipschitz.ok_or_else(|| {
            Error::Kernel("the white lattice kernel has no Lipschitz constant".into())
        })?;
        let n = self.domain.cell_count();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let xi = self.domain.cell_centre(i);
            let gii = self.eval_cells(i, i);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let r = self.domain.distance(xi, self.domain.cell_centre(j));
                let ratio = (gii - self.eval_cells(i, j)).abs() / r;
                worst = worst.max(ratio);
                if ratio > c * (1.0 + 1e-12) {
                    return Err(Error::Kernel(format!(
                        "Lipschitz bound violated between cells {i} and {j}: ratio {ratio} > C = {c}"
                    )));
                }
            }
        }
        Ok(worst)
    }
}

/// `g(x, y)`; free-function form of [`EnvironmentKernel::eval`].
pub fn kernel_eval(kernel: &EnvironmentKernel, x: &[f64], y: &[f64]) -> Result<f64> {
    kernel.eval(x, y)
}

/// Correlation of `sign(G₁)·sign(G₂)` when `corr(G₁, G₂) = rho`.
pub fn arcsine_law(rho: f64) -> f64 {
    2.0 / PI * rho.clamp(-1.0, 1.0).asin()
}

/// Inverse of [`arcsine_law`]: the Gaussian correlation giving sign correlation `g`.
pub fn inverse_arcsine_law(g: f64) -> f64 {
    (0.5 * PI * g.clamp(-1.0, 1.0)).sin()
}

/// Number of periodic images summed on each side; beyond `8ℓ` a Gaussian is below 1e-14.
fn image_count(length_scale: f64, side: f64) -> i64 {
    (8.0 * length_scale / side).ceil() as i64 + 1
}

/// The squared-exponential correlation wrapped onto a circle of length `side`,
/// `Σ_k G(δ + k L) / Σ_k G(k L)`. Unlike the minimal-image Gaussian it is
/// positive definite on the torus.
fn wrapped_gaussian(delta: f64, length_scale: f64, side: f64) -> f64 {
    let m = image_count(length_scale, side);
    let g = |x: f64| (-(x * x) / (2.0 * length_scale * length_scale)).exp();
    let num: f64 = (-m..=m).map(|k| g(delta + k as f64 * side)).sum();
    let den: f64 = (-m..=m).map(|k| g(k as f64 * side)).sum();
    (num / den).min(1.0)
}

/// `C` for a sign kernel: the larger of the small-distance slope
/// `(2/π)√κ`, with `κ = -ρ''(0)` of the wrapped Gaussian, and the worst
/// ratio over all grid displacements.
fn sign_kernel_lipschitz(domain: &SpatialDomain, length_scale: f64) -> f64 {
    let (l, side) = (length_scale, domain.side());
    let m = image_count(l, side);
    let g = |x: f64| (-(x * x) / (2.0 * l * l)).exp();
    let den: f64 = (-m..=m).map(|k| g(k as f64 * side)).sum();
    let curvature: f64 = (-m..=m)
        .map(|k| {
            let x = k as f64 * side;
            g(x) * (1.0 / (l * l) - x * x / (l * l * l * l))
        })
        .sum::<f64>()
        / den;
    let mut c = 2.0 / PI * curvature.max(0.0).sqrt();
    let half = domain.cells_per_side() / 2;
    let h = domain.spacing();
    let second = if domain.dimension() == 2 { half } else { 0 };
    for i in 0..=half {
        for j in 0..=second {
            if i == 0 && j == 0 {
                continue;
            }
            let (dx, dy) = (i as f64 * h, j as f64 * h);
            let mut rho = wrapped_gaussian(dx, l, side);
            if domain.dimension() == 2 {
                rho *= wrapped_gaussian(dy, l, side);
            }
            let ratio = (1.0 - arcsine_law(rho)) / (dx * dx + dy * dy).sqrt();
            c = c.max(ratio);
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(cells: usize) -> SpatialDomain {
        SpatialDomain::with_cells(1, 1.0, cells).unwrap()
    }

    #[test]
    fn block_same_and_opposite() {
        let k = EnvironmentKernel::block(line(10), 2, -1.0).unwrap();
        assert_eq!(k.eval(&[0.05], &[0.35]).unwrap(), 1.0);
        assert_eq!(k.eval(&[0.05], &[0.75]).unwrap(), -1.0);
    }

    #[test]
    fn arcsine_half_is_one_third() {
        assert!((arcsine_law(0.5) - 1.0 / 3.0).abs() < 1e-15);
        assert!((inverse_arcsine_law(arcsine_law(0.3)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn exponential_underlying_is_rejected() {
        let err =
            EnvironmentKernel::gaussian_sign(line(16), 0.2, UnderlyingCorrelation::Exponential)
                .unwrap_err();
        assert!(err.to_string().contains("Hölder"));
    }

    #[test]
    fn outside_position_is_domain_error() {
        let k = EnvironmentKernel::block(line(4), 2, 0.0).unwrap();
        assert!(matches!(k.eval(&[1.2], &[0.1]), Err(Error::Domain { .. })));
    }

    #[test]
    fn negative_multi_block_rejected() {
        assert!(EnvironmentKernel::block(line(9), 3, -0.5).is_err());
        assert!(EnvironmentKernel::block(line(9), 3, 0.5).is_ok());
    }

    #[test]
    fn symmetric_and_unit_diagonal() {
        let d = SpatialDomain::with_cells(2, 1.0, 6).unwrap();
        let k =
            EnvironmentKernel::gaussian_sign(d, 0.2, UnderlyingCorrelation::SquaredExponential)
                .unwrap();
        for i in 0..d.cell_count() {
            assert_eq!(k.eval_cells(i, i), 1.0);
            for j in 0..d.cell_count() {
                assert_eq!(k.eval_cells(i, j), k.eval_cells(j, i));
                assert!(k.eval_cells(i, j).abs() <= 1.0);
            }
        }
    }
}
