//! Periodic spatial grids.

use crate::error::{ensure_finite, Error, Result};

/// A point in the domain. For `d = 1` only the first coordinate is used.
pub type Point = [f64; 2];

/// A `d`-dimensional torus of side `side`, discretised into square cells of
/// width `spacing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialDomain {
    dimension: usize,
    side: f64,
    spacing: f64,
    cells_per_side: usize,
}

impl SpatialDomain {
    pub fn new(dimension: usize, side: f64, spacing: f64) -> Result<Self> {
        ensure_finite("side length", side)?;
        ensure_finite("grid spacing", spacing)?;
        if !(1..=2).contains(&dimension) {
            return Err(Error::config(format!(
                "dimension must be 1 or 2, got {dimension}"
            )));
        }
        if side <= 0.0 || spacing <= 0.0 {
            return Err(Error::config("side length and grid spacing must be positive"));
        }
        let ratio = side / spacing;
        let cells = ratio.round();
        if cells < 1.0 || (ratio - cells).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::config(format!(
                "side/spacing must be a positive integer, got {ratio}"
            )));
        }
        Ok(Self {
            dimension,
            side,
            spacing,
            cells_per_side: cells as usize,
        })
    }

    /// Domain with `cells` cells per side on a torus of side `side`.
    pub fn with_cells(dimension: usize, side: f64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::config("a grid needs at least one cell per side"));
        }
        let mut domain = Self::new(dimension, side, side / cells as f64)?;
        domain.cells_per_side = cells;
        Ok(domain)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_side.pow(self.dimension as u32)
    }

    /// Volume `h^d` of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dimension as i32)
    }

    /// Total volume `L^d`.
    pub fn volume(&self) -> f64 {
        self.side.powi(self.dimension as i32)
    }

    /// Splits a flat cell index into per-axis indices (row-major, axis 0 slowest).
    pub fn cell_coords(&self, index: usize) -> [usize; 2] {
        match self.dimension {
            1 => [index, 0],
            _ => [index / self.cells_per_side, index % self.cells_per_side],
        }
    }

    pub fn cell_index(&self, coords: [usize; 2]) -> usize {
        match self.dimension {
            1 => coords[0],
            _ => coords[0] * self.cells_per_side + coords[1],
        }
    }

    /// Index of the cell reached from `coords` after a signed offset, wrapping.
    pub fn wrapped_index(&self, coords: [i64; 2]) -> usize {
        let k = self.cells_per_side as i64;
        let wrap = |c: i64| c.rem_euclid(k) as usize;
        match self.dimension {
            1 => wrap(coords[0]),
            _ => wrap(coords[0]) * self.cells_per_side + wrap(coords[1]),
        }
    }

    pub fn cell_centre(&self, index: usize) -> Point {
        let c = self.cell_coords(index);
        let mut p = [0.0; 2];
        for (axis, slot) in p.iter_mut().enumerate().take(self.dimension) {
            *slot = (c[axis] as f64 + 0.5) * self.spacing;
        }
        p
    }

    /// Reduces a point onto the fundamental domain `[0, L)^d`.
    pub fn wrap_point(&self, p: Point) -> Point {
        let mut q = [0.0; 2];
        for axis in 0..self.dimension {
            let mut x = p[axis].rem_euclid(self.side);
            if x >= self.side {
                x = 0.0;
            }
            q[axis] = x;
        }
        q
    }

    /// Cell containing the (wrapped) point.
    pub fn cell_containing(&self, p: Point) -> usize {
        let q = self.wrap_point(p);
        let mut coords = [0usize; 2];
        for axis in 0..self.dimension {
            let c = (q[axis] / self.spacing).floor() as usize;
            coords[axis] = c.min(self.cells_per_side - 1);
        }
        self.cell_index(coords)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dimension && p.iter().all(|&x| x.is_finite() && (0.0..self.side).contains(&x))
    }

    /// Validates a caller-supplied position and widens it to a [`Point`].
    pub fn checked_point(&self, p: &[f64]) -> Result<Point> {
        if !self.contains(p) {
            return Err(Error::Domain {
                position: p.to_vec(),
                side: self.side,
                dimension: self.dimension,
            });
        }
        let mut q = [0.0; 2];
        q[..self.dimension].copy_from_slice(p);
        Ok(q)
    }

    /// Minimal-image displacement `y - x` on the torus.
    pub fn displacement(&self, x: Point, y: Point) -> Point {
        let mut d = [0.0; 2];
        for axis in 0..self.dimension {
            let mut delta = (y[axis] - x[axis]).rem_euclid(self.side);
            if delta > 0.5 * self.side {
                delta -= self.side;
            }
            d[axis] = delta;
        }
        d
    }

    pub fn distance(&self, x: Point, y: Point) -> f64 {
        let d = self.displacement(x, y);
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }

    /// Flat indices of all cells whose centre lies in the closed ball `B(centre, radius)`.
    pub fn cells_in_ball(&self, centre: Point, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        let h = self.spacing;
        let k = self.cells_per_side as i64;
        let r2 = radius * radius;
        // Cell i has centre (i + 1/2) h, so it can only be hit for i in this range.
        let range = |c: f64| {
            let lo = ((c - radius) / h - 0.5).ceil() as i64;
            let hi = ((c + radius) / h - 0.5).floor() as i64;
            // A ball wider than the torus would visit cells twice.
            if hi - lo + 1 > k {
                (0, k - 1)
            } else {
                (lo, hi)
            }
        };
        let (lo0, hi0) = range(centre[0]);
        match self.dimension {
            1 => {
                for i in lo0..=hi0 {
                    let cx = (i as f64 + 0.5) * h;
                    let idx = self.wrapped_index([i, 0]);
                    let d = self.displacement(centre, [cx, 0.0]);
                    if d[0] * d[0] <= r2 {
                        out.push(idx);
                    }
                }
            }
            _ => {
                let (lo1, hi1) = range(centre[1]);
                for i in lo0..=hi0 {
                    let cx = (i as f64 + 0.5) * h;
                    for j in lo1..=hi1 {
                        let cy = (j as f64 + 0.5) * h;
                        let d = self.displacement(centre, [cx, cy]);
                        if d[0] * d[0] + d[1] * d[1] <= r2 {
                            out.push(self.wrapped_index([i, j]));
                        }
                    }
                }
            }
        }
    }

    /// Offsets (in cells) of all cells whose centre is within `radius` of the
    /// centre of a reference cell. Identical for every cell of a uniform grid.
    pub fn ball_stencil(&self, radius: f64) -> Vec<[i64; 2]> {
        let h = self.spacing;
        let reach = (radius / h).floor() as i64;
        let r2 = radius * radius;
        let mut stencil = Vec::new();
        let second = if self.dimension == 2 { reach } else { 0 };
        for i in -reach..=reach {
            for j in -second..=second {
                let (dx, dy) = (i as f64 * h, j as f64 * h);
                if dx * dx + dy * dy <= r2 * (1.0 + 1e-12) {
                    stencil.push([i, j]);
                }
            }
        }
        stencil
    }

    /// Nearest-neighbour offsets of the discrete Laplacian.
    pub fn neighbour_offsets(&self) -> &'static [[i64; 2]] {
        match self.dimension {
            1 => &[[-1, 0], [1, 0]],
            _ => &[[-1, 0], [1, 0], [0, -1], [0, 1]],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_integer_ratio() {
        assert!(SpatialDomain::new(1, 1.0, 0.3).is_err());
        assert!(SpatialDomain::new(3, 1.0, 0.25).is_err());
        assert!(SpatialDomain::new(2, -1.0, 0.25).is_err());
        assert_eq!(SpatialDomain::new(2, 1.0, 0.25).unwrap().cell_count(), 16);
    }

    #[test]
    fn torus_distance_wraps() {
        let d = SpatialDomain::new(1, 10.0, 1.0).unwrap();
        assert!((d.distance([0.5, 0.0], [9.5, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn containing_cell_wraps_negative_coordinates() {
        let d = SpatialDomain::new(2, 4.0, 1.0).unwrap();
        assert_eq!(d.cell_containing([-0.5, 0.5]), d.cell_index([3, 0]));
        assert_eq!(d.cell_containing([4.0, 4.0]), d.cell_index([0, 0]));
    }

    #[test]
    fn ball_agrees_with_stencil_at_cell_centres() {
        let d = SpatialDomain::new(2, 8.0, 0.25).unwrap();
        let mut cells = Vec::new();
        let centre = d.cell_centre(d.cell_index([3, 30]));
        d.cells_in_ball(centre, 0.8, &mut cells);
        assert_eq!(cells.len(), d.ball_stencil(0.8).len());
    }

    #[test]
    fn outside_points_are_domain_errors() {
        let d = SpatialDomain::new(1, 1.0, 0.5).unwrap();
        assert!(matches!(d.checked_point(&[1.5]), Err(Error::Domain { .. })));
        assert!(d.checked_point(&[0.2, 0.1]).is_err());
    }
}
