//! Low-rank factorisation of grid covariance matrices.
//!
//! A diagonally pivoted Cholesky decomposition `Σ ≈ L Lᵀ` that stops once the
//! residual diagonal is negligible. Rank-deficient kernels (block kernels have
//! rank equal to the number of blocks) therefore cost `O(K r)` memory, and a
//! fully correlated block yields exactly `±1` factor entries, so its cells
//! receive bitwise identical (or negated) increments.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense eigen-decomposition is only attempted for diagnostics below this size.
const EIGEN_DIAGNOSTIC_LIMIT: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    rows: usize,
    rank: usize,
    /// Row-major `rows × rank`.
    data: Vec<f64>,
}

impl LowRankFactor {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.rank..(i + 1) * self.rank]
    }

    /// `out = L z`, with `z.len() == rank`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.rank);
        for (i, o) in out.iter_mut().enumerate().take(self.rows) {
            *o = self
                .row(i)
                .iter()
                .zip(z)
                .map(|(l, zk)| l * zk)
                .sum::<f64>();
        }
    }

    /// Entry `(L Lᵀ)_{ij}`.
    pub fn reconstructed(&self, i: usize, j: usize) -> f64 {
        self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum()
    }
}

/// Factorises the symmetric matrix with entries `entry(i, j)`.
///
/// `tolerance` is relative to the largest diagonal entry: pivoting stops when
/// every residual diagonal is below it, and a residual more negative than
/// `-tolerance` marks the matrix as indefinite.
pub fn pivoted_cholesky<F>(n: usize, entry: F, tolerance: f64) -> Result<LowRankFactor>
where
    F: Fn(usize, usize) -> f64,
{
    let mut residual: Vec<f64> = (0..n).map(|i| entry(i, i)).collect();
    let scale = residual.iter().cloned().fold(0.0_f64, f64::max);
    if n == 0 || scale <= 0.0 {
        return Ok(LowRankFactor {
            rows: n,
            rank: 0,
            data: Vec::new(),
        });
    }
    let tol = tolerance * scale;
    let mut pivoted = vec![false; n];
    let mut columns: Vec<Vec<f64>> = Vec::new();

    loop {
        let negative = residual
            .iter()
            .enumerate()
            .filter(|(i, _)| !pivoted[*i])
            .map(|(_, &d)| d)
            .fold(f64::INFINITY, f64::min);
        if negative < -tol {
            return Err(indefinite(n, &entry, negative));
        }
        // First index of the largest residual, so ties pivot on the lowest index.
        let Some((p, dp)) = residual
            .iter()
            .enumerate()
            .filter(|(i, _)| !pivoted[*i])
            .fold(None, |best: Option<(usize, f64)>, (i, &d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            })
        else {
            break;
        };
        if dp <= tol {
            break;
        }
        let root = dp.sqrt();
        let mut col = vec![0.0; n];
        col[p] = root;
        for i in 0..n {
            if pivoted[i] || i == p {
                continue;
            }
            let mut v = entry(i, p);
            for c in &columns {
                v -= c[i] * c[p];
            }
            let l = v / root;
            col[i] = l;
            residual[i] -= l * l;
        }
        pivoted[p] = true;
        residual[p] = 0.0;
        columns.push(col);
    }

    let rank = columns.len();
    let mut data = vec![0.0; n * rank];
    for (k, col) in columns.iter().enumerate() {
        for i in 0..n {
            data[i * rank + k] = col[i];
        }
    }
    Ok(LowRankFactor { rows: n, rank, data })
}

fn indefinite<F: Fn(usize, usize) -> f64>(n: usize, entry: &F, pivot: f64) -> Error {
    let min_eigenvalue = (n <= EIGEN_DIAGNOSTIC_LIMIT).then(|| {
        let m = DMatrix::from_fn(n, n, |i, j| entry(i, j));
        m.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    });
    Error::NotPositiveSemidefinite {
        pivot,
        min_eigenvalue,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_rank_reconstructs() {
        let a = [[4.0, 2.0, 0.6], [2.0, 2.0, 0.5], [0.6, 0.5, 3.0]];
        let f = pivoted_cholesky(3, |i, j| a[i][j], 1e-12).unwrap();
        assert_eq!(f.rank(), 3);
        for i in 0..3 {
            for j in 0..3 {
                assert!((f.reconstructed(i, j) - a[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn anticorrelated_blocks_have_exact_unit_entries() {
        let sign = |i: usize| if i < 3 { 1.0 } else { -1.0 };
        let f = pivoted_cholesky(6, |i, j| sign(i) * sign(j), 1e-10).unwrap();
        assert_eq!(f.rank(), 1);
        for i in 0..6 {
            assert_eq!(f.row(i)[0], sign(i));
        }
    }

    #[test]
    fn indefinite_matrix_reports_eigenvalue() {
        let a = [[1.0, 2.0], [2.0, 1.0]];
        match pivoted_cholesky(2, |i, j| a[i][j], 1e-12) {
            Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: Some(ev),
                ..
            }) => assert!((ev + 1.0).abs() < 1e-10),
            other => panic!("expected indefinite error, got {other:?}"),
        }
    }
}
