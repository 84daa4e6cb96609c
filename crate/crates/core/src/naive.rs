//! Dense reference model that assembles the full `M × M` Gram matrix.
//!
//! Useful for cross-checking the structured evaluation on small grids and for
//! timing comparisons; it refuses grids above [`DENSE_LIMIT`] points.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::interpolant::{MultiIndex, ProductKernel};
use crate::kernel1d::{cholesky, se_deriv_unchecked};
use crate::tensor::Matrix;

pub const DENSE_LIMIT: usize = 10_000;

/// Full Gram `∏_j (κ_j + nugget·δ)` over the grid points and its Cholesky factor.
#[derive(Debug, Clone)]
pub struct NaiveModel {
    points: Vec<Vec<f64>>,
    kernel: ProductKernel,
    factor: Matrix,
}

impl NaiveModel {
    pub fn new(grid: &Grid, kernel: &ProductKernel) -> Result<Self> {
        if grid.len() > DENSE_LIMIT {
            return Err(Error::TooLarge {
                points: grid.len(),
                limit: DENSE_LIMIT,
            });
        }
        if kernel.ndim() != grid.ndim() {
            return Err(Error::Shape(format!(
                "{}-dimensional kernel on a {}-dimensional grid",
                kernel.ndim(),
                grid.ndim()
            )));
        }
        let points = grid.points();
        let gram = Self::gram_for(&points, kernel);
        let factor = cholesky(&gram).map_err(|(pivot, value)| {
            Error::Numerical(format!(
                "dense Gram is not positive definite (pivot {pivot} = {value:e})"
            ))
        })?;
        Ok(Self {
            points,
            kernel: kernel.clone(),
            factor,
        })
    }

    fn gram_for(points: &[Vec<f64>], kernel: &ProductKernel) -> Matrix {
        let sigma = kernel.nugget();
        let ells = kernel.lengthscales();
        Matrix::from_fn(points.len(), points.len(), |m, n| {
            ells.iter()
                .enumerate()
                .map(|(j, &l)| {
                    let k = se_deriv_unchecked(points[m][j] - points[n][j], l, 0);
                    if points[m][j] == points[n][j] {
                        k + sigma
                    } else {
                        k
                    }
                })
                .product()
        })
    }

    pub fn gram(&self) -> Matrix {
        Self::gram_for(&self.points, &self.kernel)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `K⁻¹ b` by dense triangular solves.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if b.len() != n {
            return Err(Error::Shape(format!("vector of length {} for {n} points", b.len())));
        }
        let l = &self.factor;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = l.row(i);
            let s: f64 = row[..i].iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - s) / row[i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= l[(j, i)] * y[j];
            }
            y[i] = s / l[(i, i)];
        }
        Ok(y)
    }

    /// `∂^α κ(x, M)`: derivatives in the first argument.
    pub fn kernel_row(&self, x: &[f64], alpha: &MultiIndex) -> Vec<f64> {
        let ells = self.kernel.lengthscales();
        self.points
            .iter()
            .map(|p| {
                ells.iter()
                    .zip(alpha.orders())
                    .enumerate()
                    .map(|(j, (&l, &r))| se_deriv_unchecked(x[j] - p[j], l, r))
                    .product()
            })
            .collect()
    }

    pub fn eval_point(&self, eta: &[f64], x: &[f64], alpha: &MultiIndex) -> Result<f64> {
        let coef = self.solve(eta)?;
        Ok(dot(&self.kernel_row(x, alpha), &coef))
    }

    /// `∂^α u` at every grid point, in grid order.
    pub fn eval_grid(&self, eta: &[f64], alpha: &MultiIndex) -> Result<Vec<f64>> {
        let coef = self.solve(eta)?;
        Ok(self
            .points
            .iter()
            .map(|x| dot(&self.kernel_row(x, alpha), &coef))
            .collect())
    }

    pub fn rkhs_norm_sq(&self, eta: &[f64]) -> Result<f64> {
        Ok(dot(eta, &self.solve(eta)?))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
