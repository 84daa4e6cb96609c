#![allow(dead_code)]

use kronpde::{build_grid, AxisSpec, Grid, MultiIndex};
use nalgebra::{DMatrix, DVector};

/// SE kernel derivative in the first argument, written out independently.
pub fn se(x: f64, y: f64, l: f64, order: usize) -> f64 {
    let r = x - y;
    let k = (-r * r / (2.0 * l * l)).exp();
    match order {
        0 => k,
        1 => -r / (l * l) * k,
        2 => (r * r / l.powi(4) - 1.0 / (l * l)) * k,
        _ => unreachable!(),
    }
}

/// Full Gram `∏_j (k_j + σ δ)` over all grid points.
pub fn dense_gram(grid: &Grid, ells: &[f64], nugget: f64) -> DMatrix<f64> {
    let pts = grid.points();
    let n = pts.len();
    DMatrix::from_fn(n, n, |a, b| {
        (0..grid.ndim())
            .map(|j| se(pts[a][j], pts[b][j], ells[j], 0) + if pts[a][j] == pts[b][j] { nugget } else { 0.0 })
            .product()
    })
}

/// `∂^α κ(x, M)` as a row vector.
pub fn dense_row(grid: &Grid, ells: &[f64], x: &[f64], alpha: &MultiIndex) -> DVector<f64> {
    let pts = grid.points();
    DVector::from_iterator(
        pts.len(),
        pts.iter().map(|p| {
            (0..grid.ndim())
                .map(|j| se(x[j], p[j], ells[j], alpha.orders()[j]))
                .product::<f64>()
        }),
    )
}

pub struct DenseModel {
    pub grid: Grid,
    pub ells: Vec<f64>,
    pub chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl DenseModel {
    pub fn new(grid: &Grid, ells: &[f64], nugget: f64) -> Self {
        let chol = dense_gram(grid, ells, nugget).cholesky().expect("dense Gram is SPD");
        Self {
            grid: grid.clone(),
            ells: ells.to_vec(),
            chol,
        }
    }

    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        self.chol.solve(&DVector::from_column_slice(v)).as_slice().to_vec()
    }

    pub fn eval(&self, eta: &[f64], x: &[f64], alpha: &MultiIndex) -> f64 {
        let c = self.chol.solve(&DVector::from_column_slice(eta));
        dense_row(&self.grid, &self.ells, x, alpha).dot(&c)
    }

    pub fn rkhs(&self, eta: &[f64]) -> f64 {
        let v = DVector::from_column_slice(eta);
        v.dot(&self.chol.solve(&v))
    }
}

pub fn uniform_grid(shape: &[usize], lower: f64, upper: f64) -> Grid {
    let specs: Vec<AxisSpec> = shape.iter().map(|&m| AxisSpec::uniform(m, lower, upper)).collect();
    build_grid(&specs).unwrap()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Deterministic pseudo-random values in `[-1, 1]`.
pub fn noise(n: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}
