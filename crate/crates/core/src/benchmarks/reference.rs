//! Gridded reference solutions and their interpolation.

use crate::benchmarks::cache::{cache_dir, cached};
use crate::benchmarks::fd::{fd_solve_problem, NewtonConfig};
use crate::benchmarks::BenchmarkSpec;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::tensor::DenseTensor;

/// Piecewise-cubic Lagrange interpolation of values on a uniform grid.
#[derive(Debug, Clone)]
pub struct CubicGridInterpolant {
    lower: Vec<f64>,
    spacing: Vec<f64>,
    values: DenseTensor,
}

impl CubicGridInterpolant {
    pub fn new(grid: &Grid, values: DenseTensor) -> Result<Self> {
        if values.shape() != grid.shape() {
            return Err(Error::Shape(format!(
                "values {:?} on grid {:?}",
                values.shape(),
                grid.shape()
            )));
        }
        if let Some(j) = grid.shape().iter().position(|&m| m < 4) {
            return Err(Error::Input(format!("axis {j} needs at least 4 points")));
        }
        let spacing = (0..grid.ndim())
            .map(|j| {
                let a = grid.axis(j);
                (a[a.len() - 1] - a[0]) / (a.len() - 1) as f64
            })
            .collect();
        Ok(Self {
            lower: grid.lower(),
            spacing,
            values,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let shape = self.values.shape();
        let d = shape.len();
        // per axis: first stencil index and the four Lagrange weights
        let mut starts = vec![0usize; d];
        let mut weights = vec![[0.0; 4]; d];
        for j in 0..d {
            let s = (x[j] - self.lower[j]) / self.spacing[j];
            let cell = (s.floor() as isize).clamp(1, shape[j] as isize - 3) - 1;
            starts[j] = cell as usize;
            let t = s - cell as f64;
            weights[j] = lagrange4(t);
        }
        let mut total = 0.0;
        let mut idx = vec![0usize; d];
        for combo in 0..4usize.pow(d as u32) {
            let mut c = combo;
            let mut w = 1.0;
            for j in (0..d).rev() {
                let o = c % 4;
                c /= 4;
                idx[j] = starts[j] + o;
                w *= weights[j][o];
            }
            total += w * self.values.get(&idx);
        }
        total
    }
}

/// Weights of the cubic through nodes 0, 1, 2, 3 evaluated at `t`.
fn lagrange4(t: f64) -> [f64; 4] {
    [
        -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
        t * (t - 2.0) * (t - 3.0) / 2.0,
        -t * (t - 1.0) * (t - 3.0) / 2.0,
        t * (t - 1.0) * (t - 2.0) / 6.0,
    ]
}

/// Finite-difference solution of a steady benchmark on an `n^d` grid, cached
/// on disk under [`cache_dir`].
pub fn eikonal_reference(spec: &BenchmarkSpec, n: usize) -> Result<DenseTensor> {
    let shape = vec![n; spec.lower.len()];
    let grid = spec.grid(&shape)?;
    let mut params: Vec<f64> = spec.params.iter().map(|(_, v)| *v).collect();
    params.push(n as f64);
    let tag: Vec<String> = spec.params.iter().map(|(k, v)| format!("{k}{v}")).collect();
    let path = cache_dir().join(format!("{}-{}-n{n}.bin", spec.name, tag.join("-")));
    cached(&path, &params, || {
        log::info!("computing {} reference on {shape:?}", spec.name);
        fd_solve_problem(
            &spec.problem,
            &grid,
            NewtonConfig {
                tol: 1e-9,
                max_newton: 60,
                ..NewtonConfig::default()
            },
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisSpec};

    #[test]
    fn reproduces_cubics_exactly() {
        let grid = build_grid(&[AxisSpec::uniform(9, 0.0, 2.0), AxisSpec::uniform(7, -1.0, 1.0)]).unwrap();
        let f = |x: &[f64]| x[0].powi(3) - 2.0 * x[0] * x[1] * x[1] + x[1].powi(3) + 0.5;
        let values = DenseTensor::new(
            grid.shape().to_vec(),
            grid.points().iter().map(|x| f(x)).collect(),
        )
        .unwrap();
        let interp = CubicGridInterpolant::new(&grid, values).unwrap();
        for x in [[0.0, -1.0], [0.37, 0.2], [1.99, 0.99], [1.0, 0.0], [2.0, 1.0]] {
            assert!((interp.eval(&x) - f(&x)).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn lagrange_weights_partition_unity() {
        for t in [0.0, 0.3, 1.5, 2.9] {
            let w = lagrange4(t);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }
}
