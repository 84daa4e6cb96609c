//! Second-order finite-difference discretization solved by damped Newton.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::interpolant::MultiIndex;
use crate::objective::PdeProblem;
use crate::tensor::DenseTensor;

/// Newton settings for [`fd_solve_problem`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Stop once the residual ∞-norm is at or below this.
    pub tol: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_newton: 50,
            max_halvings: 10,
        }
    }
}

/// Offsets and coefficients of a product stencil.
struct Stencil {
    // (flat offset, coefficient)
    entries: Vec<(isize, f64)>,
}

fn axis_stencil(order: usize, h: f64) -> Vec<(isize, f64)> {
    match order {
        0 => vec![(0, 1.0)],
        1 => vec![(-1, -0.5 / h), (1, 0.5 / h)],
        _ => vec![(-1, 1.0 / (h * h)), (0, -2.0 / (h * h)), (1, 1.0 / (h * h))],
    }
}

fn product_stencil(alpha: &MultiIndex, spacing: &[f64], strides: &[usize]) -> Stencil {
    let mut entries = vec![(0isize, 1.0)];
    for (j, &order) in alpha.orders().iter().enumerate() {
        let axis = axis_stencil(order, spacing[j]);
        entries = entries
            .iter()
            .flat_map(|&(off, c)| {
                axis.iter()
                    .map(move |&(o, a)| (off + o * strides[j] as isize, c * a))
            })
            .collect();
    }
    Stencil { entries }
}

fn uniform_spacing(grid: &Grid) -> Result<Vec<f64>> {
    (0..grid.ndim())
        .map(|j| {
            let a = grid.axis(j);
            if a.len() < 3 {
                return Err(Error::Input(format!(
                    "axis {j} needs at least 3 points for centered differences"
                )));
            }
            let h = (a[a.len() - 1] - a[0]) / (a.len() - 1) as f64;
            if a.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
                return Err(Error::Input(format!("axis {j} is not uniformly spaced")));
            }
            Ok(h)
        })
        .collect()
}

struct Discretization<'a> {
    problem: &'a PdeProblem,
    points: Vec<Vec<f64>>,
    interior: Vec<bool>,
    stencils: Vec<Stencil>,
}

impl Discretization<'_> {
    fn residual(&self, u: &[f64], jacobian: Option<&mut Vec<Triplet<usize, usize, f64>>>) -> Vec<f64> {
        let q_int = self.problem.interior_channels.len();
        let q_bnd = self.problem.boundary_channels.len();
        let mut z = vec![0.0; q_int.max(q_bnd)];
        let mut partials = vec![0.0; z.len()];
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut out = vec![0.0; u.len()];
        let mut jac = jacobian;
        for k in 0..u.len() {
            let x = &self.points[k];
            row.clear();
            if self.interior[k] {
                for (q, s) in self.stencils.iter().enumerate() {
                    z[q] = s
                        .entries
                        .iter()
                        .map(|&(o, c)| c * u[(k as isize + o) as usize])
                        .sum();
                }
                out[k] = self
                    .problem
                    .interior
                    .eval(&z[..q_int], x, &mut partials[..q_int]);
                if jac.is_some() {
                    for (q, s) in self.stencils.iter().enumerate() {
                        for &(o, c) in &s.entries {
                            row.push(((k as isize + o) as usize, partials[q] * c));
                        }
                    }
                }
            } else {
                z[..q_bnd].fill(u[k]);
                out[k] = self
                    .problem
                    .boundary
                    .eval(&z[..q_bnd], x, &mut partials[..q_bnd]);
                row.push((k, partials[..q_bnd].iter().sum()));
            }
            if let Some(j) = jac.as_deref_mut() {
                row.sort_unstable_by_key(|e| e.0);
                let mut i = 0;
                while i < row.len() {
                    let col = row[i].0;
                    let mut v = 0.0;
                    while i < row.len() && row[i].0 == col {
                        v += row[i].1;
                        i += 1;
                    }
                    j.push(Triplet::new(k, col, v));
                }
            }
        }
        out
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Solves a steady problem on a uniform grid with Dirichlet data on every face.
///
/// Interior channels are discretized with centered second-order stencils;
/// boundary combiners must use only the value channel.
pub fn fd_solve_problem(problem: &PdeProblem, grid: &Grid, config: NewtonConfig) -> Result<DenseTensor> {
    let d = grid.ndim();
    if let Some(a) = problem
        .boundary_channels
        .iter()
        .find(|a| a.total_order() != 0)
    {
        return Err(Error::Input(format!(
            "finite differences support Dirichlet boundaries only, found channel {a:?}"
        )));
    }
    if let Some(a) = problem
        .interior_channels
        .iter()
        .find(|a| a.ndim() != d)
    {
        return Err(Error::Shape(format!("channel {a:?} on a {d}-dimensional grid")));
    }
    let spacing = uniform_spacing(grid)?;
    let shape = grid.shape();
    let mut strides = vec![1usize; d];
    for j in (0..d.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * shape[j + 1];
    }
    let interior = (0..grid.len())
        .map(|k| {
            grid.multi_index(k)
                .iter()
                .zip(shape)
                .all(|(&i, &m)| i > 0 && i + 1 < m)
        })
        .collect();
    let disc = Discretization {
        problem,
        points: grid.points(),
        interior,
        stencils: problem
            .interior_channels
            .iter()
            .map(|a| product_stencil(a, &spacing, &strides))
            .collect(),
    };

    let n = grid.len();
    let mut u = vec![0.0; n];
    let mut f = disc.residual(&u, None);
    let mut history = vec![inf_norm(&f)];
    for _ in 0..config.max_newton {
        let norm = *history.last().expect("non-empty");
        if norm <= config.tol {
            return Ok(DenseTensor::new(shape.to_vec(), u).expect("grid shape"));
        }
        if !norm.is_finite() {
            break;
        }
        let mut triplets = Vec::with_capacity(n * 9);
        disc.residual(&u, Some(&mut triplets));
        let jac = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::Numerical(format!("Jacobian assembly failed: {e:?}")))?;
        let lu = jac
            .sp_lu()
            .map_err(|e| Error::Numerical(format!("sparse LU failed: {e:?}")))?;
        let mut delta = Mat::<f64>::from_fn(n, 1, |i, _| -f[i]);
        lu.solve_in_place(delta.as_mut());

        let mut step = 1.0;
        let mut trial = vec![0.0; n];
        let mut accepted = None;
        for halving in 0..=config.max_halvings {
            for i in 0..n {
                trial[i] = u[i] + step * delta[(i, 0)];
            }
            let ft = disc.residual(&trial, None);
            let tn = inf_norm(&ft);
            if tn < norm || halving == config.max_halvings {
                accepted = Some((ft, tn));
                break;
            }
            step *= 0.5;
        }
        let (ft, tn) = accepted.expect("loop always accepts");
        u.copy_from_slice(&trial);
        f = ft;
        history.push(tn);
        log::debug!("newton step {} residual {tn:e} (step {step})", history.len() - 1);
    }
    if history.last().is_some_and(|&r| r <= config.tol) {
        return Ok(DenseTensor::new(shape.to_vec(), u).expect("grid shape"));
    }
    Err(Error::NewtonFailed {
        iterations: history.len() - 1,
        history,
    })
}
