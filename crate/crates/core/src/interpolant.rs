//! The kernel interpolant `u(x; η) = κ(x, M) K_MM⁻¹ η` on a product grid.
//!
//! Because the kernel factors over dimensions and the collocation points
//! form a grid, every derivative of the interpolant is a sequence of mode
//! products: at grid points with the cached differentiation matrices
//! `D_j^(r) = ∂^r κ_j(s^j, s^j) K_j⁻¹`, and at an arbitrary point with the row
//! vectors `∂^r κ_j(x_j, s^j) K_j⁻¹`.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel1d::{gram_cholesky_for_axis, se_deriv_unchecked, AxisGram};
use crate::tensor::{mode_multiply, mode_multiply_transposed, DenseTensor, Matrix};

/// Highest derivative order supported along any axis.
pub const MAX_ORDER: usize = 2;

/// Per-dimension SE lengthscales plus the nugget added to every axis Gram.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductKernel {
    lengthscales: Vec<f64>,
    nugget: f64,
}

impl ProductKernel {
    pub fn new(lengthscales: Vec<f64>, nugget: f64) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::Parameter("no lengthscales given".into()));
        }
        if let Some(l) = lengthscales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Parameter(format!(
                "lengthscale must be positive and finite, got {l}"
            )));
        }
        if !(nugget >= 0.0 && nugget.is_finite()) {
            return Err(Error::Parameter(format!(
                "nugget must be nonnegative and finite, got {nugget}"
            )));
        }
        Ok(Self {
            lengthscales,
            nugget,
        })
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn ndim(&self) -> usize {
        self.lengthscales.len()
    }

    /// `κ(x, x') = ∏_j κ_j(x_j, x'_j)`.
    pub fn eval(&self, x: &[f64], x_prime: &[f64]) -> f64 {
        self.lengthscales
            .iter()
            .zip(x.iter().zip(x_prime))
            .map(|(&l, (a, b))| se_deriv_unchecked(a - b, l, 0))
            .product()
    }

    /// Factorized axis Grams for `grid`.
    pub fn axis_grams(&self, grid: &Grid) -> Result<Vec<AxisGram>> {
        if grid.ndim() != self.ndim() {
            return Err(Error::Shape(format!(
                "{}-dimensional kernel on a {}-dimensional grid",
                self.ndim(),
                grid.ndim()
            )));
        }
        (0..grid.ndim())
            .map(|j| gram_cholesky_for_axis(j, grid.axis(j), self.lengthscales[j], self.nugget))
            .collect()
    }
}

/// Derivative orders per axis, e.g. `[2, 0]` for `∂²/∂x₁²`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(orders: Vec<usize>) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::Parameter("empty multi-index".into()));
        }
        if let Some(&order) = orders.iter().find(|&&r| r > MAX_ORDER) {
            return Err(Error::UnsupportedOrder { order });
        }
        Ok(Self(orders))
    }

    /// `α = 0`: the function value itself.
    pub fn value(d: usize) -> Self {
        Self(vec![0; d])
    }

    /// Single-axis derivative of the given order.
    pub fn along(d: usize, axis: usize, order: usize) -> Result<Self> {
        let mut orders = vec![0; d];
        orders[axis] = order;
        Self::new(orders)
    }

    pub fn orders(&self) -> &[usize] {
        &self.0
    }

    pub fn ndim(&self) -> usize {
        self.0.len()
    }

    pub fn total_order(&self) -> usize {
        self.0.iter().sum()
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "α{:?}", self.0)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|r| r.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Nodal values `η` over a grid, viewed as an `m_1 × … × m_d` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    values: DenseTensor,
}

impl NodalField {
    pub fn new(grid: &Grid, values: DenseTensor) -> Result<Self> {
        if values.shape() != grid.shape() {
            return Err(Error::Shape(format!(
                "field of shape {:?} on grid {:?}",
                values.shape(),
                grid.shape()
            )));
        }
        if values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("nodal values must be finite".into()));
        }
        Ok(Self { values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: DenseTensor::zeros(grid.shape()),
        }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.ndim()];
        let data = (0..grid.len())
            .map(|k| {
                grid.point_into(k, &mut x);
                f(&x)
            })
            .collect();
        Self {
            values: DenseTensor::new(grid.shape().to_vec(), data).expect("grid shape"),
        }
    }

    pub fn values(&self) -> &DenseTensor {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DenseTensor {
        &mut self.values
    }

    pub fn into_values(self) -> DenseTensor {
        self.values
    }

    pub fn shape(&self) -> &[usize] {
        self.values.shape()
    }
}

/// Axis Grams and differentiation matrices `D_j^(r)` for one grid and kernel.
#[derive(Debug, Clone)]
pub struct DiffMatrixCache {
    shape: Vec<usize>,
    grams: Vec<AxisGram>,
    // diff[j][r] = D_j^(r)
    diff: Vec<Vec<Matrix>>,
}

impl DiffMatrixCache {
    pub fn build(grid: &Grid, kernel: &ProductKernel) -> Result<Self> {
        let grams = kernel.axis_grams(grid)?;
        let diff = grams
            .iter()
            .map(|gram| {
                (0..=MAX_ORDER)
                    .map(|r| differentiation_matrix(gram, gram.locations(), r))
                    .collect()
            })
            .collect();
        Ok(Self {
            shape: grid.shape().to_vec(),
            grams,
            diff,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn grams(&self) -> &[AxisGram] {
        &self.grams
    }

    /// `D_axis^(order)`.
    pub fn matrix(&self, axis: usize, order: usize) -> &Matrix {
        &self.diff[axis][order]
    }

    fn check(&self, shape: &[usize], alpha: &MultiIndex) -> Result<()> {
        if shape != self.shape.as_slice() {
            return Err(Error::Shape(format!(
                "tensor of shape {shape:?} against cache built for {:?}",
                self.shape
            )));
        }
        if alpha.ndim() != self.shape.len() {
            return Err(Error::Shape(format!(
                "multi-index {alpha:?} for a {}-dimensional grid",
                self.shape.len()
            )));
        }
        Ok(())
    }
}

/// `[∂^order κ(x_i, s_k)]_{ik} · (K + nugget·I)⁻¹` for evaluation points `xs`.
pub fn differentiation_matrix(gram: &AxisGram, xs: &[f64], order: usize) -> Matrix {
    let ell = gram.kernel().lengthscale();
    let s = gram.locations();
    let mut out = Matrix::zeros(xs.len(), s.len());
    let mut phi = vec![0.0; s.len()];
    for (i, &x) in xs.iter().enumerate() {
        for (p, &sk) in phi.iter_mut().zip(s) {
            *p = se_deriv_unchecked(x - sk, ell, order);
        }
        let w = gram.solve(&phi);
        out.as_mut_slice()[i * s.len()..(i + 1) * s.len()].copy_from_slice(&w);
    }
    out
}

/// `∂^α u` at every grid point: `A ×_1 D_1^(α_1) ×_2 … ×_d D_d^(α_d)`.
pub fn eval_grid(
    field: &NodalField,
    cache: &DiffMatrixCache,
    alpha: &MultiIndex,
) -> Result<DenseTensor> {
    cache.check(field.shape(), alpha)?;
    apply_axes(field.values(), alpha, |t, axis, order| {
        mode_multiply(t, cache.matrix(axis, order), axis)
    })
}

/// Adjoint of [`eval_grid`]: `W ×_1 (D_1^(α_1))ᵀ ×_2 … ×_d (D_d^(α_d))ᵀ`.
pub fn eval_grid_adjoint(
    cache: &DiffMatrixCache,
    cotangent: &DenseTensor,
    alpha: &MultiIndex,
) -> Result<DenseTensor> {
    cache.check(cotangent.shape(), alpha)?;
    apply_axes(cotangent, alpha, |t, axis, order| {
        mode_multiply_transposed(t, cache.matrix(axis, order), axis)
    })
}

fn apply_axes(
    input: &DenseTensor,
    alpha: &MultiIndex,
    mut product: impl FnMut(&DenseTensor, usize, usize) -> Result<DenseTensor>,
) -> Result<DenseTensor> {
    let mut axes = alpha.orders().iter().enumerate();
    let (axis, &order) = axes.next().expect("non-empty multi-index");
    let mut t = product(input, axis, order)?;
    for (axis, &order) in axes {
        t = product(&t, axis, order)?;
    }
    Ok(t)
}

/// [`eval_grid`] for several multi-indices at once.
///
/// Channels that agree on their leading axis orders share the corresponding
/// mode products.
pub fn eval_grid_many(
    field: &NodalField,
    cache: &DiffMatrixCache,
    alphas: &[MultiIndex],
) -> Result<Vec<DenseTensor>> {
    for a in alphas {
        cache.check(field.shape(), a)?;
    }
    let mut out: Vec<Option<DenseTensor>> = vec![None; alphas.len()];
    let members: Vec<usize> = (0..alphas.len()).collect();
    forward_shared(field.values(), 0, &members, alphas, cache, &mut out)?;
    Ok(out.into_iter().map(|t| t.expect("every channel visited")).collect())
}

fn forward_shared(
    t: &DenseTensor,
    axis: usize,
    members: &[usize],
    alphas: &[MultiIndex],
    cache: &DiffMatrixCache,
    out: &mut [Option<DenseTensor>],
) -> Result<()> {
    for order in 0..=MAX_ORDER {
        let group: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&q| alphas[q].orders()[axis] == order)
            .collect();
        if group.is_empty() {
            continue;
        }
        let next = mode_multiply(t, cache.matrix(axis, order), axis)?;
        if axis + 1 == cache.shape.len() {
            for &q in &group[1..] {
                out[q] = Some(next.clone());
            }
            out[group[0]] = Some(next);
        } else {
            forward_shared(&next, axis + 1, &group, alphas, cache, out)?;
        }
    }
    Ok(())
}

/// `Σ_q eval_grid_adjoint(cotangents[q], alphas[q])`, sharing mode products.
pub fn eval_grid_adjoint_sum(
    cache: &DiffMatrixCache,
    cotangents: &[DenseTensor],
    alphas: &[MultiIndex],
) -> Result<DenseTensor> {
    if cotangents.len() != alphas.len() || alphas.is_empty() {
        return Err(Error::Shape(format!(
            "{} cotangents for {} multi-indices",
            cotangents.len(),
            alphas.len()
        )));
    }
    for (w, a) in cotangents.iter().zip(alphas) {
        cache.check(w.shape(), a)?;
    }
    let members: Vec<usize> = (0..alphas.len()).collect();
    adjoint_shared(0, &members, cotangents, alphas, cache)
}

fn adjoint_shared(
    axis: usize,
    members: &[usize],
    cotangents: &[DenseTensor],
    alphas: &[MultiIndex],
    cache: &DiffMatrixCache,
) -> Result<DenseTensor> {
    if axis == cache.shape.len() {
        let mut sum = cotangents[members[0]].clone();
        for &q in &members[1..] {
            sum.axpy(1.0, &cotangents[q]);
        }
        return Ok(sum);
    }
    let mut total: Option<DenseTensor> = None;
    for order in 0..=MAX_ORDER {
        let group: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&q| alphas[q].orders()[axis] == order)
            .collect();
        if group.is_empty() {
            continue;
        }
        let inner = adjoint_shared(axis + 1, &group, cotangents, alphas, cache)?;
        let term = mode_multiply_transposed(&inner, cache.matrix(axis, order), axis)?;
        match total.as_mut() {
            Some(acc) => acc.axpy(1.0, &term),
            None => total = Some(term),
        }
    }
    Ok(total.expect("non-empty group"))
}

/// Row vectors `∂^{α_j} κ_j(x_j, s^j) K_j⁻¹` for one point.
#[derive(Debug, Clone)]
pub struct PointWeights {
    rows: Vec<Vec<f64>>,
}

impl PointWeights {
    pub fn new(grams: &[AxisGram], x: &[f64], alpha: &MultiIndex) -> Result<Self> {
        if x.len() != grams.len() || alpha.ndim() != grams.len() {
            return Err(Error::Shape(format!(
                "point {x:?} / multi-index {alpha:?} for a {}-dimensional grid",
                grams.len()
            )));
        }
        let outside = grams.iter().zip(x).any(|(g, &xj)| {
            let s = g.locations();
            xj < s[0] || xj > s[s.len() - 1]
        });
        if outside {
            log::warn!("evaluating the interpolant outside the grid bounding box at {x:?}");
        }
        let rows = grams
            .iter()
            .zip(x)
            .zip(alpha.orders())
            .map(|((g, &xj), &r)| g.weights(xj, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Full contraction `A ×_1 w_1 ×_2 … ×_d w_d`.
    pub fn contract(&self, values: &DenseTensor) -> f64 {
        let mut buf = values.as_slice().to_vec();
        let mut len = buf.len();
        for w in self.rows.iter().rev() {
            let m = w.len();
            len /= m;
            for p in 0..len {
                let fiber = &buf[p * m..(p + 1) * m];
                let s: f64 = fiber.iter().zip(w).map(|(a, b)| a * b).sum();
                buf[p] = s;
            }
        }
        buf[0]
    }

    /// `target += scale · (w_1 ⊗ … ⊗ w_d)`: the transpose of [`Self::contract`].
    pub fn add_outer(&self, scale: f64, target: &mut DenseTensor) {
        let mut acc = vec![scale];
        for w in &self.rows {
            let mut next = Vec::with_capacity(acc.len() * w.len());
            for &a in &acc {
                next.extend(w.iter().map(|&b| a * b));
            }
            acc = next;
        }
        for (t, a) in target.as_mut_slice().iter_mut().zip(&acc) {
            *t += a;
        }
    }
}

/// `(∂^α u)(x; η)` at an arbitrary point, without forming `K_MM`.
///
/// Points outside the grid's bounding box are extrapolated and logged.
pub fn eval_point(
    field: &NodalField,
    cache: &DiffMatrixCache,
    x: &[f64],
    alpha: &MultiIndex,
) -> Result<f64> {
    cache.check(field.shape(), alpha)?;
    Ok(PointWeights::new(cache.grams(), x, alpha)?.contract(field.values()))
}

/// Evaluation of `∂^α u` on a second product lattice (e.g. a refined grid).
#[derive(Debug, Clone)]
pub struct LatticeEvaluator {
    shape: Vec<usize>,
    matrices: Vec<Matrix>,
}

impl LatticeEvaluator {
    pub fn new(cache: &DiffMatrixCache, lattice: &Grid, alpha: &MultiIndex) -> Result<Self> {
        if lattice.ndim() != cache.grams().len() || alpha.ndim() != lattice.ndim() {
            return Err(Error::Shape(format!(
                "lattice {:?} against a {}-dimensional grid",
                lattice.shape(),
                cache.grams().len()
            )));
        }
        let matrices = cache
            .grams()
            .iter()
            .enumerate()
            .map(|(j, g)| differentiation_matrix(g, lattice.axis(j), alpha.orders()[j]))
            .collect();
        Ok(Self {
            shape: lattice.shape().to_vec(),
            matrices,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn apply(&self, values: &DenseTensor) -> Result<DenseTensor> {
        let mut t = mode_multiply(values, &self.matrices[0], 0)?;
        for (axis, m) in self.matrices.iter().enumerate().skip(1) {
            t = mode_multiply(&t, m, axis)?;
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisSpec};

    fn grid2(n0: usize, n1: usize) -> Grid {
        build_grid(&[AxisSpec::uniform(n0, 0.0, 1.0), AxisSpec::uniform(n1, 0.0, 1.0)]).unwrap()
    }

    fn pseudo_random(grid: &Grid, seed: u64) -> NodalField {
        let mut s = seed;
        let data = (0..grid.len())
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect();
        NodalField::new(grid, DenseTensor::new(grid.shape().to_vec(), data).unwrap()).unwrap()
    }

    #[test]
    fn multi_index_validation() {
        assert!(MultiIndex::new(vec![0, 3]).is_err());
        assert!(MultiIndex::new(vec![]).is_err());
        assert_eq!(MultiIndex::along(2, 1, 2).unwrap().orders(), &[0, 2]);
    }

    #[test]
    fn grid_point_evaluation_reproduces_nodal_values() {
        // well-conditioned axis Grams: spacing comparable to the lengthscale
        let grid = grid2(3, 3);
        let kernel = ProductKernel::new(vec![0.3, 0.3], 1e-8).unwrap();
        let cache = DiffMatrixCache::build(&grid, &kernel).unwrap();
        let field = pseudo_random(&grid, 5);
        let tol = 10.0 * 1e-8 * field.values().max_abs();
        for k in 0..grid.len() {
            let v = eval_point(&field, &cache, &grid.point(k), &MultiIndex::value(2)).unwrap();
            assert!((v - field.values().as_slice()[k]).abs() <= tol);
        }
    }

    #[test]
    fn d0_is_near_identity_for_well_conditioned_axis() {
        let grid = grid2(4, 3);
        let nugget = 1e-8;
        let kernel = ProductKernel::new(vec![0.2, 0.3], nugget).unwrap();
        let cache = DiffMatrixCache::build(&grid, &kernel).unwrap();
        for j in 0..2 {
            let d0 = cache.matrix(j, 0);
            let dev = d0.max_abs_diff(&Matrix::identity(d0.rows()));
            assert!(dev <= 10.0 * nugget, "axis {j}: {dev}");
        }
    }

    #[test]
    fn first_derivative_matches_finite_differences() {
        let grid = grid2(6, 5);
        let kernel = ProductKernel::new(vec![0.3, 0.35], 1e-10).unwrap();
        let cache = DiffMatrixCache::build(&grid, &kernel).unwrap();
        let field = pseudo_random(&grid, 11);
        let x = [0.37, 0.61];
        let h = 1e-5;
        let f = |x0: f64| eval_point(&field, &cache, &[x0, x[1]], &MultiIndex::value(2)).unwrap();
        let fd = (f(x[0] + h) - f(x[0] - h)) / (2.0 * h);
        let exact = eval_point(&field, &cache, &x, &MultiIndex::new(vec![1, 0]).unwrap()).unwrap();
        assert!(((fd - exact) / exact).abs() <= 1e-5, "{fd} vs {exact}");
    }

    #[test]
    fn eval_grid_matches_pointwise() {
        let grid = grid2(5, 4);
        let kernel = ProductKernel::new(vec![0.25, 0.4], 1e-9).unwrap();
        let cache = DiffMatrixCache::build(&grid, &kernel).unwrap();
        let field = pseudo_random(&grid, 2);
        let alpha = MultiIndex::new(vec![0, 2]).unwrap();
        let t = eval_grid(&field, &cache, &alpha).unwrap();
        for k in 0..grid.len() {
            let p = eval_point(&field, &cache, &grid.point(k), &alpha).unwrap();
            let g = t.as_slice()[k];
            assert!((p - g).abs() <= 1e-8 * p.abs().max(1.0));
        }
    }

    #[test]
    fn linear_function_has_constant_slope() {
        let grid = grid2(41, 5);
        let kernel = ProductKernel::new(vec![0.2, 0.5], 1e-12).unwrap();
        let cache = DiffMatrixCache::build(&grid, &kernel).unwrap();
        let (c0, c1) = (0.7, -1.3);
        let field = NodalField::from_fn(&grid, |x| c0 + c1 * x[0]);
        let t = eval_grid(&field, &cache, &MultiIndex::new(vec![1, 0]).unwrap()).unwrap();
        for &v in t.as_slice() {
            assert!(((v - c1) / c1).abs() <= 1e-3, "{v}");
        }
    }

    #[test]
    fn adjoint_identity() {
        let grid = grid2(5, 6);
        let kernel = ProductKernel::new(vec![0.3, 0.2], 1e-8).unwrap();
        let cache = DiffMatrixCache::build(&grid, &kernel).unwrap();
        let eta = pseudo_random(&grid, 3);
        let w = pseudo_random(&grid, 4).into_values();
        for orders in [[0, 0], [1, 0], [0, 2], [2, 1], [2, 2]] {
            let alpha = MultiIndex::new(orders.to_vec()).unwrap();
            let lhs = eval_grid(&eta, &cache, &alpha).unwrap().dot(&w);
            let rhs = eta
                .values()
                .dot(&eval_grid_adjoint(&cache, &w, &alpha).unwrap());
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "{orders:?}");
        }
    }

    #[test]
    fn contract_and_outer_are_transposes() {
        let grid = grid2(4, 5);
        let kernel = ProductKernel::new(vec![0.3, 0.3], 1e-8).unwrap();
        let cache = DiffMatrixCache::build(&grid, &kernel).unwrap();
        let w = PointWeights::new(cache.grams(), &[0.3, 0.8], &MultiIndex::new(vec![1, 1]).unwrap())
            .unwrap();
        let eta = pseudo_random(&grid, 9);
        let mut outer = DenseTensor::zeros(grid.shape());
        w.add_outer(1.0, &mut outer);
        let a = w.contract(eta.values());
        let b = outer.dot(eta.values());
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn lattice_matches_pointwise() {
        let grid = grid2(6, 7);
        let kernel = ProductKernel::new(vec![0.3, 0.25], 1e-8).unwrap();
        let cache = DiffMatrixCache::build(&grid, &kernel).unwrap();
        let eta = pseudo_random(&grid, 21);
        let lattice = grid.refined(3);
        let alpha = MultiIndex::value(2);
        let ev = LatticeEvaluator::new(&cache, &lattice, &alpha).unwrap();
        let out = ev.apply(eta.values()).unwrap();
        for k in (0..lattice.len()).step_by(7) {
            let p = eval_point(&eta, &cache, &lattice.point(k), &alpha).unwrap();
            assert!((p - out.as_slice()[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let grid = grid2(4, 4);
        let other = grid2(5, 4);
        let kernel = ProductKernel::new(vec![0.3, 0.3], 1e-8).unwrap();
        let cache = DiffMatrixCache::build(&other, &kernel).unwrap();
        let field = NodalField::zeros(&grid);
        assert!(matches!(
            eval_grid(&field, &cache, &MultiIndex::value(2)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn batched_channels_match_single() {
        let grid = build_grid(&[
            AxisSpec::uniform(5, 0.0, 1.0),
            AxisSpec::uniform(4, 0.0, 1.0),
            AxisSpec::uniform(3, 0.0, 1.0),
        ])
        .unwrap();
        let kernel = ProductKernel::new(vec![0.3, 0.35, 0.5], 1e-8).unwrap();
        let cache = DiffMatrixCache::build(&grid, &kernel).unwrap();
        let eta = pseudo_random(&grid, 5);
        let alphas = vec![
            MultiIndex::value(3),
            MultiIndex::new(vec![0, 1, 0]).unwrap(),
            MultiIndex::new(vec![2, 0, 0]).unwrap(),
            MultiIndex::new(vec![0, 0, 2]).unwrap(),
            MultiIndex::new(vec![1, 1, 0]).unwrap(),
        ];
        let many = eval_grid_many(&eta, &cache, &alphas).unwrap();
        let mut cots = Vec::new();
        let mut expected = DenseTensor::zeros(grid.shape());
        for (q, a) in alphas.iter().enumerate() {
            let single = eval_grid(&eta, &cache, a).unwrap();
            assert!(single.max_abs_diff(&many[q]) < 1e-12);
            let w = pseudo_random(&grid, 100 + q as u64).into_values();
            expected.axpy(1.0, &eval_grid_adjoint(&cache, &w, a).unwrap());
            cots.push(w);
        }
        let sum = eval_grid_adjoint_sum(&cache, &cots, &alphas).unwrap();
        assert!(sum.max_abs_diff(&expected) < 1e-12);
    }
}
