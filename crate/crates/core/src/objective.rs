//! PDE problems, the soft-constrained objective and its exact gradient.
//!
//! The objective is
//!
//! ```text
//! L(η) = ηᵀ K⁻¹ η
//!      + α · [ mean over interior sites of (P(z) − f)²  − ε/2 ]
//!      + β · [ mean over boundary sites of (B(z) − g)²  − ε/2 ]
//! ```
//!
//! where the channel values `z` are derivatives of the interpolant.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{BoundarySites, DomainClassification, Grid};
use crate::interpolant::{
    eval_grid_adjoint_sum, eval_grid_many, DiffMatrixCache, MultiIndex, NodalField, PointWeights,
};
use crate::kernel1d::AxisGram;
use crate::tensor::{kron_solve_in_place, DenseTensor};

/// A nonlinear combiner of channel values.
///
/// `eval` returns the residual (e.g. `P(z) − f(x)`) and writes `∂/∂z_q`
/// into `partials`.
pub trait Combiner: Send + Sync {
    fn eval(&self, z: &[f64], x: &[f64], partials: &mut [f64]) -> f64;
}

/// Adapts a closure to [`Combiner`].
pub struct FnCombiner<F>(pub F);

impl<F> Combiner for FnCombiner<F>
where
    F: Fn(&[f64], &[f64], &mut [f64]) -> f64 + Send + Sync,
{
    fn eval(&self, z: &[f64], x: &[f64], partials: &mut [f64]) -> f64 {
        (self.0)(z, x, partials)
    }
}

pub type TruthFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A PDE `P(L_1 u, …) = f` in the interior and `B(L_k u, …) = g` on the boundary.
#[derive(Clone)]
pub struct PdeProblem {
    pub name: String,
    pub interior_channels: Vec<MultiIndex>,
    pub boundary_channels: Vec<MultiIndex>,
    pub interior: Arc<dyn Combiner>,
    pub boundary: Arc<dyn Combiner>,
    pub ground_truth: Option<TruthFn>,
}

impl fmt::Debug for PdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PdeProblem")
            .field("name", &self.name)
            .field("interior_channels", &self.interior_channels)
            .field("boundary_channels", &self.boundary_channels)
            .field("ground_truth", &self.ground_truth.is_some())
            .finish()
    }
}

impl PdeProblem {
    pub fn ndim(&self) -> usize {
        self.interior_channels
            .first()
            .or(self.boundary_channels.first())
            .map_or(0, MultiIndex::ndim)
    }

    /// Largest relative disagreement between the analytic partials of both
    /// combiners and central differences, at the given sample points.
    pub fn max_partials_error(&self, samples: &[(Vec<f64>, Vec<f64>, bool)]) -> f64 {
        samples
            .iter()
            .map(|(z, x, interior)| {
                let c: &dyn Combiner = if *interior {
                    self.interior.as_ref()
                } else {
                    self.boundary.as_ref()
                };
                partials_error(c, z, x)
            })
            .fold(0.0, f64::max)
    }
}

/// Relative error of analytic partials against central differences.
pub fn partials_error(combiner: &dyn Combiner, z: &[f64], x: &[f64]) -> f64 {
    let q = z.len();
    let mut exact = vec![0.0; q];
    combiner.eval(z, x, &mut exact);
    let mut scratch = vec![0.0; q];
    let mut worst: f64 = 0.0;
    for i in 0..q {
        let h = 1e-6 * z[i].abs().max(1.0);
        let mut zp = z.to_vec();
        zp[i] += h;
        let fp = combiner.eval(&zp, x, &mut scratch);
        zp[i] -= 2.0 * h;
        let fm = combiner.eval(&zp, x, &mut scratch);
        let fd = (fp - fm) / (2.0 * h);
        let scale = exact[i].abs().max(1.0);
        worst = worst.max((fd - exact[i]).abs() / scale);
    }
    worst
}

/// Regularization strengths of the soft objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl LossConfig {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Self {
            alpha,
            beta,
            epsilon: 0.0,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("epsilon", self.epsilon),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(self)
    }
}

/// Loss value split into its terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub rkhs: f64,
    pub interior_mse: f64,
    pub boundary_mse: f64,
}

/// `ηᵀ (K_1 ⊗ … ⊗ K_d)⁻¹ η`.
pub fn rkhs_norm_sq(field: &NodalField, grams: &[AxisGram]) -> Result<f64> {
    let mut solved = field.values().clone();
    kron_solve_in_place(grams, &mut solved)?;
    Ok(clamp_quadratic(field.values().dot(&solved)))
}

fn clamp_quadratic(q: f64) -> f64 {
    if (-1e-12..0.0).contains(&q) {
        0.0
    } else {
        q
    }
}

/// Everything needed to evaluate the loss repeatedly for one setup.
pub struct Objective<'a> {
    problem: &'a PdeProblem,
    grid: &'a Grid,
    classification: &'a DomainClassification,
    config: LossConfig,
    cache: &'a DiffMatrixCache,
    // channels evaluated on the whole grid, deduplicated
    grid_channels: Vec<MultiIndex>,
    interior_slots: Vec<usize>,
    boundary_slots: Vec<usize>,
    interior_points: Vec<Vec<f64>>,
    // per off-grid boundary point, one weight set per boundary channel
    offgrid: Vec<Vec<PointWeights>>,
}

impl<'a> Objective<'a> {
    pub fn new(
        problem: &'a PdeProblem,
        grid: &'a Grid,
        classification: &'a DomainClassification,
        config: LossConfig,
        cache: &'a DiffMatrixCache,
    ) -> Result<Self> {
        let config = config.validated()?;
        if classification.shape() != grid.shape() || cache.shape() != grid.shape() {
            return Err(Error::Shape(format!(
                "classification {:?} / cache {:?} do not belong to grid {:?}",
                classification.shape(),
                cache.shape(),
                grid.shape()
            )));
        }
        let d = grid.ndim();
        if let Some(a) = problem
            .interior_channels
            .iter()
            .chain(&problem.boundary_channels)
            .find(|a| a.ndim() != d)
        {
            return Err(Error::Shape(format!(
                "channel {a:?} for a {d}-dimensional grid"
            )));
        }
        let mut slots: BTreeMap<MultiIndex, usize> = BTreeMap::new();
        let mut grid_channels = Vec::new();
        let mut slot_of = |a: &MultiIndex| {
            *slots.entry(a.clone()).or_insert_with(|| {
                grid_channels.push(a.clone());
                grid_channels.len() - 1
            })
        };
        let interior_slots: Vec<usize> = problem.interior_channels.iter().map(&mut slot_of).collect();
        let (boundary_slots, offgrid) = match classification.boundary() {
            BoundarySites::Grid(_) => (
                problem.boundary_channels.iter().map(&mut slot_of).collect(),
                Vec::new(),
            ),
            BoundarySites::Points(points) => {
                let weights = points
                    .iter()
                    .map(|x| {
                        problem
                            .boundary_channels
                            .iter()
                            .map(|a| PointWeights::new(cache.grams(), x, a))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                (Vec::new(), weights)
            }
        };
        let interior_points = classification
            .interior_sites()
            .iter()
            .map(|&k| grid.point(k))
            .collect();
        Ok(Self {
            problem,
            grid,
            classification,
            config,
            cache,
            grid_channels,
            interior_slots,
            boundary_slots,
            interior_points,
            offgrid,
        })
    }

    pub fn config(&self) -> LossConfig {
        self.config
    }

    pub fn loss(&self, field: &NodalField) -> Result<LossParts> {
        self.evaluate(field, false).map(|(parts, _)| parts)
    }

    pub fn gradient(&self, field: &NodalField) -> Result<DenseTensor> {
        self.loss_and_gradient(field).map(|(_, g)| g)
    }

    pub fn loss_and_gradient(&self, field: &NodalField) -> Result<(LossParts, DenseTensor)> {
        let (parts, grad) = self.evaluate(field, true)?;
        Ok((parts, grad.expect("gradient requested")))
    }

    fn evaluate(
        &self,
        field: &NodalField,
        with_gradient: bool,
    ) -> Result<(LossParts, Option<DenseTensor>)> {
        let LossConfig {
            alpha,
            beta,
            epsilon,
        } = self.config;
        let shape = self.grid.shape();

        // RKHS term
        let mut kinv_eta = field.values().clone();
        kron_solve_in_place(self.cache.grams(), &mut kinv_eta)?;
        let rkhs = clamp_quadratic(field.values().dot(&kinv_eta));

        let channels = if self.grid_channels.is_empty() {
            Vec::new()
        } else {
            eval_grid_many(field, self.cache, &self.grid_channels)?
        };
        let mut cotangents: Vec<DenseTensor> = if with_gradient {
            vec![DenseTensor::zeros(shape); channels.len()]
        } else {
            Vec::new()
        };

        // interior residuals
        let sites = self.classification.interior_sites();
        let m_int = sites.len() as f64;
        let q_int = self.interior_slots.len();
        let mut z = vec![0.0; q_int.max(self.problem.boundary_channels.len())];
        let mut partials = vec![0.0; z.len()];
        let mut interior_sum = 0.0;
        for (site, &k) in sites.iter().enumerate() {
            let x = &self.interior_points[site];
            for (q, &slot) in self.interior_slots.iter().enumerate() {
                z[q] = channels[slot].as_slice()[k];
            }
            let r = self
                .problem
                .interior
                .eval(&z[..q_int], x, &mut partials[..q_int]);
            check_residual(r, "interior", x)?;
            interior_sum += r * r;
            if with_gradient {
                let c = 2.0 * alpha / m_int * r;
                for (q, &slot) in self.interior_slots.iter().enumerate() {
                    cotangents[slot].as_mut_slice()[k] += c * partials[q];
                }
            }
        }
        let interior_mse = interior_sum / m_int;

        // boundary residuals
        let q_bnd = self.problem.boundary_channels.len();
        let mut boundary_sum = 0.0;
        let mut offgrid_grad = with_gradient.then(|| DenseTensor::zeros(shape));
        let boundary_points = self.classification.boundary_points();
        let m_bnd = boundary_points.len() as f64;
        match self.classification.boundary() {
            BoundarySites::Grid(indices) => {
                for (&k, x) in indices.iter().zip(boundary_points) {
                    for (q, &slot) in self.boundary_slots.iter().enumerate() {
                        z[q] = channels[slot].as_slice()[k];
                    }
                    let r = self
                        .problem
                        .boundary
                        .eval(&z[..q_bnd], x, &mut partials[..q_bnd]);
                    check_residual(r, "boundary", x)?;
                    boundary_sum += r * r;
                    if with_gradient {
                        let c = 2.0 * beta / m_bnd * r;
                        for (q, &slot) in self.boundary_slots.iter().enumerate() {
                            cotangents[slot].as_mut_slice()[k] += c * partials[q];
                        }
                    }
                }
            }
            BoundarySites::Points(_) => {
                for (weights, x) in self.offgrid.iter().zip(boundary_points) {
                    for (q, w) in weights.iter().enumerate() {
                        z[q] = w.contract(field.values());
                    }
                    let r = self
                        .problem
                        .boundary
                        .eval(&z[..q_bnd], x, &mut partials[..q_bnd]);
                    check_residual(r, "boundary", x)?;
                    boundary_sum += r * r;
                    if let Some(g) = offgrid_grad.as_mut() {
                        let c = 2.0 * beta / m_bnd * r;
                        for (q, w) in weights.iter().enumerate() {
                            w.add_outer(c * partials[q], g);
                        }
                    }
                }
            }
        }
        let boundary_mse = boundary_sum / m_bnd;

        let total = rkhs + alpha * (interior_mse - epsilon / 2.0) + beta * (boundary_mse - epsilon / 2.0);
        let parts = LossParts {
            total,
            rkhs,
            interior_mse,
            boundary_mse,
        };
        if !with_gradient {
            return Ok((parts, None));
        }

        let mut grad = kinv_eta;
        grad.scale(2.0);
        if !self.grid_channels.is_empty() {
            grad.axpy(
                1.0,
                &eval_grid_adjoint_sum(self.cache, &cotangents, &self.grid_channels)?,
            );
        }
        if let Some(g) = offgrid_grad {
            grad.axpy(1.0, &g);
        }
        Ok((parts, Some(grad)))
    }
}

fn check_residual(r: f64, kind: &str, x: &[f64]) -> Result<()> {
    if r.is_nan() {
        return Err(Error::Numerical(format!("NaN {kind} residual at {x:?}")));
    }
    Ok(())
}

/// Loss of `field` for one setup.
pub fn loss(
    field: &NodalField,
    problem: &PdeProblem,
    grid: &Grid,
    classification: &DomainClassification,
    config: LossConfig,
    cache: &DiffMatrixCache,
) -> Result<LossParts> {
    Objective::new(problem, grid, classification, config, cache)?.loss(field)
}

/// Exact gradient of [`loss`] with respect to the nodal values.
pub fn loss_gradient(
    field: &NodalField,
    problem: &PdeProblem,
    grid: &Grid,
    classification: &DomainClassification,
    config: LossConfig,
    cache: &DiffMatrixCache,
) -> Result<DenseTensor> {
    Objective::new(problem, grid, classification, config, cache)?.gradient(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, classify_box, AxisSpec};
    use crate::interpolant::ProductKernel;
    use crate::kernel1d::gram_cholesky;

    fn poisson_like() -> PdeProblem {
        let d = 2;
        PdeProblem {
            name: "test".into(),
            interior_channels: vec![
                MultiIndex::value(d),
                MultiIndex::along(d, 0, 2).unwrap(),
                MultiIndex::along(d, 1, 2).unwrap(),
            ],
            boundary_channels: vec![MultiIndex::value(d)],
            interior: Arc::new(FnCombiner(|z: &[f64], x: &[f64], p: &mut [f64]| {
                p[0] = 3.0 * z[0] * z[0];
                p[1] = -1.0;
                p[2] = -1.0;
                -z[1] - z[2] + z[0].powi(3) - x[0]
            })),
            boundary: Arc::new(FnCombiner(|z: &[f64], _x: &[f64], p: &mut [f64]| {
                p[0] = 1.0;
                z[0] - 0.5
            })),
            ground_truth: None,
        }
    }

    #[test]
    fn rkhs_of_zero_and_scalar() {
        let grams = vec![gram_cholesky(&[0.0, 1.0], 0.5, 1e-8).unwrap()];
        let grid = build_grid(&[AxisSpec::uniform(2, 0.0, 1.0)]).unwrap();
        assert_eq!(rkhs_norm_sq(&NodalField::zeros(&grid), &grams).unwrap(), 0.0);

        let g = gram_cholesky(&[0.3], 1.0, 1e-4).unwrap();
        let mut t = DenseTensor::zeros(&[1]);
        t.as_mut_slice()[0] = 2.0;
        let mut solved = t.clone();
        kron_solve_in_place(&[g], &mut solved).unwrap();
        assert!((t.dot(&solved) - 4.0 / 1.0001).abs() < 1e-14);
    }

    #[test]
    fn zero_weights_leave_only_rkhs() {
        let grid = build_grid(&[AxisSpec::uniform(5, 0.0, 1.0), AxisSpec::uniform(4, 0.0, 1.0)]).unwrap();
        let kernel = ProductKernel::new(vec![0.3, 0.3], 1e-8).unwrap();
        let cache = DiffMatrixCache::build(&grid, &kernel).unwrap();
        let cls = classify_box(&grid);
        let problem = poisson_like();
        let field = NodalField::from_fn(&grid, |x| x[0] * x[1]);
        let parts = loss(&field, &problem, &grid, &cls, LossConfig::new(0.0, 0.0).unwrap(), &cache).unwrap();
        let rk = rkhs_norm_sq(&field, cache.grams()).unwrap();
        assert_eq!(parts.total, rk);
    }

    #[test]
    fn epsilon_shifts_total_only() {
        let grid = build_grid(&[AxisSpec::uniform(5, 0.0, 1.0), AxisSpec::uniform(4, 0.0, 1.0)]).unwrap();
        let kernel = ProductKernel::new(vec![0.3, 0.3], 1e-8).unwrap();
        let cache = DiffMatrixCache::build(&grid, &kernel).unwrap();
        let cls = classify_box(&grid);
        let problem = poisson_like();
        let field = NodalField::from_fn(&grid, |x| x[0] - x[1]);
        let base = LossConfig::new(3.0, 5.0).unwrap();
        let shifted = LossConfig {
            epsilon: 0.25,
            ..base
        };
        let a = Objective::new(&problem, &grid, &cls, base, &cache).unwrap();
        let b = Objective::new(&problem, &grid, &cls, shifted, &cache).unwrap();
        let (la, ga) = a.loss_and_gradient(&field).unwrap();
        let (lb, gb) = b.loss_and_gradient(&field).unwrap();
        assert!((lb.total - (la.total - 8.0 * 0.25 / 2.0)).abs() < 1e-12);
        assert_eq!(ga, gb);
    }

    #[test]
    fn nan_residual_is_reported() {
        let grid = build_grid(&[AxisSpec::uniform(4, 0.0, 1.0), AxisSpec::uniform(4, 0.0, 1.0)]).unwrap();
        let kernel = ProductKernel::new(vec![0.3, 0.3], 1e-8).unwrap();
        let cache = DiffMatrixCache::build(&grid, &kernel).unwrap();
        let cls = classify_box(&grid);
        let mut problem = poisson_like();
        problem.interior = Arc::new(FnCombiner(|_: &[f64], _: &[f64], _: &mut [f64]| f64::NAN));
        let err = loss(&NodalField::zeros(&grid), &problem, &grid, &cls, LossConfig::new(1.0, 1.0).unwrap(), &cache)
            .unwrap_err();
        assert!(err.to_string().contains("interior"));
    }

    #[test]
    fn partials_checker_detects_wrong_partials() {
        let wrong = FnCombiner(|z: &[f64], _: &[f64], p: &mut [f64]| {
            p[0] = z[0];
            z[0] * z[0]
        });
        assert!(partials_error(&wrong, &[1.5], &[0.0]) > 0.1);
        let right = FnCombiner(|z: &[f64], _: &[f64], p: &mut [f64]| {
            p[0] = 2.0 * z[0];
            z[0] * z[0]
        });
        assert!(partials_error(&right, &[1.5], &[0.0]) < 1e-8);
    }
}
