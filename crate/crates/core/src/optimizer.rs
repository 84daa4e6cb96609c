//! ADAM minimization of the objective with patience-based early stopping.

use std::fmt;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::benchmarks::metrics::relative_l2_values;
use crate::error::{Error, Result};
use crate::grid::{DomainClassification, Grid};
use crate::interpolant::{DiffMatrixCache, LatticeEvaluator, MultiIndex, NodalField, ProductKernel};
use crate::objective::{LossConfig, LossParts, Objective, PdeProblem};
use crate::tensor::DenseTensor;

/// ADAM hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected ADAM moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first_moment: DenseTensor,
    second_moment: DenseTensor,
    step_count: u64,
    hyper: AdamHyper,
}

impl AdamState {
    pub fn new(shape: &[usize], hyper: AdamHyper) -> Self {
        Self {
            first_moment: DenseTensor::zeros(shape),
            second_moment: DenseTensor::zeros(shape),
            step_count: 0,
            hyper,
        }
    }

    pub fn first_moment(&self) -> &DenseTensor {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &DenseTensor {
        &self.second_moment
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn hyper(&self) -> AdamHyper {
        self.hyper
    }

    /// One update of `eta` in place.
    pub fn step(&mut self, gradient: &DenseTensor, eta: &mut DenseTensor) -> Result<()> {
        if gradient.shape() != eta.shape() || gradient.shape() != self.first_moment.shape() {
            return Err(Error::Shape(format!(
                "gradient {:?}, parameters {:?}, moments {:?}",
                gradient.shape(),
                eta.shape(),
                self.first_moment.shape()
            )));
        }
        if let Some(k) = gradient.as_slice().iter().position(|g| g.is_nan()) {
            return Err(Error::Numerical(format!("NaN gradient entry at flat index {k}")));
        }
        let AdamHyper {
            lr,
            beta1,
            beta2,
            eps,
        } = self.hyper;
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let m = self.first_moment.as_mut_slice();
        let v = self.second_moment.as_mut_slice();
        for (((e, &g), m), v) in eta
            .as_mut_slice()
            .iter_mut()
            .zip(gradient.as_slice())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *e -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step(
    state: &AdamState,
    gradient: &DenseTensor,
    eta: &DenseTensor,
) -> Result<(AdamState, DenseTensor)> {
    let mut state = state.clone();
    let mut eta = eta.clone();
    state.step(gradient, &mut eta)?;
    Ok((state, eta))
}

/// Starting point of the optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    /// Uniform entries in `[-scale, scale]` drawn from the run seed.
    Random { scale: f64 },
}

pub type Membership = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Where the relative L2 error against the ground truth is measured.
#[derive(Clone)]
pub enum Evaluation {
    Disabled,
    /// Uniform lattice `factor` times finer than the grid per axis.
    Refined(usize),
    /// As `Refined`, keeping only lattice points inside a region.
    RefinedInside { factor: usize, inside: Membership },
}

impl fmt::Debug for Evaluation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Evaluation::Disabled => write!(f, "Disabled"),
            Evaluation::Refined(k) => write!(f, "Refined({k})"),
            Evaluation::RefinedInside { factor, .. } => write!(f, "RefinedInside({factor})"),
        }
    }
}

/// Optimizer settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub max_iters: usize,
    pub patience: usize,
    /// Relative decrease of the best loss that resets the patience counter.
    pub min_improvement: f64,
    pub log_every: usize,
    pub seed: u64,
    pub adam: AdamHyper,
    pub init: Init,
    pub evaluation: Evaluation,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_iters: 1_000_000,
            patience: 1000,
            min_improvement: 1e-9,
            log_every: 1000,
            seed: 0,
            adam: AdamHyper::default(),
            init: Init::Zeros,
            evaluation: Evaluation::Refined(4),
        }
    }
}

impl RunConfig {
    pub fn validated(self) -> Result<Self> {
        if self.max_iters == 0 || self.patience == 0 || self.log_every == 0 {
            return Err(Error::Config(
                "max_iters, patience and log_every must be positive".into(),
            ));
        }
        if !(self.min_improvement >= 0.0 && self.min_improvement.is_finite()) {
            return Err(Error::Config(format!(
                "min_improvement must be nonnegative, got {}",
                self.min_improvement
            )));
        }
        let a = self.adam;
        if !(a.lr > 0.0 && a.lr.is_finite())
            || !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2)
            || !(a.eps > 0.0)
        {
            return Err(Error::Config(format!("invalid ADAM settings {a:?}")));
        }
        if let Evaluation::Refined(0) | Evaluation::RefinedInside { factor: 0, .. } = self.evaluation {
            return Err(Error::Config("evaluation refinement must be positive".into()));
        }
        Ok(self)
    }
}

/// One logged iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub total: f64,
    pub rkhs: f64,
    pub interior_mse: f64,
    pub boundary_mse: f64,
    pub rel_l2: Option<f64>,
    pub elapsed_seconds: f64,
}

pub const TRACE_HEADER: &str =
    "iter,total_loss,rkhs,interior_mse,boundary_mse,rel_l2_error,elapsed_seconds";

/// Writes a loss trace as CSV.
pub fn write_trace_csv(trace: &[TraceRecord], mut out: impl Write) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in trace {
        let err = r.rel_l2.map(|e| format!("{e:e}")).unwrap_or_default();
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{},{}",
            r.iter, r.total, r.rkhs, r.interior_mse, r.boundary_mse, err, r.elapsed_seconds
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    Patience,
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Nodal values at the lowest loss seen.
    pub eta: NodalField,
    pub best_loss: LossParts,
    pub best_iter: usize,
    pub final_loss: LossParts,
    /// ADAM steps taken.
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub trace: Vec<TraceRecord>,
    pub wall_seconds: f64,
    /// Relative L2 error of the best-loss iterate.
    pub rel_l2_at_best_loss: Option<f64>,
    /// Smallest relative L2 error over the logged iterates.
    pub best_rel_l2_over_trace: Option<f64>,
}

/// Anything the optimizer can minimize.
pub trait LossFunction {
    fn loss_and_gradient(&self, field: &NodalField) -> Result<(LossParts, DenseTensor)>;
}

impl LossFunction for Objective<'_> {
    fn loss_and_gradient(&self, field: &NodalField) -> Result<(LossParts, DenseTensor)> {
        Objective::loss_and_gradient(self, field)
    }
}

/// Relative L2 error of the interpolant on a fixed lattice.
pub struct ErrorProbe {
    evaluator: LatticeEvaluator,
    truth: Vec<f64>,
    keep: Option<Vec<bool>>,
}

impl ErrorProbe {
    pub fn new(
        grid: &Grid,
        cache: &DiffMatrixCache,
        truth: &(dyn Fn(&[f64]) -> f64 + Send + Sync),
        evaluation: &Evaluation,
    ) -> Result<Option<Self>> {
        let (factor, inside) = match evaluation {
            Evaluation::Disabled => return Ok(None),
            Evaluation::Refined(k) => (*k, None),
            Evaluation::RefinedInside { factor, inside } => (*factor, Some(inside)),
        };
        let lattice = grid.refined(factor);
        let evaluator = LatticeEvaluator::new(cache, &lattice, &MultiIndex::value(grid.ndim()))?;
        let points = lattice.points();
        let keep = inside.map(|f| points.iter().map(|x| f(x)).collect::<Vec<bool>>());
        let truth = points.iter().map(|x| truth(x)).collect();
        Ok(Some(Self {
            evaluator,
            truth,
            keep,
        }))
    }

    pub fn rel_l2(&self, field: &NodalField) -> Result<f64> {
        let values = self.evaluator.apply(field.values())?;
        match &self.keep {
            None => relative_l2_values(values.as_slice(), &self.truth),
            Some(keep) => {
                let (c, t): (Vec<f64>, Vec<f64>) = values
                    .as_slice()
                    .iter()
                    .zip(&self.truth)
                    .zip(keep)
                    .filter(|(_, &k)| k)
                    .map(|((&c, &t), _)| (c, t))
                    .unzip();
                relative_l2_values(&c, &t)
            }
        }
    }
}

/// Builds the objective for a problem and minimizes it.
pub fn run(
    problem: &PdeProblem,
    grid: &Grid,
    kernel: &ProductKernel,
    classification: &DomainClassification,
    loss_config: LossConfig,
    run_config: &RunConfig,
) -> Result<SolveResult> {
    let cache = DiffMatrixCache::build(grid, kernel)?;
    let objective = Objective::new(problem, grid, classification, loss_config, &cache)?;
    let probe = match &problem.ground_truth {
        Some(truth) => ErrorProbe::new(grid, &cache, truth.as_ref(), &run_config.evaluation)?,
        None => None,
    };
    minimize(&objective, grid, probe.as_ref(), run_config)
}

/// ADAM on an arbitrary [`LossFunction`] over nodal values on `grid`.
pub fn minimize(
    objective: &dyn LossFunction,
    grid: &Grid,
    probe: Option<&ErrorProbe>,
    config: &RunConfig,
) -> Result<SolveResult> {
    let config = config.clone().validated()?;
    let start = Instant::now();
    let mut field = match config.init {
        Init::Zeros => NodalField::zeros(grid),
        Init::Random { scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let data = (0..grid.len()).map(|_| rng_uniform(&mut rng, scale)).collect();
            NodalField::new(grid, DenseTensor::new(grid.shape().to_vec(), data)?)?
        }
    };
    let mut adam = AdamState::new(grid.shape(), config.adam);
    let mut trace = Vec::new();
    let mut best: Option<(LossParts, NodalField, usize)> = None;
    let mut anchor = f64::INFINITY;
    let mut stale = 0usize;
    let mut initial_loss = None;
    let mut stop_reason = StopReason::MaxIters;
    let mut iter = 0usize;
    let final_loss = loop {
        let (parts, grad) = objective.loss_and_gradient(&field)?;
        let initial = *initial_loss.get_or_insert(parts.total.abs());
        let log_now = iter % config.log_every == 0;
        if !parts.total.is_finite() || parts.total > divergence_limit(initial) {
            trace.push(record(iter, &parts, None, &start));
            return Err(Error::Diverged {
                iteration: iter,
                loss: parts.total,
                trace,
            });
        }
        if best.as_ref().map_or(true, |(b, _, _)| parts.total < b.total) {
            best = Some((parts, field.clone(), iter));
        }
        if anchor.is_infinite() || parts.total < anchor - config.min_improvement * anchor.abs() {
            anchor = parts.total;
            stale = 0;
        } else {
            stale += 1;
        }
        let stop = if stale >= config.patience {
            stop_reason = StopReason::Patience;
            true
        } else {
            iter == config.max_iters
        };
        if log_now || stop {
            let err = probe.map(|p| p.rel_l2(&field)).transpose()?;
            trace.push(record(iter, &parts, err, &start));
        }
        if stop {
            break parts;
        }
        adam.step(&grad, field.values_mut())?;
        iter += 1;
    };
    let (best_loss, eta, best_iter) = best.expect("at least one evaluation");
    let rel_l2_at_best_loss = probe.map(|p| p.rel_l2(&eta)).transpose()?;
    let best_rel_l2_over_trace = trace
        .iter()
        .filter_map(|r| r.rel_l2)
        .chain(rel_l2_at_best_loss)
        .reduce(f64::min);
    log::info!(
        "stopped after {iter} steps ({stop_reason:?}); best loss {:e} at step {best_iter}",
        best_loss.total
    );
    Ok(SolveResult {
        eta,
        best_loss,
        best_iter,
        final_loss,
        iterations: iter,
        stop_reason,
        trace,
        wall_seconds: start.elapsed().as_secs_f64(),
        rel_l2_at_best_loss,
        best_rel_l2_over_trace,
    })
}

fn rng_uniform(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    rng.gen_range(-scale..=scale)
}

fn divergence_limit(initial: f64) -> f64 {
    1e12_f64.max(1e6 * initial)
}

fn record(iter: usize, parts: &LossParts, rel_l2: Option<f64>, start: &Instant) -> TraceRecord {
    TraceRecord {
        iter,
        total: parts.total,
        rkhs: parts.rkhs,
        interior_mse: parts.interior_mse,
        boundary_mse: parts.boundary_mse,
        rel_l2,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisSpec};

    fn tensor(values: &[f64]) -> DenseTensor {
        DenseTensor::new(vec![values.len()], values.to_vec()).unwrap()
    }

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        let state = AdamState::new(&[3], AdamHyper::default());
        let g = tensor(&[2.0, -5.0, 0.3]);
        let (next, eta) = adam_step(&state, &g, &tensor(&[0.0; 3])).unwrap();
        assert_eq!(next.step_count(), 1);
        for (e, gi) in eta.as_slice().iter().zip(g.as_slice()) {
            let expected = -1e-3 * gi.signum();
            assert!(((e - expected) / expected).abs() <= 1e-3);
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let state = AdamState::new(&[2], AdamHyper::default());
        let eta = tensor(&[0.5, -1.5]);
        let (_, out) = adam_step(&state, &tensor(&[0.0, 0.0]), &eta).unwrap();
        assert_eq!(out, eta);
    }

    #[test]
    fn nan_gradient_rejected() {
        let mut state = AdamState::new(&[2], AdamHyper::default());
        let mut eta = tensor(&[0.0, 0.0]);
        let err = state.step(&tensor(&[f64::NAN, 0.0]), &mut eta).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn quadratic_converges() {
        let c = tensor(&[1.0, -2.0, 0.5, 3.0]);
        let hyper = AdamHyper {
            lr: 0.05,
            ..AdamHyper::default()
        };
        let mut state = AdamState::new(&[4], hyper);
        let mut eta = DenseTensor::zeros(&[4]);
        for _ in 0..2000 {
            let mut g = eta.clone();
            g.axpy(-1.0, &c);
            g.scale(2.0);
            state.step(&g, &mut eta).unwrap();
        }
        let mut diff = eta.clone();
        diff.axpy(-1.0, &c);
        assert!(diff.norm() <= 1e-3 * c.norm(), "{}", diff.norm());
    }

    struct Constant;

    impl LossFunction for Constant {
        fn loss_and_gradient(&self, field: &NodalField) -> Result<(LossParts, DenseTensor)> {
            let parts = LossParts {
                total: 1.0,
                rkhs: 1.0,
                interior_mse: 0.0,
                boundary_mse: 0.0,
            };
            Ok((parts, DenseTensor::zeros(field.shape())))
        }
    }

    #[test]
    fn constant_loss_stops_after_patience() {
        let grid = build_grid(&[AxisSpec::uniform(3, 0.0, 1.0)]).unwrap();
        let config = RunConfig {
            patience: 37,
            max_iters: 10_000,
            log_every: 10,
            ..RunConfig::default()
        };
        let out = minimize(&Constant, &grid, None, &config).unwrap();
        assert_eq!(out.iterations, 37);
        assert_eq!(out.stop_reason, StopReason::Patience);
        assert_eq!(out.best_iter, 0);
        assert_eq!(out.trace.last().unwrap().iter, 37);
    }

    struct Quadratic(DenseTensor);

    impl LossFunction for Quadratic {
        fn loss_and_gradient(&self, field: &NodalField) -> Result<(LossParts, DenseTensor)> {
            let mut g = field.values().clone();
            g.axpy(-1.0, &self.0);
            let total = g.dot(&g);
            g.scale(2.0);
            let parts = LossParts {
                total,
                rkhs: total,
                interior_mse: 0.0,
                boundary_mse: 0.0,
            };
            Ok((parts, g))
        }
    }

    #[test]
    fn best_loss_is_trace_minimum() {
        let grid = build_grid(&[AxisSpec::uniform(4, 0.0, 1.0)]).unwrap();
        let target = Quadratic(tensor(&[1.0, 2.0, 3.0, 4.0]));
        let config = RunConfig {
            max_iters: 500,
            log_every: 1,
            adam: AdamHyper {
                lr: 0.3,
                ..AdamHyper::default()
            },
            ..RunConfig::default()
        };
        let out = minimize(&target, &grid, None, &config).unwrap();
        let trace_min = out.trace.iter().map(|r| r.total).fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_loss.total, trace_min);
        assert!(out.best_loss.total <= out.final_loss.total);
        assert_eq!(out.iterations, 500);
    }

    struct Exploding;

    impl LossFunction for Exploding {
        fn loss_and_gradient(&self, field: &NodalField) -> Result<(LossParts, DenseTensor)> {
            let total = 1.0 + 1e20 * field.values().norm();
            let parts = LossParts {
                total,
                rkhs: total,
                interior_mse: 0.0,
                boundary_mse: 0.0,
            };
            Ok((parts, DenseTensor::filled(field.shape(), -1.0)))
        }
    }

    #[test]
    fn divergence_carries_trace() {
        let grid = build_grid(&[AxisSpec::uniform(2, 0.0, 1.0)]).unwrap();
        let err = minimize(&Exploding, &grid, None, &RunConfig::default()).unwrap_err();
        match err {
            Error::Diverged { iteration, trace, .. } => {
                assert_eq!(iteration, 1);
                assert!(!trace.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trace_csv_has_documented_columns() {
        let trace = vec![TraceRecord {
            iter: 0,
            total: 2.0,
            rkhs: 1.0,
            interior_mse: 0.5,
            boundary_mse: 0.25,
            rel_l2: None,
            elapsed_seconds: 0.0,
        }];
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_HEADER);
        assert_eq!(lines.next().unwrap().split(',').count(), 7);
    }

    #[test]
    fn invalid_config_rejected() {
        let config = RunConfig {
            patience: 0,
            ..RunConfig::default()
        };
        assert!(config.validated().is_err());
    }
}
