//! `solve`, `sweep` and `truth`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use kronpde::benchmarks::{
    attach_eikonal_reference, disk_classification, in_disk, write_tensor_file, BenchmarkSpec,
    TensorFile,
};
use kronpde::grid::{fill_distance, DomainClassification, Grid};
use kronpde::optimizer::{write_trace_csv, Evaluation, StopReason};
use kronpde::{Error, LossConfig, ProductKernel, Result, RunConfig, SolveResult};
use rayon::prelude::*;

use crate::manifest::{Resolved, RunManifest};

/// Number of boundary samples on the circle for `elliptic-disk`.
pub const DISK_SAMPLES: usize = 192;

/// Everything a single solve needs, built from a resolved manifest.
pub struct Prepared {
    pub resolved: Resolved,
    pub spec: BenchmarkSpec,
    pub grid: Grid,
    pub classification: DomainClassification,
    pub kernel: ProductKernel,
    pub loss: LossConfig,
    pub run: RunConfig,
}

impl Prepared {
    pub fn new(resolved: Resolved) -> Result<Self> {
        let mut spec = resolved.spec()?;
        if spec.name == "eikonal" {
            attach_eikonal_reference(&mut spec)?;
        }
        Self::with_spec(resolved, spec)
    }

    /// As [`Prepared::new`] with an already loaded benchmark.
    pub fn with_spec(resolved: Resolved, spec: BenchmarkSpec) -> Result<Self> {
        let grid = spec.grid(&resolved.shape)?;
        let disk = spec.name == "elliptic-disk";
        let classification = if disk {
            disk_classification(&grid, DISK_SAMPLES)?
        } else {
            spec.classify(&grid)?
        };
        let evaluation = if disk {
            Evaluation::RefinedInside {
                factor: 4,
                inside: Arc::new(in_disk),
            }
        } else {
            Evaluation::Refined(4)
        };
        let kernel = ProductKernel::new(resolved.lengthscales.clone(), resolved.nugget)?;
        let loss = LossConfig {
            alpha: resolved.alpha,
            beta: resolved.beta,
            epsilon: resolved.epsilon,
        }
        .validated()?;
        let mut run = RunConfig {
            max_iters: resolved.max_iters,
            patience: resolved.patience,
            min_improvement: resolved.min_improvement,
            log_every: resolved.log_every,
            seed: resolved.seed,
            evaluation,
            ..RunConfig::default()
        };
        run.adam.lr = resolved.lr;
        Ok(Self {
            resolved,
            spec,
            grid,
            classification,
            kernel,
            loss,
            run,
        })
    }

    pub fn solve(&self) -> Result<SolveResult> {
        kronpde::run(
            &self.spec.problem,
            &self.grid,
            &self.kernel,
            &self.classification,
            self.loss,
            &self.run,
        )
    }

    /// Fill distance of the collocation set over a 4× refined sample of the domain.
    pub fn fill_distance(&self) -> Result<f64> {
        let points = self.grid.points();
        let sample = self.grid.refined(4).points();
        if self.spec.name == "elliptic-disk" {
            let mut colloc: Vec<Vec<f64>> = self
                .classification
                .interior_sites()
                .iter()
                .map(|&i| points[i].clone())
                .collect();
            colloc.extend(self.classification.boundary_points().iter().cloned());
            let inside: Vec<Vec<f64>> = sample.into_iter().filter(|x| in_disk(x)).collect();
            fill_distance(&colloc, &inside)
        } else {
            fill_distance(&points, &sample)
        }
    }
}

pub fn format_list<T: std::fmt::Display>(values: &[T], sep: &str) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(sep)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|e| format!("{e:.6e}")).unwrap_or_else(|| "n/a".into())
}

/// `key = value` report written as `summary.txt`.
pub fn summary_text(p: &Prepared, result: &SolveResult, fill: f64) -> String {
    let r = &p.resolved;
    let mut s = String::new();
    let stop = match result.stop_reason {
        StopReason::MaxIters => "max_iters",
        StopReason::Patience => "patience",
    };
    let _ = writeln!(s, "benchmark = {}", r.benchmark);
    for (k, v) in &p.spec.params {
        let _ = writeln!(s, "{k} = {v}");
    }
    let _ = writeln!(s, "shape = {}", format_list(&r.shape, "x"));
    let _ = writeln!(s, "collocation_interior = {}", p.classification.interior_count());
    let _ = writeln!(s, "collocation_boundary = {}", p.classification.boundary_count());
    let _ = writeln!(s, "fill_distance = {fill:.6e}");
    let _ = writeln!(s, "iterations = {}", result.iterations);
    let _ = writeln!(s, "stop_reason = {stop}");
    let _ = writeln!(s, "best_iter = {}", result.best_iter);
    let _ = writeln!(s, "best_loss = {:.6e}", result.best_loss.total);
    let _ = writeln!(s, "best_rkhs = {:.6e}", result.best_loss.rkhs);
    let _ = writeln!(s, "best_interior_mse = {:.6e}", result.best_loss.interior_mse);
    let _ = writeln!(s, "best_boundary_mse = {:.6e}", result.best_loss.boundary_mse);
    let _ = writeln!(s, "final_loss = {:.6e}", result.final_loss.total);
    let _ = writeln!(s, "rel_l2_at_best_loss = {}", fmt_opt(result.rel_l2_at_best_loss));
    let _ = writeln!(s, "rel_l2_best_over_trace = {}", fmt_opt(result.best_rel_l2_over_trace));
    let _ = writeln!(s, "wall_seconds = {:.3}", result.wall_seconds);
    let _ = writeln!(s, "min_improvement = {:e}", r.min_improvement);
    let _ = writeln!(s, "\n# resolved configuration\n{}", r.to_manifest().emit());
    s
}

/// Header parameters of the `eta.bin` dump: benchmark parameters, then lengthscales, then the nugget.
pub fn eta_params(p: &Prepared) -> Vec<f64> {
    let mut params: Vec<f64> = p.spec.params.iter().map(|(_, v)| *v).collect();
    params.extend(&p.resolved.lengthscales);
    params.push(p.resolved.nugget);
    params
}

/// Runs one solve and writes `trace.csv`, `summary.txt` and `eta.bin` under the output directory.
pub fn solve_command(resolved: Resolved) -> Result<SolveResult> {
    let out = resolved.out.clone();
    let p = Prepared::new(resolved)?;
    fs::create_dir_all(&out)?;
    log::info!(
        "solving {} on {:?} ({} interior, {} boundary)",
        p.spec.name,
        p.resolved.shape,
        p.classification.interior_count(),
        p.classification.boundary_count()
    );
    let result = match p.solve() {
        Ok(r) => r,
        Err(Error::Diverged { iteration, loss, trace }) => {
            write_trace_csv(&trace, fs::File::create(out.join("trace.csv"))?)?;
            return Err(Error::Diverged { iteration, loss, trace });
        }
        Err(e) => return Err(e),
    };
    write_trace_csv(&result.trace, std::io::BufWriter::new(fs::File::create(out.join("trace.csv"))?))?;
    let fill = p.fill_distance()?;
    fs::write(out.join("summary.txt"), summary_text(&p, &result, fill))?;
    write_tensor_file(
        &out.join("eta.bin"),
        &TensorFile {
            params: eta_params(&p),
            tensor: result.eta.values().clone(),
        },
    )?;
    Ok(result)
}

/// Values to sweep over; an empty axis keeps the template's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepAxes {
    pub shapes: Vec<Vec<usize>>,
    pub lengthscales: Vec<Vec<f64>>,
    pub nuggets: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

fn axis_or<T: Clone>(values: &[T], base: Option<T>) -> Vec<Option<T>> {
    if values.is_empty() {
        vec![base]
    } else {
        values.iter().cloned().map(Some).collect()
    }
}

/// Cartesian product of the axes applied to `template`, duplicates dropped.
pub fn expand_sweep(template: &RunManifest, axes: &SweepAxes, cap: usize) -> Result<Vec<Resolved>> {
    let shapes = axis_or(&axes.shapes, template.grid.shape.clone());
    let ells = axis_or(&axes.lengthscales, template.kernel.lengthscales.clone());
    let nuggets = axis_or(&axes.nuggets, template.kernel.nugget);
    let alphas = axis_or(&axes.alphas, template.loss.alpha);
    let betas = axis_or(&axes.betas, template.loss.beta);
    let total = shapes.len() * ells.len() * nuggets.len() * alphas.len() * betas.len();
    if total > cap {
        return Err(Error::Config(format!(
            "sweep has {total} configurations, above the cap of {cap}"
        )));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut dropped = 0;
    for shape in &shapes {
        for ell in &ells {
            for nugget in &nuggets {
                for alpha in &alphas {
                    for beta in &betas {
                        let mut m = template.clone();
                        m.grid.shape = shape.clone();
                        m.kernel.lengthscales = ell.clone();
                        m.kernel.nugget = *nugget;
                        m.loss.alpha = *alpha;
                        m.loss.beta = *beta;
                        let r = m.resolve()?;
                        if seen.insert(r.key()) {
                            out.push(r);
                        } else {
                            dropped += 1;
                        }
                    }
                }
            }
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} duplicate sweep configurations");
    }
    Ok(out)
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub config: Resolved,
    pub rel_l2_at_best_loss: Option<f64>,
    pub rel_l2_best_over_trace: Option<f64>,
    pub best_loss: Option<f64>,
    pub iterations: usize,
    pub wall_seconds: f64,
    pub status: String,
}

pub const SWEEP_HEADER: &str = "benchmark,shape,lengthscales,nugget,alpha,beta,rel_l2_at_best_loss,rel_l2_best_over_trace,best_loss,iterations,wall_seconds,status";

impl SweepRow {
    fn sort_key(&self) -> f64 {
        self.rel_l2_at_best_loss
            .or(self.best_loss)
            .filter(|v| v.is_finite())
            .unwrap_or(f64::INFINITY)
    }

    pub fn csv(&self) -> String {
        let c = &self.config;
        let opt = |v: Option<f64>| v.map(|e| format!("{e:e}")).unwrap_or_default();
        format!(
            "{},{},{},{:e},{:e},{:e},{},{},{},{},{:.3},{}",
            c.benchmark,
            format_list(&c.shape, "x"),
            format_list(&c.lengthscales, "x"),
            c.nugget,
            c.alpha,
            c.beta,
            opt(self.rel_l2_at_best_loss),
            opt(self.rel_l2_best_over_trace),
            opt(self.best_loss),
            self.iterations,
            self.wall_seconds,
            self.status
        )
    }
}

fn sweep_one(resolved: Resolved, spec: BenchmarkSpec) -> SweepRow {
    let outcome = Prepared::with_spec(resolved.clone(), spec).and_then(|p| p.solve());
    match outcome {
        Ok(r) => SweepRow {
            config: resolved,
            rel_l2_at_best_loss: r.rel_l2_at_best_loss,
            rel_l2_best_over_trace: r.best_rel_l2_over_trace,
            best_loss: Some(r.best_loss.total),
            iterations: r.iterations,
            wall_seconds: r.wall_seconds,
            status: "ok".into(),
        },
        Err(e) => {
            let iterations = match &e {
                Error::Diverged { iteration, .. } => *iteration,
                _ => 0,
            };
            let status = match e {
                Error::Diverged { .. } => "diverged".to_string(),
                other => format!("error: {}", other.to_string().replace(',', ";")),
            };
            SweepRow {
                config: resolved,
                rel_l2_at_best_loss: None,
                rel_l2_best_over_trace: None,
                best_loss: None,
                iterations,
                wall_seconds: 0.0,
                status,
            }
        }
    }
}

/// Solves every configuration, `threads` at a time, and writes `sweep.csv` sorted by error.
pub fn sweep_command(configs: Vec<Resolved>, threads: usize, out: &Path) -> Result<Vec<SweepRow>> {
    let Some(first) = configs.first() else {
        return Err(Error::Config("sweep is empty".into()));
    };
    let mut spec = first.spec()?;
    if spec.name == "eikonal" {
        attach_eikonal_reference(&mut spec)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    log::info!("sweeping {} configurations on {} threads", configs.len(), threads.max(1));
    let mut rows: Vec<SweepRow> =
        pool.install(|| configs.into_par_iter().map(|c| sweep_one(c, spec.clone())).collect());
    rows.sort_by(|a, b| a.sort_key().total_cmp(&b.sort_key()));
    fs::create_dir_all(out)?;
    let mut f = std::io::BufWriter::new(fs::File::create(out.join("sweep.csv"))?);
    writeln!(f, "{SWEEP_HEADER}")?;
    for row in &rows {
        writeln!(f, "{}", row.csv())?;
    }
    f.flush()?;
    Ok(rows)
}

/// Ground-truth values on a grid, one `x0,...,u` row per point.
pub fn truth_command(resolved: &Resolved, out: &Path) -> Result<usize> {
    let mut spec = resolved.spec()?;
    if spec.name == "eikonal" {
        attach_eikonal_reference(&mut spec)?;
    }
    let truth = spec
        .problem
        .ground_truth
        .clone()
        .ok_or_else(|| Error::Config(format!("{} has no ground truth", spec.name)))?;
    let grid = spec.grid(&resolved.shape)?;
    fs::create_dir_all(out)?;
    let mut f = std::io::BufWriter::new(fs::File::create(out.join("truth.csv"))?);
    let cols: Vec<String> = (0..grid.ndim()).map(|j| format!("x{j}")).collect();
    writeln!(f, "{},u", cols.join(","))?;
    let mut x = vec![0.0; grid.ndim()];
    for k in 0..grid.len() {
        grid.point_into(k, &mut x);
        writeln!(f, "{},{:.17e}", format_list(&x, ","), truth(&x))?;
    }
    f.flush()?;
    Ok(grid.len())
}
