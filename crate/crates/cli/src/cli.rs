//! Argument parsing and dispatch.
//!
//! Settings are layered: built-in defaults, then the `--config` file, then
//! `KRONPDE_*` environment variables, then command-line flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use kronpde::{Error, Result};

use crate::commands::{expand_sweep, solve_command, sweep_command, truth_command, SweepAxes};
use crate::manifest::RunManifest;
use crate::reproduce::{reproduce, write_report, TABLE_IDS};

const OUTPUT_HELP: &str = "\
Outputs (UTF-8):
  trace.csv    iter,total_loss,rkhs,interior_mse,boundary_mse,rel_l2_error,elapsed_seconds
  summary.txt  key = value report followed by the resolved manifest
  eta.bin      nodal values: magic KRONPDE1, u32 ndim, u64 shape[ndim], u32 nparams,
               f64 params[nparams] (benchmark parameters, lengthscales, nugget),
               f64 data (row-major, last axis fastest), 32-byte SHA-256 of everything before it
  sweep.csv    benchmark,shape,lengthscales,nugget,alpha,beta,rel_l2_at_best_loss,
               rel_l2_best_over_trace,best_loss,iterations,wall_seconds,status
  <table>.csv  row,published,obtained,ratio,band,pass,note
  truth.csv    x0,...,x{d-1},u";

#[derive(Debug, Parser)]
#[command(name = "kronpde", version, about = "Kernel PDE solver on product grids", after_help = OUTPUT_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one configuration.
    Solve(Overrides),
    /// Solve the cartesian product of the sweep axes.
    Sweep(SweepArgs),
    /// Rerun a published error table at desk scale.
    Reproduce(ReproduceArgs),
    /// Write ground-truth values on a grid.
    Truth(Overrides),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML manifest.
    #[arg(long, env = "KRONPDE_CONFIG")]
    pub config: Option<PathBuf>,
    /// elliptic, elliptic-disk, poisson, allen-cahn, eikonal or burgers.
    #[arg(long, env = "KRONPDE_BENCHMARK")]
    pub benchmark: Option<String>,
    /// Burgers viscosity ν.
    #[arg(long, env = "KRONPDE_NU")]
    pub nu: Option<f64>,
    /// Allen-Cahn frequency a.
    #[arg(long, env = "KRONPDE_A")]
    pub a: Option<f64>,
    /// Eikonal viscosity ε.
    #[arg(long, env = "KRONPDE_EPS")]
    pub eps: Option<f64>,
    /// Grid shape such as 35x35.
    #[arg(long, env = "KRONPDE_GRID", value_parser = parse_shape)]
    pub grid: Option<Shape>,
    /// Lengthscale per axis; repeat the flag or separate with commas.
    #[arg(long, env = "KRONPDE_LENGTHSCALE", value_delimiter = ',')]
    pub lengthscale: Vec<f64>,
    #[arg(long, env = "KRONPDE_NUGGET")]
    pub nugget: Option<f64>,
    #[arg(long, env = "KRONPDE_ALPHA")]
    pub alpha: Option<f64>,
    #[arg(long, env = "KRONPDE_BETA")]
    pub beta: Option<f64>,
    #[arg(long, env = "KRONPDE_EPSILON")]
    pub epsilon: Option<f64>,
    #[arg(long, env = "KRONPDE_LR")]
    pub lr: Option<f64>,
    #[arg(long, env = "KRONPDE_MAX_ITERS")]
    pub max_iters: Option<usize>,
    #[arg(long, env = "KRONPDE_PATIENCE")]
    pub patience: Option<usize>,
    #[arg(long, env = "KRONPDE_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "KRONPDE_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub base: Overrides,
    /// Grid shapes, e.g. 60x80,96x50.
    #[arg(long, value_delimiter = ',', value_parser = parse_shape)]
    pub sweep_grid: Vec<Shape>,
    /// Lengthscale vectors, e.g. 0.1,0.02x0.2 (a single value applies to every axis).
    #[arg(long, value_delimiter = ',', value_parser = parse_reals)]
    pub sweep_lengthscale: Vec<Reals>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_nugget: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_beta: Vec<f64>,
    /// Refuse sweeps with more configurations than this.
    #[arg(long, default_value_t = 256)]
    pub max_configs: usize,
    #[arg(long, env = "KRONPDE_THREADS", default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    /// easy-small, hard-small, fd-comparison or fill-distance-trend.
    pub table: String,
    #[arg(long, env = "KRONPDE_OUT", default_value = "reproduce")]
    pub out: PathBuf,
    #[arg(long, env = "KRONPDE_THREADS", default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shape(pub Vec<usize>);

#[derive(Debug, Clone, PartialEq)]
pub struct Reals(pub Vec<f64>);

pub fn parse_shape(s: &str) -> std::result::Result<Shape, String> {
    s.split('x')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad grid extent {p:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Shape)
}

pub fn parse_reals(s: &str) -> std::result::Result<Reals, String> {
    s.split('x')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad number {p:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Reals)
}

impl Overrides {
    /// Loads the manifest named by `--config` (or the defaults) and layers the flags on top.
    pub fn manifest(&self) -> Result<RunManifest> {
        let mut m = match &self.config {
            Some(path) => RunManifest::load(path)?,
            None => RunManifest::default(),
        };
        self.apply(&mut m);
        Ok(m)
    }

    pub fn apply(&self, m: &mut RunManifest) {
        if let Some(b) = &self.benchmark {
            if *b != m.benchmark.name {
                m.benchmark.nu = None;
                m.benchmark.a = None;
                m.benchmark.eps = None;
            }
            m.benchmark.name = b.clone();
        }
        set(&mut m.benchmark.nu, self.nu);
        set(&mut m.benchmark.a, self.a);
        set(&mut m.benchmark.eps, self.eps);
        set(&mut m.grid.shape, self.grid.clone().map(|s| s.0));
        if !self.lengthscale.is_empty() {
            m.kernel.lengthscales = Some(self.lengthscale.clone());
        }
        set(&mut m.kernel.nugget, self.nugget);
        set(&mut m.loss.alpha, self.alpha);
        set(&mut m.loss.beta, self.beta);
        set(&mut m.loss.epsilon, self.epsilon);
        set(&mut m.optimizer.lr, self.lr);
        set(&mut m.optimizer.max_iters, self.max_iters);
        set(&mut m.optimizer.patience, self.patience);
        set(&mut m.optimizer.seed, self.seed);
        if let Some(out) = &self.out {
            m.output.dir = out.clone();
        }
    }
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

impl SweepArgs {
    /// Sweep axes with scalar lengthscales broadcast to the benchmark's dimension.
    pub fn axes(&self, ndim: usize) -> SweepAxes {
        SweepAxes {
            shapes: self.sweep_grid.iter().map(|s| s.0.clone()).collect(),
            lengthscales: self
                .sweep_lengthscale
                .iter()
                .map(|r| if r.0.len() == 1 { vec![r.0[0]; ndim] } else { r.0.clone() })
                .collect(),
            nuggets: self.sweep_nugget.clone(),
            alphas: self.sweep_alpha.clone(),
            betas: self.sweep_beta.clone(),
        }
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Solve(o) => {
            let resolved = o.manifest()?.resolve()?;
            let out = resolved.out.clone();
            let r = solve_command(resolved)?;
            let err = r
                .rel_l2_at_best_loss
                .map(|e| format!("{e:.3e}"))
                .unwrap_or_else(|| "n/a".into());
            println!(
                "{} iterations, best loss {:.6e}, rel_l2 {err}; wrote {}",
                r.iterations,
                r.best_loss.total,
                out.display()
            );
            Ok(0)
        }
        Command::Sweep(s) => {
            let template = s.base.manifest()?;
            let ndim = template.resolve()?.spec()?.lower.len();
            let configs = expand_sweep(&template, &s.axes(ndim), s.max_configs)?;
            let out = template.output.dir.clone();
            let rows = sweep_command(configs, s.threads, &out)?;
            for row in &rows {
                println!("{}", row.csv());
            }
            Ok(0)
        }
        Command::Reproduce(r) => {
            if !TABLE_IDS.contains(&r.table.as_str()) {
                return Err(Error::Config(format!(
                    "unknown table {:?}; expected one of {}",
                    r.table,
                    TABLE_IDS.join(", ")
                )));
            }
            let outcomes = reproduce(&r.table, r.threads, &r.out)?;
            print!("{}", write_report(&outcomes, &r.out, &r.table)?);
            Ok(if outcomes.iter().all(|o| o.pass) { 0 } else { 1 })
        }
        Command::Truth(o) => {
            let resolved = o.manifest()?.resolve()?;
            let n = truth_command(&resolved, &resolved.out)?;
            println!("wrote {n} values to {}", resolved.out.join("truth.csv").display());
            Ok(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let cli = Cli::try_parse_from([
            "kronpde", "solve", "--nugget", "1e-7", "--lengthscale", "0.2", "--lengthscale", "0.3",
            "--grid", "20x21",
        ])
        .unwrap();
        let Command::Solve(o) = cli.command else { panic!() };
        let mut m = RunManifest::parse("[kernel]\nnugget = 1e-3\n[loss]\nalpha = 5.0\n").unwrap();
        o.apply(&mut m);
        assert_eq!(m.kernel.nugget, Some(1e-7));
        assert_eq!(m.kernel.lengthscales, Some(vec![0.2, 0.3]));
        assert_eq!(m.grid.shape, Some(vec![20, 21]));
        assert_eq!(m.loss.alpha, Some(5.0));
    }

    #[test]
    fn shape_parser() {
        assert_eq!(parse_shape("96x50").unwrap(), Shape(vec![96, 50]));
        assert!(parse_shape("96xq").is_err());
        assert_eq!(parse_reals("0.02x0.2").unwrap(), Reals(vec![0.02, 0.2]));
    }

    #[test]
    fn scalar_sweep_lengthscale_broadcasts() {
        let cli = Cli::try_parse_from([
            "kronpde", "sweep", "--sweep-lengthscale", "0.1,0.02x0.2", "--sweep-alpha", "1,10",
        ])
        .unwrap();
        let Command::Sweep(s) = cli.command else { panic!() };
        let axes = s.axes(2);
        assert_eq!(axes.lengthscales, vec![vec![0.1, 0.1], vec![0.02, 0.2]]);
        assert_eq!(axes.alphas, vec![1.0, 10.0]);
    }
}
