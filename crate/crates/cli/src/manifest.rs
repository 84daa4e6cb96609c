//! Run manifests: a TOML file with one section per concern.
//!
//! ```toml
//! [benchmark]
//! name = "elliptic"      # elliptic | elliptic-disk | allen-cahn | eikonal | burgers | poisson
//! # nu = 0.02            # burgers viscosity
//! # a = 15.0             # allen-cahn frequency
//! # eps = 0.1            # eikonal viscosity
//!
//! [grid]
//! shape = [35, 35]
//!
//! [kernel]
//! lengthscales = [0.1, 0.1]
//! nugget = 1e-8
//!
//! [loss]
//! alpha = 1e12
//! beta = 1e15
//! epsilon = 0.0
//!
//! [optimizer]
//! lr = 5e-4
//! max_iters = 1000000
//! patience = 1000
//! min_improvement = 1e-9
//! log_every = 1000
//! seed = 0
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Missing fields take the benchmark's tuned defaults (see [`defaults_for`]).

use std::path::PathBuf;

use kronpde::benchmarks::{benchmark_by_name, default_shape, tuned, BenchmarkSpec, Recipe};
use kronpde::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default)]
    pub benchmark: BenchmarkSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self {
            name: "elliptic".into(),
            nu: None,
            a: None,
            eps: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengthscales: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nugget: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_improvement: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            benchmark: BenchmarkSection::default(),
            grid: GridSection::default(),
            kernel: KernelSection::default(),
            loss: LossSection::default(),
            optimizer: OptimizerSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// Tuned settings for `benchmark` on `shape`, or on its default grid.
pub fn defaults_for(benchmark: &str, shape: Option<&[usize]>) -> (Vec<usize>, Recipe) {
    let shape = shape.map_or_else(|| default_shape(benchmark), <[usize]>::to_vec);
    let recipe = tuned(benchmark, &shape);
    (shape, recipe)
}

/// A manifest with every default filled in and validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub benchmark: String,
    pub param: Option<f64>,
    pub shape: Vec<usize>,
    pub lengthscales: Vec<f64>,
    pub nugget: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub lr: f64,
    pub max_iters: usize,
    pub patience: usize,
    pub min_improvement: f64,
    pub log_every: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl RunManifest {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("manifest is always serializable")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let name = self.benchmark.name.clone();
        let (shape, d) = defaults_for(&name, self.grid.shape.as_deref());
        let param = match name.as_str() {
            "burgers" => self.benchmark.nu,
            "allen-cahn" => self.benchmark.a,
            "eikonal" => self.benchmark.eps,
            _ => None,
        };
        let r = Resolved {
            benchmark: name,
            param,
            shape,
            lengthscales: self.kernel.lengthscales.clone().unwrap_or(d.lengthscales),
            nugget: self.kernel.nugget.unwrap_or(d.nugget),
            alpha: self.loss.alpha.unwrap_or(d.alpha),
            beta: self.loss.beta.unwrap_or(d.beta),
            epsilon: self.loss.epsilon.unwrap_or(0.0),
            lr: self.optimizer.lr.unwrap_or(d.lr),
            max_iters: self.optimizer.max_iters.unwrap_or(1_000_000),
            patience: self.optimizer.patience.unwrap_or(1000),
            min_improvement: self.optimizer.min_improvement.unwrap_or(1e-9),
            log_every: self.optimizer.log_every.unwrap_or(1000),
            seed: self.optimizer.seed.unwrap_or(0),
            out: self.output.dir.clone(),
        };
        r.validate()?;
        Ok(r)
    }
}

fn field_error(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{path}: {msg}"))
}

impl Resolved {
    pub fn validate(&self) -> Result<()> {
        let spec = self.spec()?;
        let d = spec.lower.len();
        if self.shape.len() != d {
            return Err(field_error("grid.shape", format!("expected {d} extents, got {:?}", self.shape)));
        }
        if let Some(m) = self.shape.iter().find(|&&m| m < 3) {
            return Err(field_error("grid.shape", format!("every extent must be at least 3, got {m}")));
        }
        if self.lengthscales.len() != d {
            return Err(field_error(
                "kernel.lengthscales",
                format!("expected {d} values, got {}", self.lengthscales.len()),
            ));
        }
        for (j, l) in self.lengthscales.iter().enumerate() {
            if !(*l > 0.0 && l.is_finite()) {
                return Err(field_error(
                    &format!("kernel.lengthscales[{j}]"),
                    format!("must be positive, got {l}"),
                ));
            }
        }
        let nonneg = [
            ("kernel.nugget", self.nugget),
            ("loss.alpha", self.alpha),
            ("loss.beta", self.beta),
            ("loss.epsilon", self.epsilon),
            ("optimizer.min_improvement", self.min_improvement),
        ];
        for (path, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(field_error(path, format!("must be finite and nonnegative, got {v}")));
            }
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(field_error("optimizer.lr", format!("must be positive, got {}", self.lr)));
        }
        for (path, v) in [
            ("optimizer.max_iters", self.max_iters),
            ("optimizer.patience", self.patience),
            ("optimizer.log_every", self.log_every),
        ] {
            if v == 0 {
                return Err(field_error(path, "must be positive"));
            }
        }
        Ok(())
    }

    /// Identity used to deduplicate sweep configurations.
    pub fn key(&self) -> String {
        format!("{:?}", self.to_manifest())
    }

    /// Manifest with every field explicit.
    pub fn to_manifest(&self) -> RunManifest {
        let mut benchmark = BenchmarkSection {
            name: self.benchmark.clone(),
            ..BenchmarkSection::default()
        };
        match self.benchmark.as_str() {
            "burgers" => benchmark.nu = self.param,
            "allen-cahn" => benchmark.a = self.param,
            "eikonal" => benchmark.eps = self.param,
            _ => {}
        }
        RunManifest {
            benchmark,
            grid: GridSection {
                shape: Some(self.shape.clone()),
            },
            kernel: KernelSection {
                lengthscales: Some(self.lengthscales.clone()),
                nugget: Some(self.nugget),
            },
            loss: LossSection {
                alpha: Some(self.alpha),
                beta: Some(self.beta),
                epsilon: Some(self.epsilon),
            },
            optimizer: OptimizerSection {
                lr: Some(self.lr),
                max_iters: Some(self.max_iters),
                patience: Some(self.patience),
                min_improvement: Some(self.min_improvement),
                log_every: Some(self.log_every),
                seed: Some(self.seed),
            },
            output: OutputSection {
                dir: self.out.clone(),
            },
        }
    }

    pub fn spec(&self) -> Result<BenchmarkSpec> {
        benchmark_by_name(&self.benchmark, self.param)
            .map_err(|e| field_error("benchmark", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_takes_defaults() {
        let m = RunManifest::parse("").unwrap();
        assert_eq!(m, RunManifest::default());
        let r = m.resolve().unwrap();
        assert_eq!(r.shape, vec![35, 35]);
        assert_eq!(r.epsilon, 0.0);
        assert_eq!(r.patience, 1000);
    }

    #[test]
    fn negative_lengthscale_names_field() {
        let m = RunManifest::parse("[kernel]\nlengthscales = [0.1, -0.2]\n").unwrap();
        let err = m.resolve().unwrap_err().to_string();
        assert!(err.contains("kernel.lengthscales[1]"), "{err}");
    }

    #[test]
    fn unknown_field_rejected() {
        let err = RunManifest::parse("[loss]\ngamma = 1.0\n").unwrap_err().to_string();
        assert!(err.contains("gamma"), "{err}");
    }

    #[test]
    fn benchmark_parameter_routed() {
        let m = RunManifest::parse("[benchmark]\nname = \"burgers\"\nnu = 0.001\n").unwrap();
        let r = m.resolve().unwrap();
        assert_eq!(r.param, Some(0.001));
        assert_eq!(r.spec().unwrap().param("nu"), Some(0.001));
    }
}
