//! Benchmark problems with ground truth, the finite-difference baseline and
//! error metrics.

pub mod burgers;
pub mod cache;
pub mod fd;
pub mod metrics;
pub mod recipes;
pub mod reference;

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{build_grid, classify_box_faces, classify_region, AxisSpec, DomainClassification, Face, Grid};
use crate::interpolant::MultiIndex;
use crate::objective::{FnCombiner, PdeProblem, TruthFn};
use crate::tensor::DenseTensor;

pub use burgers::{burgers_truth, BurgersTruth, DEFAULT_QUAD_NODES};
pub use cache::{read_tensor_file, write_tensor_file, TensorFile};
pub use fd::{fd_solve_problem, NewtonConfig};
pub use metrics::{relative_l2, relative_l2_values};
pub use recipes::{default_shape, tuned, Recipe};
pub use reference::{eikonal_reference, CubicGridInterpolant};

/// How a benchmark's ground truth is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthSource {
    ClosedForm,
    Quadrature { nodes: usize },
    FdReference { resolution: usize },
}

/// A published error for one grid shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub label: &'static str,
    pub shape: Vec<usize>,
    pub value: f64,
}

/// One benchmark: domain, PDE, truth and reference numbers.
#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub name: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Faces carrying boundary residuals; the others are treated as interior.
    pub boundary_faces: Vec<Face>,
    pub default_shapes: Vec<Vec<usize>>,
    pub problem: PdeProblem,
    pub truth_source: TruthSource,
    pub anchors: Vec<Anchor>,
    pub params: Vec<(&'static str, f64)>,
}

impl BenchmarkSpec {
    /// Uniform grid over the domain box.
    pub fn grid(&self, shape: &[usize]) -> Result<Grid> {
        if shape.len() != self.lower.len() {
            return Err(Error::Shape(format!(
                "{}-dimensional shape for a {}-dimensional domain",
                shape.len(),
                self.lower.len()
            )));
        }
        let specs: Vec<AxisSpec> = shape
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&m, (&a, &b))| AxisSpec::uniform(m, a, b))
            .collect();
        build_grid(&specs)
    }

    pub fn classify(&self, grid: &Grid) -> Result<DomainClassification> {
        classify_box_faces(grid, &self.boundary_faces)
    }

    pub fn anchor(&self, shape: &[usize]) -> Option<&Anchor> {
        self.anchors.iter().find(|a| a.shape == shape)
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    /// Finite-difference solution on `grid` (steady problems only).
    pub fn fd_solve(&self, grid: &Grid, newton_tol: f64, max_newton: usize) -> Result<DenseTensor> {
        fd_solve(self, grid, newton_tol, max_newton)
    }
}

/// Finite-difference Newton solve of a steady benchmark with Dirichlet data on
/// every face.
pub fn fd_solve(spec: &BenchmarkSpec, grid: &Grid, newton_tol: f64, max_newton: usize) -> Result<DenseTensor> {
    let d = spec.lower.len();
    let all = Face::all(d);
    if spec.boundary_faces.len() != all.len() || !all.iter().all(|f| spec.boundary_faces.contains(f)) {
        return Err(Error::Input(format!(
            "{} is not a steady Dirichlet problem; finite differences are not supported",
            spec.name
        )));
    }
    let config = NewtonConfig {
        tol: newton_tol,
        max_newton,
        ..NewtonConfig::default()
    };
    fd_solve_problem(&spec.problem, grid, config)
}

fn combiner<F>(f: F) -> Arc<FnCombiner<F>>
where
    F: Fn(&[f64], &[f64], &mut [f64]) -> f64 + Send + Sync,
{
    Arc::new(FnCombiner(f))
}

fn d2(axis: usize) -> MultiIndex {
    MultiIndex::along(2, axis, 2).expect("order 2 is supported")
}

fn d1(axis: usize) -> MultiIndex {
    MultiIndex::along(2, axis, 1).expect("order 1 is supported")
}

fn dirichlet(g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Arc<dyn crate::objective::Combiner> {
    combiner(move |z: &[f64], x: &[f64], p: &mut [f64]| {
        p[0] = 1.0;
        z[0] - g(x)
    })
}

fn unit_square() -> (Vec<f64>, Vec<f64>) {
    (vec![0.0, 0.0], vec![1.0, 1.0])
}

fn square_shapes(ns: &[usize]) -> Vec<Vec<usize>> {
    ns.iter().map(|&n| vec![n, n]).collect()
}

fn anchors(label: &'static str, rows: &[(usize, usize, f64)]) -> Vec<Anchor> {
    rows.iter()
        .map(|&(a, b, value)| Anchor {
            label,
            shape: vec![a, b],
            value,
        })
        .collect()
}

/// Crafted solution of the nonlinear elliptic benchmark.
pub fn elliptic_truth(x: &[f64]) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin() + 4.0 * (4.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).sin()
}

/// `f = −Δu + u³` for [`elliptic_truth`].
pub fn elliptic_forcing(x: &[f64]) -> f64 {
    let s1 = (PI * x[0]).sin() * (PI * x[1]).sin();
    let s4 = (4.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).sin();
    let u = s1 + 4.0 * s4;
    2.0 * PI * PI * s1 + 128.0 * PI * PI * s4 + u * u * u
}

fn elliptic_interior() -> Arc<dyn crate::objective::Combiner> {
    combiner(|z: &[f64], x: &[f64], p: &mut [f64]| {
        p[0] = 3.0 * z[0] * z[0];
        p[1] = -1.0;
        p[2] = -1.0;
        -z[1] - z[2] + z[0].powi(3) - elliptic_forcing(x)
    })
}

/// `−Δu + u³ = f` on the unit square with `u = 0` on the boundary.
pub fn elliptic_problem() -> BenchmarkSpec {
    let (lower, upper) = unit_square();
    BenchmarkSpec {
        name: "elliptic".into(),
        lower,
        upper,
        boundary_faces: Face::all(2),
        default_shapes: square_shapes(&[18, 25, 35, 49]),
        problem: PdeProblem {
            name: "elliptic".into(),
            interior_channels: vec![MultiIndex::value(2), d2(0), d2(1)],
            boundary_channels: vec![MultiIndex::value(2)],
            interior: elliptic_interior(),
            boundary: dirichlet(|_| 0.0),
            ground_truth: Some(Arc::new(elliptic_truth)),
        },
        truth_source: TruthSource::ClosedForm,
        anchors: [
            anchors("sks", &[(18, 18, 1.26e-2), (25, 25, 6.93e-5), (35, 35, 6.80e-6), (49, 49, 1.83e-6)]),
            anchors("fd", &[(18, 18, 3.36e-2), (25, 25, 1.78e-2), (35, 35, 9.25e-3), (49, 49, 4.78e-3)]),
        ]
        .concat(),
        params: Vec::new(),
    }
}

/// The elliptic benchmark on the disk inscribed in the unit square, with
/// Dirichlet data taken from the crafted solution.
pub fn elliptic_disk_problem() -> BenchmarkSpec {
    let mut spec = elliptic_problem();
    spec.name = "elliptic-disk".into();
    spec.problem.name = "elliptic-disk".into();
    spec.problem.boundary = dirichlet(elliptic_truth);
    spec.default_shapes = square_shapes(&[35]);
    spec.anchors = anchors("sks", &[(35, 35, 8.40e-4)]);
    spec
}

/// Inside test for the disk of radius 1/2 centred at (1/2, 1/2).
pub fn in_disk(x: &[f64]) -> bool {
    let (a, b) = (x[0] - 0.5, x[1] - 0.5);
    a * a + b * b < 0.25
}

/// `n` equally spaced points on the disk boundary.
pub fn disk_boundary(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            vec![0.5 + 0.5 * t.cos(), 0.5 + 0.5 * t.sin()]
        })
        .collect()
}

/// Virtual-grid classification for the disk: grid points inside are interior
/// sites and `samples` points on the circle carry the boundary residuals.
pub fn disk_classification(grid: &Grid, samples: usize) -> Result<DomainClassification> {
    classify_region(grid, in_disk, disk_boundary(samples))
}

/// Crafted Allen-Cahn solution with frequency `a`.
pub fn allen_cahn_truth(a: f64, x: &[f64]) -> f64 {
    let w = 2.0 * PI;
    (w * a * x[0]).sin() * (w * a * x[1]).cos() + (w * x[0]).sin() * (w * x[1]).cos()
}

/// `Δu` of [`allen_cahn_truth`].
pub fn allen_cahn_laplacian(a: f64, x: &[f64]) -> f64 {
    let w = 2.0 * PI;
    let hi = (w * a * x[0]).sin() * (w * a * x[1]).cos();
    let lo = (w * x[0]).sin() * (w * x[1]).cos();
    -8.0 * PI * PI * a * a * hi - 8.0 * PI * PI * lo
}

/// `f = Δu + u³ − u` for [`allen_cahn_truth`].
pub fn allen_cahn_forcing(a: f64, x: &[f64]) -> f64 {
    let u = allen_cahn_truth(a, x);
    allen_cahn_laplacian(a, x) + u * u * u - u
}

/// `Δu + u³ − u = f` on the unit square with Dirichlet data from the crafted
/// solution.
pub fn allen_cahn_problem(a: f64) -> Result<BenchmarkSpec> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Parameter(format!("frequency a must be positive, got {a}")));
    }
    let (lower, upper) = unit_square();
    let sks: &[(usize, usize, f64)] = if a == 15.0 {
        &[(25, 25, 6.80e-1), (35, 35, 2.1e-1), (49, 49, 5.15e-3), (70, 70, 9.20e-5), (80, 80, 8.27e-5), (200, 200, 4.44e-6)]
    } else if a == 20.0 {
        &[(25, 25, 7.07e-1), (35, 35, 6.91e-1), (49, 49, 1.81e-1), (70, 70, 9.83e-4)]
    } else {
        &[]
    };
    let fd: &[(usize, usize, f64)] = if a == 15.0 {
        &[(80, 80, 8.57e-2), (90, 90, 6.68e-2), (150, 150, 2.33e-2), (200, 200, 1.30e-2)]
    } else {
        &[]
    };
    Ok(BenchmarkSpec {
        name: "allen-cahn".into(),
        lower,
        upper,
        boundary_faces: Face::all(2),
        default_shapes: square_shapes(&[25, 35, 49, 70]),
        problem: PdeProblem {
            name: format!("allen-cahn(a={a})"),
            interior_channels: vec![MultiIndex::value(2), d2(0), d2(1)],
            boundary_channels: vec![MultiIndex::value(2)],
            interior: combiner(move |z: &[f64], x: &[f64], p: &mut [f64]| {
                p[0] = 3.0 * z[0] * z[0] - 1.0;
                p[1] = 1.0;
                p[2] = 1.0;
                z[1] + z[2] + z[0].powi(3) - z[0] - allen_cahn_forcing(a, x)
            }),
            boundary: dirichlet(move |x| allen_cahn_truth(a, x)),
            ground_truth: Some(Arc::new(move |x: &[f64]| allen_cahn_truth(a, x))),
        },
        truth_source: TruthSource::ClosedForm,
        anchors: [anchors("sks", sks), anchors("fd", fd)].concat(),
        params: vec![("a", a)],
    })
}

/// Resolution of the Eikonal reference solution.
pub const EIKONAL_REFERENCE_RESOLUTION: usize = 513;

/// `|∇u|² − εΔu = 1` on the unit square with `u = 0` on the boundary.
///
/// The returned spec has no ground truth attached; see
/// [`attach_eikonal_reference`].
pub fn eikonal_problem(eps: f64) -> Result<BenchmarkSpec> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {eps}")));
    }
    let (lower, upper) = unit_square();
    Ok(BenchmarkSpec {
        name: "eikonal".into(),
        lower,
        upper,
        boundary_faces: Face::all(2),
        default_shapes: square_shapes(&[18, 25, 35, 49]),
        problem: PdeProblem {
            name: format!("eikonal(eps={eps})"),
            interior_channels: vec![d1(0), d1(1), d2(0), d2(1)],
            boundary_channels: vec![MultiIndex::value(2)],
            interior: combiner(move |z: &[f64], _: &[f64], p: &mut [f64]| {
                p[0] = 2.0 * z[0];
                p[1] = 2.0 * z[1];
                p[2] = -eps;
                p[3] = -eps;
                z[0] * z[0] + z[1] * z[1] - 1.0 - eps * (z[2] + z[3])
            }),
            boundary: dirichlet(|_| 0.0),
            ground_truth: None,
        },
        truth_source: TruthSource::FdReference {
            resolution: EIKONAL_REFERENCE_RESOLUTION,
        },
        anchors: anchors("sks", &[(18, 18, 6.23e-4), (25, 25, 2.68e-4), (35, 35, 1.91e-4), (49, 49, 2.51e-5)]),
        params: vec![("eps", eps)],
    })
}

/// Computes (or loads from the cache) the finite-difference reference and
/// attaches its cubic interpolant as ground truth.
pub fn attach_eikonal_reference(spec: &mut BenchmarkSpec) -> Result<()> {
    let eps = spec
        .param("eps")
        .ok_or_else(|| Error::Input(format!("{} is not an Eikonal benchmark", spec.name)))?;
    let resolution = match spec.truth_source {
        TruthSource::FdReference { resolution } => resolution,
        _ => EIKONAL_REFERENCE_RESOLUTION,
    };
    let values = eikonal_reference(spec, resolution)?;
    let grid = spec.grid(&[resolution, resolution])?;
    let interp = CubicGridInterpolant::new(&grid, values)?;
    spec.problem.ground_truth = Some(Arc::new(move |x: &[f64]| interp.eval(x)));
    log::debug!("attached Eikonal reference for eps = {eps}");
    Ok(())
}

/// Viscous Burgers `u_t + u u_x − ν u_xx = 0` on `[−1, 1] × [0, 1]` (axis 0 is
/// space, axis 1 is time).
pub fn burgers_problem(nu: f64) -> Result<BenchmarkSpec> {
    burgers_problem_with_nodes(nu, DEFAULT_QUAD_NODES)
}

pub fn burgers_problem_with_nodes(nu: f64, quad_nodes: usize) -> Result<BenchmarkSpec> {
    let truth = BurgersTruth::new(nu, quad_nodes)?;
    let time = |order| MultiIndex::along(2, 1, order).expect("supported order");
    let space = |order| MultiIndex::along(2, 0, order).expect("supported order");
    let sks: &[(usize, usize, f64)] = if nu == 0.02 {
        &[(25, 25, 1.44e-2), (35, 35, 5.40e-3), (49, 49, 7.83e-4), (70, 70, 3.21e-4), (96, 50, 7.54e-5)]
    } else if nu == 0.001 {
        &[(42, 14, 1.34e-1), (60, 20, 1.11e-1), (84, 28, 8.04e-2), (120, 40, 1.89e-2), (360, 120, 3.90e-3), (600, 200, 2.28e-3)]
    } else {
        &[]
    };
    let ground: TruthFn = Arc::new(move |x: &[f64]| truth.eval(x[0], x[1]).unwrap_or(f64::NAN));
    Ok(BenchmarkSpec {
        name: "burgers".into(),
        lower: vec![-1.0, 0.0],
        upper: vec![1.0, 1.0],
        boundary_faces: vec![Face::lower(0), Face::upper(0), Face::lower(1)],
        default_shapes: vec![vec![25, 25], vec![35, 35], vec![49, 49], vec![70, 70]],
        problem: PdeProblem {
            name: format!("burgers(nu={nu})"),
            interior_channels: vec![MultiIndex::value(2), time(1), space(1), space(2)],
            boundary_channels: vec![MultiIndex::value(2)],
            interior: combiner(move |z: &[f64], _: &[f64], p: &mut [f64]| {
                p[0] = z[2];
                p[1] = 1.0;
                p[2] = z[0];
                p[3] = -nu;
                z[1] + z[0] * z[2] - nu * z[3]
            }),
            boundary: dirichlet(burgers_boundary),
            ground_truth: Some(ground),
        },
        truth_source: TruthSource::Quadrature { nodes: quad_nodes },
        anchors: anchors("sks", sks),
        params: vec![("nu", nu)],
    })
}

/// Boundary data of the Burgers benchmark: the initial profile at `t = 0`
/// and zero on the walls.
pub fn burgers_boundary(x: &[f64]) -> f64 {
    if x[1] <= 0.0 {
        -(PI * x[0]).sin()
    } else {
        0.0
    }
}

/// `−Δu = f` with `u = sin(πx) sin(πy)`, for convergence-order checks.
pub fn poisson_problem() -> BenchmarkSpec {
    let (lower, upper) = unit_square();
    let truth = |x: &[f64]| (PI * x[0]).sin() * (PI * x[1]).sin();
    BenchmarkSpec {
        name: "poisson".into(),
        lower,
        upper,
        boundary_faces: Face::all(2),
        default_shapes: square_shapes(&[17, 33, 65]),
        problem: PdeProblem {
            name: "poisson".into(),
            interior_channels: vec![d2(0), d2(1)],
            boundary_channels: vec![MultiIndex::value(2)],
            interior: combiner(move |z: &[f64], x: &[f64], p: &mut [f64]| {
                p[0] = -1.0;
                p[1] = -1.0;
                -z[0] - z[1] - 2.0 * PI * PI * truth(x)
            }),
            boundary: dirichlet(|_| 0.0),
            ground_truth: Some(Arc::new(truth)),
        },
        truth_source: TruthSource::ClosedForm,
        anchors: Vec::new(),
        params: Vec::new(),
    }
}

/// Looks a benchmark up by name. `param` is ν, `a` or ε where relevant.
pub fn benchmark_by_name(name: &str, param: Option<f64>) -> Result<BenchmarkSpec> {
    match name {
        "elliptic" => Ok(elliptic_problem()),
        "elliptic-disk" => Ok(elliptic_disk_problem()),
        "poisson" => Ok(poisson_problem()),
        "allen-cahn" => allen_cahn_problem(param.unwrap_or(15.0)),
        "eikonal" => eikonal_problem(param.unwrap_or(0.1)),
        "burgers" => burgers_problem(param.unwrap_or(0.02)),
        other => Err(Error::Config(format!(
            "unknown benchmark {other:?}; expected one of elliptic, elliptic-disk, poisson, allen-cahn, eikonal, burgers"
        ))),
    }
}
