//! Tuned solver settings for the benchmark runs.

/// Kernel, loss and step-size settings for one benchmark and grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub lengthscales: Vec<f64>,
    pub nugget: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lr: f64,
}

/// Default grid for a benchmark.
pub fn default_shape(benchmark: &str) -> Vec<usize> {
    match benchmark {
        "burgers" | "allen-cahn" => vec![49, 49],
        "eikonal" => vec![25, 25],
        "poisson" => vec![33, 33],
        _ => vec![35, 35],
    }
}

/// Best settings found for `benchmark` on `shape`. Every benchmark shares
/// the loss weights, nugget and step size; only the lengthscales differ.
pub fn tuned(benchmark: &str, shape: &[usize]) -> Recipe {
    let lengthscales = match (benchmark, shape) {
        ("elliptic", [18, 18]) => vec![0.2, 0.2],
        ("elliptic", [25, 25]) => vec![0.15, 0.15],
        ("eikonal", _) => vec![0.2, 0.2],
        ("burgers", _) => vec![0.05, 0.3],
        ("allen-cahn", _) => vec![0.04, 0.04],
        _ => vec![0.1, 0.1],
    };
    Recipe {
        lengthscales,
        nugget: 1e-8,
        alpha: 1e12,
        beta: 1e15,
        lr: 5e-4,
    }
}
