//! One-dimensional squared-exponential kernel and per-axis Gram factorization.

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// `k(x, x') = exp(-(x - x')² / (2ℓ²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeKernel {
    lengthscale: f64,
}

impl SeKernel {
    pub fn new(lengthscale: f64) -> Result<Self> {
        check_lengthscale(lengthscale)?;
        Ok(Self { lengthscale })
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn eval(&self, x: f64, x_prime: f64) -> f64 {
        se_value(x - x_prime, self.lengthscale)
    }

    /// Derivative of order `order` in the first argument.
    pub fn deriv(&self, x: f64, x_prime: f64, order: usize) -> Result<f64> {
        se_deriv(x, x_prime, self.lengthscale, order)
    }
}

fn check_lengthscale(lengthscale: f64) -> Result<()> {
    if !(lengthscale > 0.0 && lengthscale.is_finite()) {
        return Err(Error::Parameter(format!(
            "lengthscale must be positive and finite, got {lengthscale}"
        )));
    }
    Ok(())
}

#[inline]
fn se_value(diff: f64, lengthscale: f64) -> f64 {
    (-0.5 * diff * diff / (lengthscale * lengthscale)).exp()
}

/// `∂^order/∂x^order` of the SE kernel, for `order` in `0..=2`.
pub fn se_deriv(x: f64, x_prime: f64, lengthscale: f64, order: usize) -> Result<f64> {
    check_lengthscale(lengthscale)?;
    if order > 2 {
        return Err(Error::UnsupportedOrder { order });
    }
    Ok(se_deriv_unchecked(x - x_prime, lengthscale, order))
}

#[inline]
pub(crate) fn se_deriv_unchecked(diff: f64, lengthscale: f64, order: usize) -> f64 {
    let l2 = lengthscale * lengthscale;
    let k = se_value(diff, lengthscale);
    match order {
        0 => k,
        1 => -(diff / l2) * k,
        _ => (diff * diff / (l2 * l2) - 1.0 / l2) * k,
    }
}

/// Gram matrix of one grid axis, `K_j + nugget·I`, held as its Cholesky factor.
#[derive(Debug, Clone)]
pub struct AxisGram {
    locations: Vec<f64>,
    kernel: SeKernel,
    nugget: f64,
    factor: Matrix,
}

impl AxisGram {
    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn kernel(&self) -> SeKernel {
        self.kernel
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// Lower-triangular `L` with `L Lᵀ = K + nugget·I`.
    pub fn cholesky_factor(&self) -> &Matrix {
        &self.factor
    }

    /// `K + nugget·I` assembled densely.
    pub fn matrix(&self) -> Matrix {
        gram_matrix(&self.locations, self.kernel.lengthscale, self.nugget)
    }

    /// Solves `(K + nugget·I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let l = &self.factor;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= l[(i, j)] * y[j];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= l[(j, i)] * y[j];
            }
            y[i] = s / l[(i, i)];
        }
        y
    }

    /// Row vector `∂^order k(x, s) · (K + nugget·I)⁻¹`.
    pub fn weights(&self, x: f64, order: usize) -> Result<Vec<f64>> {
        if order > 2 {
            return Err(Error::UnsupportedOrder { order });
        }
        let ell = self.kernel.lengthscale;
        let phi: Vec<f64> = self
            .locations
            .iter()
            .map(|&s| se_deriv_unchecked(x - s, ell, order))
            .collect();
        // K is symmetric, so the row vector solves K w = φ.
        Ok(self.solve(&phi))
    }
}

fn gram_matrix(locations: &[f64], lengthscale: f64, nugget: f64) -> Matrix {
    let n = locations.len();
    Matrix::from_fn(n, n, |i, j| {
        let k = se_value(locations[i] - locations[j], lengthscale);
        if i == j {
            k + nugget
        } else {
            k
        }
    })
}

/// Factorizes `K + nugget·I` for one axis.
pub fn gram_cholesky(locations: &[f64], lengthscale: f64, nugget: f64) -> Result<AxisGram> {
    gram_cholesky_for_axis(0, locations, lengthscale, nugget)
}

/// As [`gram_cholesky`], naming `axis` in factorization errors.
pub fn gram_cholesky_for_axis(
    axis: usize,
    locations: &[f64],
    lengthscale: f64,
    nugget: f64,
) -> Result<AxisGram> {
    check_lengthscale(lengthscale)?;
    if !(nugget >= 0.0 && nugget.is_finite()) {
        return Err(Error::Parameter(format!(
            "nugget must be nonnegative and finite, got {nugget}"
        )));
    }
    if locations.is_empty() {
        return Err(Error::Input(format!("axis {axis} has no locations")));
    }
    if locations.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input(format!("axis {axis} has non-finite locations")));
    }
    if let Some(w) = locations.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::Input(format!(
            "axis {axis} locations must be strictly increasing, found {} followed by {}",
            w[0], w[1]
        )));
    }
    let a = gram_matrix(locations, lengthscale, nugget);
    let factor = cholesky(&a).map_err(|(pivot, value)| Error::NotPositiveDefinite {
        axis,
        nugget,
        pivot,
        value,
    })?;
    Ok(AxisGram {
        locations: locations.to_vec(),
        kernel: SeKernel { lengthscale },
        nugget,
        factor,
    })
}

/// Dense Cholesky `A = L Lᵀ`; on failure returns the offending pivot.
pub(crate) fn cholesky(a: &Matrix) -> std::result::Result<Matrix, (usize, f64)> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err((j, d));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}
