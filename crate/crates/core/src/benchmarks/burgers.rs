//! Cole–Hopf reference solution of viscous Burgers with `u(x, 0) = −sin(πx)`.

use std::f64::consts::PI;

use faer::{Mat, Side};

use crate::error::{Error, Result};

pub const DEFAULT_QUAD_NODES: usize = 100;

/// Gauss–Hermite rule for `∫ e^{−w²} f(w) dw`, as (nodes, weights) with
/// nodes in decreasing order.
///
/// Nodes start from the eigenvalues of the Jacobi matrix and are polished by
/// Newton on the orthonormal recurrence; weights come from the derivative at
/// each node so that tail weights keep full relative accuracy.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    let jacobi = Mat::<f64>::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut seeds = jacobi
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermite Jacobi eigenvalues: {e:?}")))?;
    seeds.sort_by(|a, b| b.total_cmp(a));

    let nf = n as f64;
    // (p_n(z), p_n'(z)) for the orthonormal Hermite polynomials.
    let eval = |z: f64| {
        let mut p1 = PIM4;
        let mut p2 = 0.0;
        for j in 0..n {
            let p3 = p2;
            p2 = p1;
            let jf = j as f64;
            p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
        }
        (p1, (2.0 * nf).sqrt() * p2)
    };
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for mut z in seeds {
        for _ in 0..4 {
            let (p, dp) = eval(z);
            let step = p / dp;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, dp) = eval(z);
        x.push(z);
        w.push(2.0 / (dp * dp));
    }
    // Enforce exact symmetry.
    for i in 0..n / 2 {
        let z = 0.5 * (x[i] - x[n - 1 - i]);
        let wt = 0.5 * (w[i] + w[n - 1 - i]);
        (x[i], x[n - 1 - i]) = (z, -z);
        (w[i], w[n - 1 - i]) = (wt, wt);
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    if x.windows(2).any(|p| !(p[0] > p[1])) || w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Numerical(format!("Gauss–Hermite rule with {n} nodes is degenerate")));
    }
    Ok((x, w))
}

/// `u(x, t)` for viscosity `nu` via Gauss–Hermite quadrature on the
/// Cole–Hopf integrals, accumulated in the log domain.
pub fn burgers_truth(x: f64, t: f64, nu: f64, quad_nodes: usize) -> Result<f64> {
    let rule = gauss_hermite(checked_nodes(quad_nodes)?)?;
    burgers_truth_with(x, t, nu, &rule)
}

/// As [`burgers_truth`] with a precomputed rule.
pub fn burgers_truth_with(x: f64, t: f64, nu: f64, rule: &(Vec<f64>, Vec<f64>)) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Parameter(format!("time must be nonnegative, got {t}")));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::Parameter(format!("viscosity must be positive, got {nu}")));
    }
    if t == 0.0 {
        return Ok(-(PI * x).sin());
    }
    let (nodes, weights) = rule;
    let scale = (4.0 * nu * t).sqrt();
    let k = 1.0 / (2.0 * PI * nu);
    let logs: Vec<f64> = nodes
        .iter()
        .zip(weights)
        .map(|(&w, &wt)| wt.ln() - k * (PI * (x - scale * w)).cos())
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (&w, &l) in nodes.iter().zip(&logs) {
        let e = (l - top).exp();
        num += e * (PI * (x - scale * w)).sin();
        den += e;
    }
    Ok(-num / den)
}

fn checked_nodes(n: usize) -> Result<usize> {
    if n < 32 {
        return Err(Error::Parameter(format!(
            "at least 32 quadrature nodes required, got {n}"
        )));
    }
    Ok(n)
}

/// Reusable evaluator holding one quadrature rule.
#[derive(Debug, Clone)]
pub struct BurgersTruth {
    nu: f64,
    rule: (Vec<f64>, Vec<f64>),
}

impl BurgersTruth {
    pub fn new(nu: f64, quad_nodes: usize) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Parameter(format!("viscosity must be positive, got {nu}")));
        }
        Ok(Self {
            nu,
            rule: gauss_hermite(checked_nodes(quad_nodes)?)?,
        })
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        burgers_truth_with(x, t, self.nu, &self.rule)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_integrates_moments() {
        let (x, w) = gauss_hermite(40).unwrap();
        let sum: f64 = w.iter().sum();
        assert!((sum - PI.sqrt()).abs() < 1e-12);
        let second: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((second - PI.sqrt() / 2.0).abs() < 1e-12);
        let fourth: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((fourth - 3.0 * PI.sqrt() / 4.0).abs() < 1e-11);
        let cos: f64 = x.iter().zip(&w).map(|(x, w)| w * x.cos()).sum();
        assert!((cos - PI.sqrt() * (-0.25f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn large_rules_stay_ordered_and_exact() {
        for n in [200, 300, 512] {
            let (x, w) = gauss_hermite(n).unwrap();
            assert!(x.windows(2).all(|p| p[0] > p[1]));
            let sum: f64 = w.iter().sum();
            assert!((sum - PI.sqrt()).abs() < 1e-12, "{n}");
            let cos: f64 = x.iter().zip(&w).map(|(x, w)| w * (3.0 * x).cos()).sum();
            assert!((cos - PI.sqrt() * (-2.25f64).exp()).abs() < 1e-12, "{n}");
        }
    }

    #[test]
    fn initial_condition() {
        let u = burgers_truth(0.3, 0.0, 0.02, 64).unwrap();
        assert!((u + 0.809_017).abs() < 1e-6);
    }

    #[test]
    fn walls_are_zero() {
        for &t in &[0.1, 0.5, 1.0] {
            for &x in &[-1.0, 1.0] {
                assert!(burgers_truth(x, t, 0.02, 100).unwrap().abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn odd_symmetry() {
        let truth = BurgersTruth::new(0.02, 100).unwrap();
        for &(x, t) in &[(0.1, 0.3), (0.45, 0.9), (0.8, 0.05)] {
            let a = truth.eval(x, t).unwrap();
            let b = truth.eval(-x, t).unwrap();
            assert!((a + b).abs() <= 1e-8);
        }
    }

    #[test]
    fn bad_arguments() {
        assert!(matches!(burgers_truth(0.0, -0.1, 0.02, 64), Err(Error::Parameter(_))));
        assert!(matches!(burgers_truth(0.0, 0.1, 0.02, 8), Err(Error::Parameter(_))));
    }
}
