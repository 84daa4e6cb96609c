use crate::error::{Error, Result};

/// `‖û − u*‖₂ / ‖u*‖₂` over paired samples.
pub fn relative_l2_values(candidate: &[f64], truth: &[f64]) -> Result<f64> {
    if candidate.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} candidate values against {} truth values",
            candidate.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Input("no evaluation points".into()));
    }
    let (num, den) = candidate
        .iter()
        .zip(truth)
        .fold((0.0, 0.0), |(n, d), (c, t)| (n + (c - t) * (c - t), d + t * t));
    if den == 0.0 {
        return Err(Error::Numerical("ground truth has zero norm".into()));
    }
    Ok((num / den).sqrt())
}

/// Relative L2 error of `candidate` against `truth` over `points`.
pub fn relative_l2(
    candidate: impl Fn(&[f64]) -> f64,
    truth: impl Fn(&[f64]) -> f64,
    points: &[Vec<f64>],
) -> Result<f64> {
    let c: Vec<f64> = points.iter().map(|x| candidate(x)).collect();
    let t: Vec<f64> = points.iter().map(|x| truth(x)).collect();
    relative_l2_values(&c, &t)
}
