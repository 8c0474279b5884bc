//! Least-squares slopes in log-log scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// `(log10 x, log10 y)` pairs the line was fitted to.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute vertical distance of a point from the line (in decades).
    pub max_residual: f64,
}

/// Ordinary least squares of `log10 y` against `log10 x`.
pub fn fit_slope(data: &[(f64, f64)]) -> Result<SlopeFit> {
    if data.len() < 3 {
        return Err(Error::BadParams(format!("a slope fit needs at least 3 points, got {}", data.len())));
    }
    if let Some(&(x, y)) = data.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::BadParams(format!("slope fit needs positive finite data, got ({x:e}, {y:e})")));
    }
    let points: Vec<(f64, f64)> = data.iter().map(|(x, y)| (x.log10(), y.log10())).collect();
    let (slope, intercept) = least_squares(&points)?;
    let max_residual = points.iter().map(|(u, v)| (v - slope * u - intercept).abs()).fold(0.0, f64::max);
    Ok(SlopeFit { points, slope, intercept, max_residual })
}

/// Closed-form line through `points`; `DegenerateFit` when all abscissae coincide.
pub fn least_squares(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = points.len() as f64;
    let mu = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mu).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mu) * (p.1 - mv)).sum();
    if sxx <= 1e-24 * (1.0 + mu * mu) * n {
        return Err(Error::DegenerateFit);
    }
    let slope = sxy / sxx;
    Ok((slope, mv - slope * mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_power_law() {
        let data: Vec<(f64, f64)> = [0.1, 0.2, 0.4, 0.8].iter().map(|&x| (x, 7.0 * x * x * x)).collect();
        let fit = fit_slope(&data).unwrap();
        approx::assert_abs_diff_eq!(fit.slope, 3.0, epsilon = 1e-12);
        assert!(fit.max_residual < 1e-12);
    }

    #[test]
    fn noisy_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data: Vec<(f64, f64)> =
            (1..=8).map(|k| 2f64.powi(-k)).map(|x| (x, x * x * (1.0 + rng.gen_range(-0.05..0.05)))).collect();
        assert!((fit_slope(&data).unwrap().slope - 2.0).abs() <= 0.1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_slope(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(matches!(fit_slope(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]), Err(Error::DegenerateFit)));
    }
}
