//! Power-law fits on log-log axes.

use serde::Serialize;

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Least-squares slope of `ln y` against `ln x`.
    pub exponent: f64,
    /// Least-squares intercept; `y ≈ exp(intercept) x^exponent`.
    pub intercept: f64,
    pub r2: f64,
    /// Median pairwise slope ± 1.57 IQR / √m over the `m` pairwise slopes.
    pub exponent_lo: f64,
    pub exponent_hi: f64,
}

impl RateFit {
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.exponent * x.ln()).exp()
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

pub fn fit_rate(pairs: &[(f64, f64)]) -> AppResult<RateFit> {
    if pairs.len() < 3 {
        return Err(AppError::config(format!("rate fit needs at least 3 points, got {}", pairs.len())));
    }
    if pairs.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0) || !x.is_finite() || !y.is_finite()) {
        return Err(AppError::Numerical(parahom_core::Error::Invalid("rate fit needs positive finite values")));
    }
    let lx: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(AppError::Numerical(parahom_core::Error::Invalid("rate fit needs distinct x values")));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - exponent * x).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let mut slopes = Vec::new();
    for i in 0..lx.len() {
        for j in i + 1..lx.len() {
            if lx[j] != lx[i] {
                slopes.push((ly[j] - ly[i]) / (lx[j] - lx[i]));
            }
        }
    }
    slopes.sort_by(f64::total_cmp);
    let med = quantile(&slopes, 0.5);
    let iqr = quantile(&slopes, 0.75) - quantile(&slopes, 0.25);
    let half = 1.57 * iqr / (slopes.len() as f64).sqrt();
    Ok(RateFit {
        x: pairs.iter().map(|p| p.0).collect(),
        y: pairs.iter().map(|p| p.1).collect(),
        exponent,
        intercept,
        r2,
        exponent_lo: med - half,
        exponent_hi: med + half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use parahom_core::rng::SplitMix64;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x| (x, 5.0 * x * x)).collect();
        let f = fit_rate(&pts).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!((f.exponent_lo - 2.0).abs() < 1e-12 && (f.exponent_hi - 2.0).abs() < 1e-12);
        assert!((f.predict(3.0) - 45.0).abs() < 1e-9);
    }

    #[test]
    fn constant_data() {
        let f = fit_rate(&[(1.0, 3.0), (2.0, 3.0), (5.0, 3.0)]).unwrap();
        assert!(f.exponent.abs() < 1e-15);
        assert_eq!(f.r2, 1.0);
    }

    #[test]
    fn noisy_square_root() {
        let mut rng = SplitMix64::new(11);
        let pts: Vec<(f64, f64)> = (0..8)
            .map(|i| {
                let x = 2f64.powi(i);
                (x, x.sqrt() * (1.0 + rng.uniform(-0.05, 0.05)))
            })
            .collect();
        let f = fit_rate(&pts).unwrap();
        assert!((0.4..=0.6).contains(&f.exponent), "{}", f.exponent);
        assert!(f.exponent_lo <= f.exponent_hi);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }
}
