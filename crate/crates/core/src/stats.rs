//! Sample moments with normal-approximation confidence intervals.

use crate::math::sqrt;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

/// Mean of a sample with its 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Half-width `1.96 sd / sqrt(N)`; zero for a constant sample.
    pub ci: f64,
    pub sd: f64,
    pub n: usize,
}

impl Estimate {
    pub fn lo(&self) -> f64 {
        self.mean - self.ci
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.ci
    }
}

/// Mean, unbiased standard deviation and 95% half-width.
pub fn estimate(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate {
            mean: f64::NAN,
            ci: f64::NAN,
            sd: f64::NAN,
            n,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
        sqrt(ss / (n - 1) as f64)
    } else {
        0.0
    };
    Estimate {
        mean,
        ci: Z95 * sd / sqrt(n as f64),
        sd,
        n,
    }
}

/// First and second moments of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// Estimate of `E[X]`.
    pub first: Estimate,
    /// Estimate of `E[X²]`.
    pub second: Estimate,
}

pub fn moments(xs: &[f64]) -> Moments {
    let sq: alloc::vec::Vec<f64> = xs.iter().map(|x| x * x).collect();
    Moments {
        first: estimate(xs),
        second: estimate(&sq),
    }
}

/// Weighted pool-adjacent-violators fit, non-increasing.
pub fn isotonic_decreasing(ys: &[f64], weights: &[f64]) -> alloc::vec::Vec<f64> {
    use alloc::vec::Vec;
    // blocks of (value, weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(ys.len());
    for (i, &y) in ys.iter().enumerate() {
        let w = weights.get(i).copied().unwrap_or(1.0);
        blocks.push((y, w, 1));
        while blocks.len() > 1 {
            let b = blocks[blocks.len() - 1];
            let a = blocks[blocks.len() - 2];
            if a.0 >= b.0 {
                break;
            }
            let w = a.1 + b.1;
            blocks.truncate(blocks.len() - 2);
            blocks.push(((a.0 * a.1 + b.0 * b.1) / w, w, a.2 + b.2));
        }
    }
    let mut out = Vec::with_capacity(ys.len());
    for (v, _, c) in blocks {
        out.extend(core::iter::repeat(v).take(c));
    }
    out
}
