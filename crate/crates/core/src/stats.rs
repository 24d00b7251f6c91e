//! Small descriptive-statistics helpers shared by the estimators.

use crate::fft::lagged_products;

/// Pairwise (cascade) summation; the result does not depend on how a caller
/// chunked the work, only on the element order.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 32 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    pairwise_sum(x) / x.len() as f64
}

/// Biased (1/N) variance about the sample mean.
pub fn variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    let sq: Vec<f64> = x.iter().map(|v| (v - m) * (v - m)).collect();
    pairwise_sum(&sq) / x.len() as f64
}

/// Mean-removed biased autocovariance γ(k) = (1/N) Σ_{i<N-k} x̃_i x̃_{i+k}
/// for k = 0..=max_lag.
pub fn autocovariance(x: &[f64], max_lag: usize) -> Vec<f64> {
    let m = mean(x);
    let centered: Vec<f64> = x.iter().map(|v| v - m).collect();
    let n = x.len().max(1) as f64;
    lagged_products(&centered, max_lag)
        .into_iter()
        .map(|s| s / n)
        .collect()
}

/// Standardized third and fourth moments: (skewness, excess kurtosis).
pub fn skew_kurtosis(x: &[f64]) -> (f64, f64) {
    let m = mean(x);
    let n = x.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return (0.0, 0.0);
    }
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Ordinary least squares y ≈ slope·x + intercept.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
