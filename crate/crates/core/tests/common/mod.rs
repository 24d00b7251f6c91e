#![allow(dead_code)]

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// erf by its Maclaurin series; accurate to ~1e-15 for |x| ≤ 3.
pub fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term.abs() > 1e-18 * sum.abs().max(1e-300) {
        n += 1.0;
        term *= -x * x / n;
        sum += term / (2.0 * n + 1.0);
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

/// Ordinary least-squares slope of y against x.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Stationary AR(1) series x_i = ρ x_{i-1} + e_i with standard normal e.
pub fn ar1(rho: f64, n: usize, seed: u64) -> Vec<f64> {
    let e = filtnoise::noise::standard_normals(&mut filtnoise::rng::stream(seed), n);
    let mut x = vec![0.0; n];
    x[0] = e[0] / (1.0 - rho * rho).sqrt();
    for i in 1..n {
        x[i] = rho * x[i - 1] + e[i];
    }
    x
}
