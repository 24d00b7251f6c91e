//! Statistics of stationary scalar series: autocorrelation R(Δ), increment
//! variance V(Δ) = 1 - R(Δ), relaxation time τ = 2∫R, Bartlett bands,
//! cross-correlations, smoothness fits and Gaussianity checks.

use crate::error::{Error, Result};
use crate::kernels::{matern_covariance, Smoothness};
use crate::noise::SamplePath;
use crate::nse2d::ModeSeries;
use crate::quad::trapezoid;
use crate::stats;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

/// A uniformly sampled real series.
pub trait SampledSeries {
    fn values(&self) -> &[f64];
    fn step(&self) -> f64;
}

impl SampledSeries for ModeSeries {
    fn values(&self) -> &[f64] {
        &self.samples
    }
    fn step(&self) -> f64 {
        self.dt_sample
    }
}

impl SampledSeries for SamplePath {
    fn values(&self) -> &[f64] {
        &self.values
    }
    fn step(&self) -> f64 {
        self.spec.dt
    }
}

/// Plain slice with an explicit step.
pub struct Samples<'a> {
    pub values: &'a [f64],
    pub step: f64,
}

impl SampledSeries for Samples<'_> {
    fn values(&self) -> &[f64] {
        self.values
    }
    fn step(&self) -> f64 {
        self.step
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AutocorrEstimate {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub n_samples: usize,
    pub ci_halfwidths: Option<Vec<f64>>,
}

impl AutocorrEstimate {
    /// Wraps known correlation values on a uniform lag grid (for oracles).
    pub fn from_values(values: Vec<f64>, step: f64, n_samples: usize) -> Self {
        let lags = (0..values.len()).map(|k| k as f64 * step).collect();
        Self { lags, values, n_samples, ci_halfwidths: None }
    }

    pub fn step(&self) -> f64 {
        self.lags.get(1).copied().unwrap_or(0.0)
    }

    /// Attaches Bartlett half-widths at the given level.
    pub fn with_bartlett(mut self, level: f64) -> Result<Self> {
        self.ci_halfwidths = Some(bartlett_ci(&self, level)?);
        Ok(self)
    }
}

/// Mean-removed, biased (1/N) estimator of R(Δ), normalized by lag 0, for
/// lags 0..=max_lag (time units, rounded down to whole steps).
pub fn autocorrelation(series: &impl SampledSeries, max_lag: f64) -> Result<AutocorrEstimate> {
    let x = series.values();
    let dt = series.step();
    if !(dt > 0.0) || !(max_lag >= 0.0) {
        return Err(Error::Domain(format!("invalid step {dt} or max lag {max_lag}")));
    }
    let k = (max_lag / dt + 1e-9).floor() as usize;
    if (x.len() as f64) < 10.0 * k as f64 || x.len() < 2 {
        return Err(Error::Domain(format!(
            "series of {} samples is shorter than 10 × max lag ({k} steps)",
            x.len()
        )));
    }
    let g = stats::autocovariance(x, k);
    if !(g[0] > 0.0) {
        return Err(Error::Domain("series has zero variance".into()));
    }
    let values: Vec<f64> = g.iter().map(|v| v / g[0]).collect();
    Ok(AutocorrEstimate::from_values(values, dt, x.len()))
}

/// V(Δ) = 1 - R(Δ) per lag.
pub fn increment_variance(est: &AutocorrEstimate) -> Vec<(f64, f64)> {
    est.lags
        .iter()
        .zip(&est.values)
        .map(|(&l, &r)| (l, 1.0 - r))
        .collect()
}

/// Least-squares slope of log V against log Δ over the leading lags with
/// 0 < V < `v_max`. At least `min_points` lags are used; if fewer lags lie
/// below the threshold the first `min_points` positive lags are taken.
pub fn initial_slope(v: &[(f64, f64)], v_max: f64, min_points: usize) -> Result<f64> {
    let positive: Vec<(f64, f64)> = v.iter().copied().filter(|&(l, _)| l > 0.0).collect();
    let mut pts: Vec<(f64, f64)> = positive
        .iter()
        .copied()
        .take_while(|&(_, val)| val < v_max)
        .filter(|&(_, val)| val > 0.0)
        .collect();
    if pts.len() < min_points {
        pts = positive
            .iter()
            .copied()
            .filter(|&(_, val)| val > 0.0)
            .take(min_points)
            .collect();
    }
    if pts.len() < 2 {
        return Err(Error::FitUndefined("fewer than two lags with V > 0".into()));
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    Ok(stats::linear_fit(&lx, &ly).0)
}

pub const DEFAULT_SLOPE_THRESHOLD: f64 = 0.1;
pub const DEFAULT_SLOPE_POINTS: usize = 4;

/// Where the τ integral is truncated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TruncationRule {
    /// First lag at which |R| falls inside the Bartlett zero band.
    BartlettBand,
    /// First lag at which R ≤ 0.
    FirstZero,
    /// Fixed lag in time units.
    FixedLag(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxationEstimate {
    pub tau: f64,
    pub truncation_lag: f64,
    pub rule: TruncationRule,
}

/// τ = 2 ∫₀^{Δ*} R by the trapezoid rule.
pub fn relaxation_time(est: &AutocorrEstimate, rule: TruncationRule) -> Result<RelaxationEstimate> {
    let dt = est.step();
    let r = &est.values;
    let stop = match rule {
        TruncationRule::BartlettBand => {
            let ci = est.ci_halfwidths.as_ref().ok_or_else(|| {
                Error::Precondition("relaxation time needs Bartlett half-widths".into())
            })?;
            (1..r.len()).find(|&k| r[k].abs() <= ci[k])
        }
        TruncationRule::FirstZero => (1..r.len()).find(|&k| r[k] <= 0.0),
        TruncationRule::FixedLag(l) => {
            let k = (l / dt).round() as usize;
            (k < r.len()).then_some(k)
        }
    };
    match stop {
        Some(k) => Ok(RelaxationEstimate {
            tau: 2.0 * trapezoid(&r[..=k], dt),
            truncation_lag: k as f64 * dt,
            rule,
        }),
        None => Err(Error::IntegrationIncomplete {
            partial: 2.0 * trapezoid(r, dt),
        }),
    }
}

/// Bartlett half-widths z_{(1+ℓ)/2} √((1 + 2 Σ_{j<n} R_j²)/N) per lag n.
pub fn bartlett_ci(est: &AutocorrEstimate, level: f64) -> Result<Vec<f64>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let z = Normal::standard().inverse_cdf(0.5 * (1.0 + level));
    let n = est.n_samples as f64;
    let mut acc = 1.0;
    let mut out = Vec::with_capacity(est.values.len());
    for (k, r) in est.values.iter().enumerate() {
        out.push(z * (acc / n).sqrt());
        if k >= 1 {
            acc += 2.0 * r * r;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationMatrix {
    pub values: Vec<Vec<f64>>,
    /// Pairs involving a zero-variance series (entries set to 0).
    pub flagged: Vec<(usize, usize)>,
}

impl CorrelationMatrix {
    pub fn max_off_diagonal(&self) -> f64 {
        let mut m: f64 = 0.0;
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i != j {
                    m = m.max(v.abs());
                }
            }
        }
        m
    }
}

/// Pearson correlations between contemporaneous samples.
pub fn cross_correlation(series: &[&[f64]]) -> Result<CorrelationMatrix> {
    let len = series.first().map(|s| s.len()).unwrap_or(0);
    if series.iter().any(|s| s.len() != len) {
        return Err(Error::Domain("series must have equal lengths".into()));
    }
    let centered: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            let m = stats::mean(s);
            s.iter().map(|v| v - m).collect()
        })
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let k = series.len();
    let mut values = vec![vec![0.0; k]; k];
    let mut flagged = Vec::new();
    for i in 0..k {
        values[i][i] = 1.0;
        for j in (i + 1)..k {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                flagged.push((i, j));
                continue;
            }
            let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            let c = dot / (norms[i] * norms[j]);
            values[i][j] = c;
            values[j][i] = c;
        }
    }
    Ok(CorrelationMatrix { values, flagged })
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelFit {
    pub beta_star: Smoothness,
    pub objective: f64,
    pub grid: Vec<Smoothness>,
    pub objectives: Vec<f64>,
}

/// Reliability cutoff: only lags with R above this value enter the fit.
pub const FIT_THRESHOLD: f64 = 0.1;

/// Minimizes Σ_{R(Δ) > 0.1} (R(Δ) - C_β(Δ/τ))² over the grid; ties go to
/// the larger β.
pub fn fit_beta(est: &AutocorrEstimate, tau: &RelaxationEstimate, grid: &[Smoothness]) -> Result<KernelFit> {
    if grid.is_empty() {
        return Err(Error::Domain("empty smoothness grid".into()));
    }
    let pts: Vec<(f64, f64)> = est
        .lags
        .iter()
        .zip(&est.values)
        .take_while(|&(_, &r)| r > FIT_THRESHOLD)
        .map(|(&l, &r)| (l / tau.tau, r))
        .collect();
    if pts.is_empty() {
        return Err(Error::FitUndefined(format!("no lags with R > {FIT_THRESHOLD}")));
    }
    let objectives: Vec<f64> = grid
        .iter()
        .map(|&b| {
            let c = matern_covariance(b)?;
            Ok(pts.iter().map(|&(u, r)| (r - c.evaluate(u)).powi(2)).sum())
        })
        .collect::<Result<_>>()?;
    let mut best: Option<usize> = None;
    for (i, &obj) in objectives.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(j) => {
                let tie = (obj - objectives[j]).abs() <= 1e-12 * objectives[j].max(1e-300);
                if obj < objectives[j] && !tie
                    || tie && grid[i].sort_key() > grid[j].sort_key()
                {
                    Some(i)
                } else {
                    Some(j)
                }
            }
        };
    }
    let b = best.expect("grid is nonempty");
    Ok(KernelFit {
        beta_star: grid[b],
        objective: objectives[b],
        grid: grid.to_vec(),
        objectives,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussianityReport {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Kolmogorov–Smirnov distance to N(mean, σ̂²).
    pub ks_statistic: f64,
}

pub fn gaussianity_check(series: &[f64]) -> Result<GaussianityReport> {
    if series.len() < 10_000 {
        return Err(Error::Domain(format!(
            "gaussianity check needs at least 10^4 samples, got {}",
            series.len()
        )));
    }
    let (skewness, excess_kurtosis) = stats::skew_kurtosis(series);
    let m = stats::mean(series);
    let sd = stats::variance(series).sqrt();
    let ks_statistic = if sd > 0.0 {
        let mut z: Vec<f64> = series.iter().map(|v| (v - m) / sd).collect();
        z.sort_by(f64::total_cmp);
        let normal = Normal::standard();
        let n = z.len() as f64;
        z.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = normal.cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    } else {
        1.0
    };
    Ok(GaussianityReport {
        skewness,
        excess_kurtosis,
        ks_statistic,
    })
}

/// Everything reported for one series.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesDiagnostics {
    pub mode: Option<(i64, i64)>,
    pub step: f64,
    pub max_lag: f64,
    pub max_lag_rule: &'static str,
    pub lags: Vec<f64>,
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    pub ci: Vec<f64>,
    pub tau: Option<f64>,
    pub truncation_lag: Option<f64>,
    pub v_initial_slope: Option<f64>,
    pub beta_star: Option<String>,
    pub fit_objective: Option<f64>,
    pub gaussianity: Option<GaussianityReport>,
}

/// Settings of [`analyze`].
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub level: f64,
    /// Maximum lag in units of the current τ estimate.
    pub lag_factor: f64,
    pub refinements: usize,
    pub slope_threshold: f64,
    pub slope_points: usize,
    pub grid: Vec<Smoothness>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            level: 0.95,
            lag_factor: 50.0,
            refinements: 3,
            slope_threshold: DEFAULT_SLOPE_THRESHOLD,
            slope_points: DEFAULT_SLOPE_POINTS,
            grid: Smoothness::default_grid(),
        }
    }
}

/// Full diagnostics with an iteratively refined maximum lag: start from a
/// tenth of the record, then use `lag_factor` × τ̂ (capped at a tenth of the
/// record) until τ̂ stabilizes.
pub fn analyze(series: &impl SampledSeries, mode: Option<(i64, i64)>, opts: &AnalysisOptions) -> Result<SeriesDiagnostics> {
    let dt = series.step();
    let cap = series.values().len() as f64 * dt / 10.0;
    let mut max_lag = cap;
    let mut est = autocorrelation(series, max_lag)?.with_bartlett(opts.level)?;
    let mut tau = relaxation_time(&est, TruncationRule::BartlettBand).ok();
    for _ in 0..opts.refinements {
        let Some(t) = &tau else { break };
        let next = (opts.lag_factor * t.tau).clamp(dt * 8.0, cap);
        if (next - max_lag).abs() < dt {
            break;
        }
        max_lag = next;
        est = autocorrelation(series, max_lag)?.with_bartlett(opts.level)?;
        tau = relaxation_time(&est, TruncationRule::BartlettBand).ok();
    }
    let v = increment_variance(&est);
    let slope = initial_slope(&v, opts.slope_threshold, opts.slope_points).ok();
    let fit = tau
        .as_ref()
        .and_then(|t| fit_beta(&est, t, &opts.grid).ok());
    let gaussianity = gaussianity_check(series.values()).ok();
    Ok(SeriesDiagnostics {
        mode,
        step: dt,
        max_lag,
        max_lag_rule: "lag_factor x tau, refined",
        lags: est.lags.clone(),
        r: est.values.clone(),
        v: v.iter().map(|p| p.1).collect(),
        ci: est.ci_halfwidths.clone().unwrap_or_default(),
        tau: tau.as_ref().map(|t| t.tau),
        truncation_lag: tau.as_ref().map(|t| t.truncation_lag),
        v_initial_slope: slope,
        beta_star: fit.as_ref().map(|f| f.beta_star.to_string()),
        fit_objective: fit.as_ref().map(|f| f.objective),
        gaussianity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(f: impl Fn(f64) -> f64, step: f64, lags: usize) -> AutocorrEstimate {
        AutocorrEstimate::from_values((0..=lags).map(|k| f(k as f64 * step)).collect(), step, 1_000_000)
    }

    #[test]
    fn short_series_rejected() {
        let x = vec![1.0; 50];
        let s = Samples { values: &x, step: 1.0 };
        assert!(autocorrelation(&s, 10.0).is_err());
    }

    #[test]
    fn zero_correlation_band() {
        let mut est = exact(|l| if l == 0.0 { 1.0 } else { 0.0 }, 1.0, 20);
        est.n_samples = 10_000;
        let ci = bartlett_ci(&est, 0.95).unwrap();
        for w in &ci[1..] {
            assert!((w - 1.959_963_984_540_054 / 100.0).abs() < 1e-12);
        }
        assert!(bartlett_ci(&est, 1.0).is_err());
        assert!(bartlett_ci(&est, 0.0).is_err());
    }

    #[test]
    fn relaxation_needs_band() {
        let est = exact(|l| (-l).exp(), 0.01, 100);
        assert!(matches!(
            relaxation_time(&est, TruncationRule::BartlettBand),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn never_entering_band_is_incomplete() {
        let est = exact(|_| 0.9, 0.1, 10).with_bartlett(0.95).unwrap();
        match relaxation_time(&est, TruncationRule::BartlettBand) {
            Err(Error::IntegrationIncomplete { partial }) => assert!((partial - 1.8).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fit_needs_lags_above_threshold() {
        let est = exact(|l| if l == 0.0 { 0.05 } else { 0.0 }, 0.1, 10);
        let tau = RelaxationEstimate { tau: 1.0, truncation_lag: 1.0, rule: TruncationRule::FirstZero };
        assert!(matches!(
            fit_beta(&est, &tau, &Smoothness::default_grid()),
            Err(Error::FitUndefined(_))
        ));
        assert!(fit_beta(&est, &tau, &[]).is_err());
    }

    #[test]
    fn flagged_zero_variance() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let z = [0.0; 4];
        let m = cross_correlation(&[&a, &z]).unwrap();
        assert_eq!(m.flagged, vec![(0, 1)]);
        assert_eq!(m.values[0][1], 0.0);
        assert_eq!(m.values[1][1], 1.0);
    }

    #[test]
    fn gaussianity_needs_long_series() {
        assert!(gaussianity_check(&[0.0; 100]).is_err());
    }
}
