//! Sample paths of the filtered-white-noise process
//! ξ_t = ∫ τ^{-1/2} θ((t - s)/τ) dW_s and its coupling to Brownian motion.

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::quad::cumulative_trapezoid;
use crate::rng::{derive_seed, stream, StreamRng};
use crate::stats;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

/// Parameters of one filtered-noise realization.
#[derive(Debug, Clone)]
pub struct FilteredNoiseSpec {
    pub kernel: Kernel,
    pub tau: f64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
}

impl FilteredNoiseSpec {
    pub fn new(kernel: Kernel, tau: f64, dt: f64, horizon: f64, seed: u64) -> Self {
        Self { kernel, tau, dt, horizon, seed }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau", self.tau), ("dt", self.dt), ("horizon", self.horizon)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Domain(format!("{name} must be finite and positive, got {v}")));
            }
        }
        if self.horizon < self.dt {
            return Err(Error::Domain(format!(
                "horizon {} shorter than one step {}",
                self.horizon, self.dt
            )));
        }
        if self.dt > self.tau {
            return Err(Error::Domain(format!(
                "dt = {} exceeds tau = {}; the kernel would be aliased",
                self.dt, self.tau
            )));
        }
        if self.dt > self.tau / 10.0 {
            log::warn!("dt = {} is coarser than tau/10 = {}", self.dt, self.tau / 10.0);
        }
        Ok(())
    }

    /// Number of samples on [0, T] including both ends.
    pub fn n_samples(&self) -> usize {
        (self.horizon / self.dt).round() as usize + 1
    }

    /// Same spec with another seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Generation metadata for JSON records.
#[derive(Debug, Clone, Serialize)]
pub struct SpecRecord {
    pub kernel: String,
    pub tau: f64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
}

impl From<&FilteredNoiseSpec> for SpecRecord {
    fn from(s: &FilteredNoiseSpec) -> Self {
        Self {
            kernel: s.kernel.label().to_string(),
            tau: s.tau,
            dt: s.dt,
            horizon: s.horizon,
            seed: s.seed,
        }
    }
}

/// A uniformly sampled realization.
#[derive(Debug, Clone)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub spec: FilteredNoiseSpec,
}

/// Discrete filter: weights for lags -m..=m (in steps) and the scalar that
/// makes the discrete variance exactly one.
#[derive(Debug, Clone)]
pub struct DiscreteFilter {
    pub half_len: usize,
    pub weights: Vec<f64>,
    pub variance_correction: f64,
}

impl DiscreteFilter {
    pub fn new(kernel: &Kernel, tau: f64, dt: f64) -> Self {
        let h = dt / tau;
        let m = (kernel.support_radius() / h).ceil() as usize;
        let amp = h.sqrt();
        let weights: Vec<f64> = (0..=2 * m)
            .map(|j| {
                let x = (j as f64 - m as f64) * h;
                let v = kernel.evaluate(x);
                if v.is_finite() {
                    amp * v
                } else {
                    amp * kernel.cell_average(x, h)
                }
            })
            .collect();
        let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
        Self {
            half_len: m,
            weights,
            variance_correction: 1.0 / sum_sq.sqrt(),
        }
    }

    /// Filters driving normals η_j on s_j = (j - m)·dt, j = 0..n+2m-1, into
    /// n samples at t_i = i·dt.
    pub fn apply(&self, eta: &[f64], n: usize) -> Vec<f64> {
        debug_assert_eq!(eta.len(), n + 2 * self.half_len);
        let conv = crate::fft::convolve(eta, &self.weights);
        let c = self.variance_correction;
        conv[2 * self.half_len..2 * self.half_len + n]
            .iter()
            .map(|v| c * v)
            .collect()
    }
}

pub fn standard_normals(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Driving normals of the grid extended by the kernel support, followed by
/// the filtered samples.
fn simulate_with_drivers(spec: &FilteredNoiseSpec) -> Result<(DiscreteFilter, Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    let filter = DiscreteFilter::new(&spec.kernel, spec.tau, spec.dt);
    let n = spec.n_samples();
    let mut rng = stream(spec.seed);
    let eta = standard_normals(&mut rng, n + 2 * filter.half_len);
    let values = filter.apply(&eta, n);
    Ok((filter, eta, values))
}

/// Realization ξ(t_i) = c·Σ_j √(dt/τ) θ((t_i - s_j)/τ) η_j on t_i = i·dt.
pub fn simulate_path(spec: &FilteredNoiseSpec) -> Result<SamplePath> {
    let (_, _, values) = simulate_with_drivers(spec)?;
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite sample {bad}")));
    }
    let times = (0..values.len()).map(|i| i as f64 * spec.dt).collect();
    Ok(SamplePath {
        times,
        values,
        spec: spec.clone(),
    })
}

/// Biased mean-removed autocovariance as (lag time, value) pairs.
pub fn empirical_autocovariance(path: &SamplePath, max_lag: usize) -> Result<Vec<(f64, f64)>> {
    if 2 * max_lag >= path.values.len() {
        return Err(Error::Domain(format!(
            "max_lag {max_lag} must be below half the path length {}",
            path.values.len()
        )));
    }
    let g = stats::autocovariance(&path.values, max_lag);
    Ok(g.into_iter()
        .enumerate()
        .map(|(k, v)| (k as f64 * path.spec.dt, v))
        .collect())
}

/// I(t) = ∫₀^t ξ_s ds by cumulative trapezoid.
pub fn integrated_path(path: &SamplePath) -> SamplePath {
    SamplePath {
        times: path.times.clone(),
        values: cumulative_trapezoid(&path.values, path.spec.dt),
        spec: path.spec.clone(),
    }
}

/// Outcome of the coupled white-noise experiment.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    /// RMS over realizations of I(T) - √τ W_T.
    pub rms_gap: f64,
    /// √(2M)·τ
    pub bound: f64,
    pub probe_times: Vec<f64>,
    pub rms_at_probes: Vec<f64>,
}

impl GapReport {
    /// Whether every probed RMS gap stays within `slack · bound`.
    pub fn within(&self, slack: f64) -> bool {
        self.rms_at_probes.iter().all(|g| *g <= slack * self.bound)
    }
}

/// Builds ξ and √τ·W from the same normals in each realization and measures
/// the RMS of ∫₀^t ξ - √τ W_t at ten interior times and at T.
pub fn white_noise_gap(spec: &FilteredNoiseSpec, n_realizations: usize) -> Result<GapReport> {
    if n_realizations < 100 {
        return Err(Error::Domain(format!(
            "need at least 100 realizations, got {n_realizations}"
        )));
    }
    spec.validate()?;
    let n = spec.n_samples();
    let probes: Vec<usize> = (1..=11).map(|p| ((n - 1) * p) / 11).chain([n - 1]).collect();
    let mut probes = probes;
    probes.dedup();
    let sq: Vec<Vec<f64>> = (0..n_realizations as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let s = spec.with_seed(derive_seed(spec.seed, r));
            let (filter, eta, values) = simulate_with_drivers(&s)?;
            let integral = cumulative_trapezoid(&values, s.dt);
            // W(t_i) = √dt Σ_{s_j ∈ [0, t_i)} η_j, drivers for s ≥ 0 start at index m
            let m = filter.half_len;
            let scale = (s.tau * s.dt).sqrt();
            let mut w = Vec::with_capacity(n);
            let mut acc = 0.0;
            for i in 0..n {
                w.push(scale * acc);
                acc += eta[m + i];
            }
            Ok(probes.iter().map(|&i| (integral[i] - w[i]).powi(2)).collect())
        })
        .collect::<Result<_>>()?;
    let rms_at_probes: Vec<f64> = (0..probes.len())
        .map(|p| {
            let col: Vec<f64> = sq.iter().map(|r| r[p]).collect();
            stats::mean(&col).sqrt()
        })
        .collect();
    Ok(GapReport {
        rms_gap: *rms_at_probes.last().unwrap_or(&0.0),
        bound: (2.0 * spec.kernel.first_abs_moment()).sqrt() * spec.tau,
        probe_times: probes.iter().map(|&i| i as f64 * spec.dt).collect(),
        rms_at_probes,
    })
}

/// Moments of an ensemble of paths, for JSON export.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSummary {
    pub spec: SpecRecord,
    pub seeds: Vec<u64>,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Simulates `count` paths with seeds derived from `spec.seed` and pools
/// their one-point moments.
pub fn ensemble_summary(spec: &FilteredNoiseSpec, count: usize) -> Result<EnsembleSummary> {
    let seeds: Vec<u64> = (0..count as u64).map(|r| derive_seed(spec.seed, r)).collect();
    let paths: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&s| simulate_path(&spec.with_seed(s)).map(|p| p.values))
        .collect::<Result<_>>()?;
    let pooled: Vec<f64> = paths.concat();
    let (skewness, excess_kurtosis) = stats::skew_kurtosis(&pooled);
    Ok(EnsembleSummary {
        spec: SpecRecord::from(spec),
        seeds,
        mean: stats::mean(&pooled),
        variance: stats::variance(&pooled),
        skewness,
        excess_kurtosis,
    })
}
