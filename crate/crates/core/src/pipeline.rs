//! End-to-end desk run: one forced DNS feeds mode diagnostics, the
//! calibration of the shell model and a tracer comparison between the DNS
//! and the model.

use crate::diagnostics::{analyze, cross_correlation, AnalysisOptions, CorrelationMatrix, SeriesDiagnostics};
use crate::error::{Error, Result};
use crate::io::Table;
use crate::kernels::KernelSpec;
use crate::nse2d::{energy_spectrum, run_with_observer, ModeSeries, RunOutput, RunSpec, VorticityState};
use crate::rng::derive_seed;
use crate::synthfield::{build_umax, FieldRecord, ShellSpec};
use crate::transport::{
    advect, linear_slope, regime_check, AdvectOptions, DispersionCurve, DnsTracerOptions, DnsTracker, Field,
    RegimeReport, StartPositions, VariancePrediction,
};
use serde::Serialize;

/// Half-plane wavevectors whose modulus rounds to `k` (one spectrum bin),
/// at most `limit` of them, spread evenly in angle.
pub fn bin_wavevectors(k: u32, kc: i64, limit: usize) -> Vec<(i64, i64)> {
    let r = k as i64 + 1;
    let mut all: Vec<(i64, i64)> = Vec::new();
    for kx in 0..=r.min(kc) {
        for ky in -r.min(kc)..=r.min(kc) {
            if kx == 0 && ky <= 0 {
                continue;
            }
            if (((kx * kx + ky * ky) as f64).sqrt()).round() as u32 == k {
                all.push((kx, ky));
            }
        }
    }
    all.sort_by(|a, b| {
        let ang = |v: &(i64, i64)| (v.1 as f64).atan2(v.0 as f64);
        ang(a).total_cmp(&ang(b))
    });
    if limit == 0 || all.len() <= limit {
        return all;
    }
    (0..limit).map(|i| all[i * all.len() / limit]).collect()
}

/// Most energetic spectrum bin, k ≥ 1.
pub fn peak_bin(spectrum: &[(usize, f64)]) -> Option<u32> {
    spectrum
        .iter()
        .filter(|(k, _)| *k >= 1)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| *k as u32)
}

#[derive(Debug, Clone)]
pub struct DeskConfig {
    pub run: RunSpec,
    /// Modes recorded for single-mode diagnostics.
    pub diag_modes: Vec<(i64, i64)>,
    pub tracers: DnsTracerOptions,
    /// At most this many shell modes are analyzed for τ.
    pub max_shell_modes: usize,
    pub model_kernel: KernelSpec,
    pub model_trajectories: usize,
    pub model_realizations: usize,
    /// Model time step is τ / steps_per_tau.
    pub steps_per_tau: usize,
    pub analysis: AnalysisOptions,
    pub seed: u64,
}

impl DeskConfig {
    pub fn new(run: RunSpec, tracer_horizon: f64, seed: u64) -> Self {
        Self {
            run,
            diag_modes: Vec::new(),
            tracers: DnsTracerOptions {
                trajectories: 10_000,
                stride: 1,
                horizon: tracer_horizon,
                record_every: 1,
                start: StartPositions::Uniform,
                seed: derive_seed(seed, 1),
            },
            max_shell_modes: 16,
            model_kernel: KernelSpec::Gaussian,
            model_trajectories: 10_000,
            model_realizations: 100,
            steps_per_tau: 100,
            analysis: AnalysisOptions::default(),
            seed,
        }
    }
}

/// Energy and relaxation time of the most energetic shell.
#[derive(Debug, Clone, Serialize)]
pub struct ShellMeasurement {
    pub k_max: u32,
    /// Spectrum bin value E(k_max) = ½ Σ_bin |û|².
    pub spectrum_energy: f64,
    /// Mean square velocity of the shell, 2 E(k_max); the model's E.
    pub energy: f64,
    /// Mean of the per-mode τ over the analyzed shell modes.
    pub tau: f64,
    pub mode_taus: Vec<((i64, i64), f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveComparison {
    pub regime: Option<RegimeReport>,
    /// d E[X_t²]/dt fitted over [10τ, horizon].
    pub long_slope: f64,
}

#[derive(Debug, Clone)]
pub struct DeskResult {
    pub run: RunOutput,
    pub diagnostics: Vec<SeriesDiagnostics>,
    pub cross: CorrelationMatrix,
    pub shell_series: Vec<ModeSeries>,
    pub shell: ShellMeasurement,
    pub field: FieldRecord,
    pub dns_curve: DispersionCurve,
    pub model_curve: DispersionCurve,
    pub prediction: DispersionCurve,
    pub dns: CurveComparison,
    pub model: CurveComparison,
}

fn compare(curve: &DispersionCurve, tau: f64) -> Result<CurveComparison> {
    let end = *curve.times.last().unwrap_or(&0.0);
    Ok(CurveComparison {
        regime: regime_check(curve, tau).ok(),
        long_slope: linear_slope(curve, 10.0 * tau, end)?,
    })
}

/// Records the shell around the spectral peak of the first collected state.
struct ShellRecorder {
    limit: usize,
    dt: f64,
    k_max: Option<u32>,
    modes: Vec<(i64, i64)>,
    idx: Vec<usize>,
    samples: Vec<Vec<f64>>,
}

impl ShellRecorder {
    fn observe(&mut self, state: &VorticityState) {
        if self.k_max.is_none() {
            let k = peak_bin(&energy_spectrum(state)).unwrap_or(1);
            let kc = crate::nse2d::dealias_cutoff(state.n) as i64;
            self.modes = bin_wavevectors(k, kc, self.limit);
            self.idx = self.modes.iter().map(|&m| state.idx(m)).collect();
            self.samples = vec![Vec::new(); self.modes.len()];
            self.k_max = Some(k);
        }
        for (s, &i) in self.samples.iter_mut().zip(&self.idx) {
            s.push(state.coeffs[i].re);
        }
    }
}

/// Runs the DNS with tracers, measures the most energetic shell, builds the
/// shell model and advects tracers through it.
pub fn desk_run(cfg: &DeskConfig) -> Result<DeskResult> {
    let mut spec = cfg.run.clone();
    spec.modes = cfg.diag_modes.clone();
    let mut tracker = DnsTracker::new(&spec, &cfg.tracers)?;
    let mut shell_rec = ShellRecorder {
        limit: cfg.max_shell_modes,
        dt: spec.solver.dt * spec.sample_every as f64,
        k_max: None,
        modes: Vec::new(),
        idx: Vec::new(),
        samples: Vec::new(),
    };
    let every = spec.sample_every as u64;
    let out = run_with_observer(&spec, |state, step| {
        if step % every == 0 {
            shell_rec.observe(state);
        }
        tracker.observe(state, step)
    })?;
    let dns_curve = tracker.finish();

    let diagnostics = out
        .mode_series
        .iter()
        .map(|s| analyze(s, Some(s.k), &cfg.analysis))
        .collect::<Result<Vec<_>>>()?;
    let sl: Vec<&[f64]> = out.mode_series.iter().map(|s| s.samples.as_slice()).collect();
    let cross = cross_correlation(&sl)?;

    let k_max = shell_rec.k_max.ok_or_else(|| Error::Precondition("run collected no states".into()))?;
    if let Some(k) = peak_bin(&out.mean_spectrum) {
        if k != k_max {
            log::warn!("spectral peak moved from k = {k_max} to k = {k} during collection");
        }
    }
    let shell_series: Vec<ModeSeries> = shell_rec
        .modes
        .iter()
        .zip(shell_rec.samples)
        .map(|(&k, samples)| ModeSeries {
            k,
            dt_sample: shell_rec.dt,
            samples,
        })
        .collect();
    let mode_taus: Vec<((i64, i64), f64)> = shell_series
        .iter()
        .filter_map(|s| analyze(s, Some(s.k), &cfg.analysis).ok().and_then(|d| d.tau).map(|t| (s.k, t)))
        .collect();
    if mode_taus.is_empty() {
        return Err(Error::Precondition(format!("no relaxation time measured in shell k = {k_max}")));
    }
    let tau = mode_taus.iter().map(|p| p.1).sum::<f64>() / mode_taus.len() as f64;
    let spectrum_energy = out.mean_spectrum.get(k_max as usize).map(|p| p.1).unwrap_or(0.0);
    let shell = ShellMeasurement {
        k_max,
        spectrum_energy,
        energy: 2.0 * spectrum_energy,
        tau,
        mode_taus,
    };

    let kernel = cfg.model_kernel.build()?;
    let field = build_umax(
        shell.energy,
        ShellSpec::new(k_max, 1)?,
        kernel.clone(),
        tau,
        derive_seed(cfg.seed, 2),
    )?;
    let steps_per_tau = cfg.steps_per_tau.max(1) as f64;
    let dt = tau / steps_per_tau;
    let mut opts = AdvectOptions::new(cfg.model_trajectories, dt, cfg.tracers.horizon, derive_seed(cfg.seed, 3));
    opts.realizations = cfg.model_realizations;
    opts.start = StartPositions::Uniform;
    let model_curve = advect(&Field::Synthetic(&field), &opts)?;
    let prediction =
        VariancePrediction::new(kernel.covariance().clone(), tau, shell.energy)?.curve(&model_curve.times)?;

    Ok(DeskResult {
        dns: compare(&dns_curve, tau)?,
        model: compare(&model_curve, tau)?,
        run: out,
        diagnostics,
        cross,
        shell_series,
        field: field.record(),
        shell,
        dns_curve,
        model_curve,
        prediction,
    })
}

/// Rows (series index, |k|, Δ/τ, R) for overlaying autocorrelations on
/// the rescaled lag axis; |k| is NaN for series without a wavevector.
pub fn collapse_table(diags: &[SeriesDiagnostics]) -> Table {
    let mut t = Table::new(&["series", "k", "lag_over_tau", "r"]);
    for (i, d) in diags.iter().enumerate() {
        let Some(tau) = d.tau else { continue };
        let modulus = d
            .mode
            .map(|k| ((k.0 * k.0 + k.1 * k.1) as f64).sqrt())
            .unwrap_or(f64::NAN);
        for (lag, r) in d.lags.iter().zip(&d.r) {
            t.push(vec![i as f64, modulus, lag / tau, *r]);
        }
    }
    t
}
