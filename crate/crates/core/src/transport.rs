//! Passive tracers: Monte Carlo dispersion curves in DNS, synthetic and
//! white-noise fields, and the closed-form variance prediction
//!
//! E[X_t²] = τ² E ∫₀^{t/τ} (t/τ - u) C(u) du.

use crate::error::{Error, Result};
use crate::kernels::CovarianceFunction;
use crate::fft::Fft2;
use crate::nse2d::{run_with_observer, RunOutput, RunSpec, VelocitySampler, VorticityState};
use crate::quad::integrate;
use crate::rng::{derive_seed, stream};
use crate::stats::{linear_fit, pairwise_sum};
use crate::synthfield::{SyntheticField, WhiteNoiseField};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Where tracers start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StartPositions {
    /// Every tracer at the origin.
    Origin,
    /// Independent uniform positions on the torus.
    Uniform,
}

/// Tracer positions, unwrapped (never reduced mod 2π).
#[derive(Debug, Clone, PartialEq)]
pub struct TracerEnsemble {
    pub positions: Vec<[f64; 2]>,
    pub initial: Vec<[f64; 2]>,
    pub dt: f64,
    pub seed: u64,
}

impl TracerEnsemble {
    pub fn new(count: usize, start: StartPositions, dt: f64, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Domain("tracer ensemble needs at least one trajectory".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        let positions: Vec<[f64; 2]> = match start {
            StartPositions::Origin => vec![[0.0, 0.0]; count],
            StartPositions::Uniform => {
                let mut rng = stream(derive_seed(seed, u64::MAX));
                (0..count)
                    .map(|_| [rng.random::<f64>() * 2.0 * PI, rng.random::<f64>() * 2.0 * PI])
                    .collect()
            }
        };
        Ok(Self {
            initial: positions.clone(),
            positions,
            dt,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn displacements(&self) -> Vec<[f64; 2]> {
        self.positions
            .iter()
            .zip(&self.initial)
            .map(|(p, q)| [p[0] - q[0], p[1] - q[1]])
            .collect()
    }

    fn check_finite(&self, step: u64) -> Result<()> {
        if let Some(i) = self.positions.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::BlowUp {
                step,
                detail: format!("tracer {i} left the finite range"),
            });
        }
        Ok(())
    }
}

/// Second moments of the displacement over time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionCurve {
    pub times: Vec<f64>,
    /// E[X_t²] for the first component.
    pub var_x: Vec<f64>,
    /// Monte Carlo standard error of `var_x`.
    pub stderr: Vec<f64>,
    /// E[X_t²] for the second component.
    pub var_y: Vec<f64>,
    /// E[|X_t|²].
    pub var_total: Vec<f64>,
    pub trajectories: usize,
}

impl DispersionCurve {
    fn new(trajectories: usize) -> Self {
        Self {
            times: Vec::new(),
            var_x: Vec::new(),
            stderr: Vec::new(),
            var_y: Vec::new(),
            var_total: Vec::new(),
            trajectories,
        }
    }

    fn push(&mut self, t: f64, disp: &[[f64; 2]]) {
        let m = disp.len() as f64;
        let sq_x: Vec<f64> = disp.iter().map(|d| d[0] * d[0]).collect();
        let sq_y: Vec<f64> = disp.iter().map(|d| d[1] * d[1]).collect();
        let vx = pairwise_sum(&sq_x) / m;
        let vy = pairwise_sum(&sq_y) / m;
        let dev: Vec<f64> = sq_x.iter().map(|s| (s - vx) * (s - vx)).collect();
        let se = if disp.len() > 1 {
            (pairwise_sum(&dev) / (m - 1.0) / m).sqrt()
        } else {
            0.0
        };
        self.times.push(t);
        self.var_x.push(vx);
        self.var_y.push(vy);
        self.var_total.push(vx + vy);
        self.stderr.push(se);
    }

    /// Values at the sample closest to `t`.
    pub fn at(&self, t: f64) -> Option<(f64, f64)> {
        let i = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        Some((self.var_x[i], self.stderr[i]))
    }
}

/// Monte Carlo settings shared by every field type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdvectOptions {
    /// Total trajectory count M.
    pub trajectories: usize,
    /// Independent field realizations the trajectories are split over.
    pub realizations: usize,
    pub dt: f64,
    pub horizon: f64,
    /// Record the curve every this many steps.
    pub record_every: usize,
    pub start: StartPositions,
    pub seed: u64,
}

impl AdvectOptions {
    pub fn new(trajectories: usize, dt: f64, horizon: f64, seed: u64) -> Self {
        Self {
            trajectories,
            realizations: 1,
            dt,
            horizon,
            record_every: 1,
            start: StartPositions::Origin,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories == 0 || self.realizations == 0 || self.record_every == 0 {
            return Err(Error::Domain(
                "trajectories, realizations and record_every must be positive".into(),
            ));
        }
        if self.trajectories % self.realizations != 0 {
            return Err(Error::Domain(format!(
                "{} trajectories do not split evenly over {} realizations",
                self.trajectories, self.realizations
            )));
        }
        if !(self.dt > 0.0 && self.horizon > 0.0 && self.dt.is_finite() && self.horizon.is_finite()) {
            return Err(Error::Domain("dt and horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn per_realization(&self) -> usize {
        self.trajectories / self.realizations
    }
}

/// Field driving the tracers.
pub enum Field<'a> {
    /// Spatially and temporally constant velocity.
    Constant([f64; 2]),
    /// Filtered-noise shell field; one realization per block of tracers.
    Synthetic(&'a SyntheticField),
    /// White-noise limit, advanced by Euler–Maruyama.
    WhiteNoise(&'a WhiteNoiseField),
}

/// One AB2 step (explicit Euler when there is no previous velocity).
fn ab2_step(ens: &mut TracerEnsemble, vel: &[[f64; 2]], prev: &mut Option<Vec<[f64; 2]>>) {
    let h = ens.dt;
    match prev {
        None => {
            for (p, u) in ens.positions.iter_mut().zip(vel) {
                p[0] += h * u[0];
                p[1] += h * u[1];
            }
        }
        Some(old) => {
            for ((p, u), v) in ens.positions.iter_mut().zip(vel).zip(old.iter()) {
                p[0] += h * (1.5 * u[0] - 0.5 * v[0]);
                p[1] += h * (1.5 * u[1] - 0.5 * v[1]);
            }
        }
    }
    *prev = Some(vel.to_vec());
}

/// Displacement snapshots of one block of tracers at every recorded step.
fn advect_block(field: &Field, opts: &AdvectOptions, block: u64) -> Result<Vec<Vec<[f64; 2]>>> {
    let seed = derive_seed(opts.seed, block);
    let mut ens = TracerEnsemble::new(opts.per_realization(), opts.start, opts.dt, seed)?;
    let steps = opts.steps();
    let mut snaps = vec![ens.displacements()];
    match field {
        Field::Constant(u0) => {
            let vel = vec![*u0; ens.len()];
            let mut prev = None;
            for n in 1..=steps {
                ab2_step(&mut ens, &vel, &mut prev);
                if n % opts.record_every == 0 {
                    snaps.push(ens.displacements());
                }
            }
        }
        Field::Synthetic(f) => {
            let real = f.realize(block, opts.dt, steps as f64 * opts.dt)?;
            let mut prev = None;
            for n in 1..=steps {
                let vel: Vec<[f64; 2]> = ens
                    .positions
                    .iter()
                    .map(|&p| real.velocity_at_index(p, n - 1))
                    .collect();
                ab2_step(&mut ens, &vel, &mut prev);
                if n % opts.record_every == 0 {
                    ens.check_finite(n as u64)?;
                    snaps.push(ens.displacements());
                }
            }
        }
        Field::WhiteNoise(w) => {
            let mut rng = w.stream(block);
            for n in 1..=steps {
                let c = w.step_coefficients(&mut rng, opts.dt);
                for p in ens.positions.iter_mut() {
                    let u = w.velocity_with(*p, &c);
                    p[0] += opts.dt * u[0];
                    p[1] += opts.dt * u[1];
                }
                if n % opts.record_every == 0 {
                    ens.check_finite(n as u64)?;
                    snaps.push(ens.displacements());
                }
            }
        }
    }
    Ok(snaps)
}

/// Advects `opts.trajectories` tracers and returns the dispersion curve.
/// Deterministic for a given seed regardless of thread count.
pub fn advect(field: &Field, opts: &AdvectOptions) -> Result<DispersionCurve> {
    opts.validate()?;
    let blocks = (0..opts.realizations as u64)
        .into_par_iter()
        .map(|b| advect_block(field, opts, b))
        .collect::<Result<Vec<_>>>()?;
    let records = blocks[0].len();
    let mut curve = DispersionCurve::new(opts.trajectories);
    for r in 0..records {
        let disp: Vec<[f64; 2]> = blocks.iter().flat_map(|b| b[r].iter().copied()).collect();
        curve.push((r * opts.record_every) as f64 * opts.dt, &disp);
    }
    Ok(curve)
}

/// Tracer settings for a DNS run; the step is the solver step times
/// `stride`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DnsTracerOptions {
    pub trajectories: usize,
    pub stride: usize,
    /// Tracking window, at most the run's collection window.
    pub horizon: f64,
    pub record_every: usize,
    pub start: StartPositions,
    pub seed: u64,
}

/// Advects tracers through successive DNS states (AB2, velocity from
/// bicubic interpolation on a 2× oversampled grid). Feed it from a run
/// observer.
pub struct DnsTracker {
    opts: DnsTracerOptions,
    ens: TracerEnsemble,
    fft: Fft2,
    prev: Option<Vec<[f64; 2]>>,
    steps: u64,
    taken: u64,
    curve: DispersionCurve,
}

impl DnsTracker {
    pub fn new(spec: &RunSpec, opts: &DnsTracerOptions) -> Result<Self> {
        if opts.stride == 0 || opts.record_every == 0 {
            return Err(Error::Domain("stride and record_every must be positive".into()));
        }
        if opts.horizon > spec.duration + 1e-12 {
            return Err(Error::Domain(format!(
                "tracer horizon {} exceeds run duration {}",
                opts.horizon, spec.duration
            )));
        }
        let dt = spec.solver.dt * opts.stride as f64;
        let ens = TracerEnsemble::new(opts.trajectories, opts.start, dt, opts.seed)?;
        let mut curve = DispersionCurve::new(opts.trajectories);
        curve.push(0.0, &ens.displacements());
        Ok(Self {
            opts: *opts,
            ens,
            fft: Fft2::new(2 * spec.solver.n),
            prev: None,
            steps: (opts.horizon / dt).round() as u64,
            taken: 0,
            curve,
        })
    }

    /// Advances the tracers with the velocity of `state` on every
    /// `stride`-th solver step until the horizon is reached.
    pub fn observe(&mut self, state: &VorticityState, step: u64) -> Result<()> {
        if step % self.opts.stride as u64 != 0 || self.taken >= self.steps {
            return Ok(());
        }
        let sampler = VelocitySampler::oversampled(state, &mut self.fft);
        let vel: Vec<[f64; 2]> = self
            .ens
            .positions
            .par_iter()
            .map(|p| sampler.sample(p[0], p[1]))
            .collect();
        ab2_step(&mut self.ens, &vel, &mut self.prev);
        self.taken += 1;
        self.ens.check_finite(self.taken)?;
        if self.taken % self.opts.record_every as u64 == 0 {
            self.curve.push(self.taken as f64 * self.ens.dt, &self.ens.displacements());
        }
        Ok(())
    }

    pub fn finish(self) -> DispersionCurve {
        self.curve
    }
}

/// Runs the DNS of `spec` and advects tracers through its velocity field
/// during the collection window.
pub fn advect_dns(spec: &RunSpec, opts: &DnsTracerOptions) -> Result<(RunOutput, DispersionCurve)> {
    let mut tracker = DnsTracker::new(spec, opts)?;
    let out = run_with_observer(spec, |state, step| tracker.observe(state, step))?;
    Ok((out, tracker.finish()))
}

/// Closed-form dispersion of a tracer in a shell field with kernel
/// covariance C, relaxation time τ and energy E.
#[derive(Debug, Clone)]
pub struct VariancePrediction {
    pub covariance: CovarianceFunction,
    pub tau: f64,
    pub energy: f64,
}

impl VariancePrediction {
    pub fn new(covariance: CovarianceFunction, tau: f64, energy: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) || !(energy >= 0.0 && energy.is_finite()) {
            return Err(Error::Domain(format!(
                "prediction needs tau > 0 and energy >= 0 (tau = {tau}, energy = {energy})"
            )));
        }
        Ok(Self { covariance, tau, energy })
    }

    /// Curve on the given times in the dispersion-curve layout (zero
    /// standard error).
    pub fn curve(&self, times: &[f64]) -> Result<DispersionCurve> {
        let mut c = DispersionCurve::new(0);
        for &t in times {
            let v = predict_variance(self, t)?;
            c.times.push(t);
            c.var_x.push(v);
            c.var_y.push(v);
            c.var_total.push(2.0 * v);
            c.stderr.push(0.0);
        }
        Ok(c)
    }
}

/// τ² E ∫₀^S (S - u) C(u) du with S = t/τ, which equals the nested
/// τ² E ∫₀^S ∫₀^r C(u) du dr.
pub fn predict_variance(pred: &VariancePrediction, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let s = t / pred.tau;
    let upper = s.min(pred.covariance.support());
    let cov = &pred.covariance;
    let q = integrate(|u| (s - u) * cov.evaluate(u), 0.0, upper, 0.0, 1e-10);
    Ok(pred.tau * pred.tau * pred.energy * q.value)
}

/// Log-log slopes of a dispersion curve in the short and long regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeReport {
    pub slope_short: f64,
    pub slope_long: f64,
    /// Time where the two fitted power laws cross.
    pub transition: f64,
}

fn loglog_fit(curve: &DispersionCurve, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (&t, &v) in curve.times.iter().zip(&curve.var_x) {
        if t >= lo * (1.0 - 1e-9) && t <= hi * (1.0 + 1e-9) && t > 0.0 && v > 0.0 {
            x.push(t.ln());
            y.push(v.ln());
        }
    }
    if x.len() < 2 {
        return Err(Error::Domain(format!(
            "fewer than two positive samples in [{lo:.4e}, {hi:.4e}]"
        )));
    }
    let (slope, intercept) = linear_fit(&x, &y);
    Ok((slope, intercept))
}

/// Slopes over [τ/50, τ/5] and [5τ, 50τ] and the crossing of the two fits.
pub fn regime_check(curve: &DispersionCurve, tau: f64) -> Result<RegimeReport> {
    let (t0, t1) = match (curve.times.first(), curve.times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::Domain("empty dispersion curve".into())),
    };
    let (lo, hi) = (tau / 50.0, 50.0 * tau);
    if t0 > lo * (1.0 + 1e-9) || t1 < hi * (1.0 - 1e-9) {
        return Err(Error::Domain(format!(
            "curve spans [{t0:.4e}, {t1:.4e}], needs [{lo:.4e}, {hi:.4e}]"
        )));
    }
    let (s1, a1) = loglog_fit(curve, lo, tau / 5.0)?;
    let (s2, a2) = loglog_fit(curve, 5.0 * tau, hi)?;
    let transition = if (s1 - s2).abs() > 1e-12 {
        ((a2 - a1) / (s1 - s2)).exp()
    } else {
        f64::NAN
    };
    Ok(RegimeReport {
        slope_short: s1,
        slope_long: s2,
        transition,
    })
}

/// Long-time transport coefficients of a shell field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diffusivity {
    /// Per-component diffusivity of the averaged scalar, τE/4.
    pub per_component: f64,
    /// Growth rate of E[X_t²], τE/2.
    pub variance_slope: f64,
}

pub fn effective_diffusivity(tau: f64, energy: f64) -> Result<Diffusivity> {
    if !(tau > 0.0 && energy > 0.0) {
        return Err(Error::Domain(format!(
            "diffusivity needs tau, E > 0 (tau = {tau}, E = {energy})"
        )));
    }
    Ok(Diffusivity {
        per_component: tau * energy / 4.0,
        variance_slope: tau * energy / 2.0,
    })
}

/// Least-squares slope of var_x against t over [t_lo, t_hi].
pub fn linear_slope(curve: &DispersionCurve, t_lo: f64, t_hi: f64) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = curve
        .times
        .iter()
        .zip(&curve.var_x)
        .filter(|(t, _)| **t >= t_lo && **t <= t_hi)
        .map(|(t, v)| (*t, *v))
        .unzip();
    if x.len() < 2 {
        return Err(Error::Domain(format!("fewer than two samples in [{t_lo}, {t_hi}]")));
    }
    Ok(linear_fit(&x, &y).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::gaussian_kernel;

    #[test]
    fn constant_field_is_ballistic() {
        let opts = AdvectOptions::new(4, 0.01, 1.0, 3);
        let c = advect(&Field::Constant([1.0, 0.0]), &opts).unwrap();
        for (t, v) in c.times.iter().zip(&c.var_x) {
            assert!((v - t * t).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_field_has_no_dispersion() {
        let mut opts = AdvectOptions::new(8, 0.1, 1.0, 3);
        opts.start = StartPositions::Uniform;
        let c = advect(&Field::Constant([0.0, 0.0]), &opts).unwrap();
        assert!(c.var_total.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uneven_split_rejected() {
        let mut opts = AdvectOptions::new(10, 0.1, 1.0, 3);
        opts.realizations = 3;
        assert!(advect(&Field::Constant([0.0, 0.0]), &opts).is_err());
    }

    #[test]
    fn prediction_zero_at_origin() {
        let p = VariancePrediction::new(gaussian_kernel().covariance().clone(), 0.5, 2.0).unwrap();
        assert_eq!(predict_variance(&p, 0.0).unwrap(), 0.0);
        assert!(predict_variance(&p, -1.0).is_err());
    }

    #[test]
    fn diffusivity_formula() {
        let d = effective_diffusivity(2.0, 3.0).unwrap();
        assert_eq!((d.per_component, d.variance_slope), (1.5, 3.0));
    }

    #[test]
    fn regime_needs_span() {
        let times: Vec<f64> = (1..=10).map(|i| i as f64 * 0.1).collect();
        let curve = DispersionCurve {
            var_x: times.iter().map(|t| t * t).collect(),
            var_y: times.iter().map(|t| t * t).collect(),
            var_total: times.iter().map(|t| 2.0 * t * t).collect(),
            stderr: vec![0.0; times.len()],
            times,
            trajectories: 1,
        };
        assert!(regime_check(&curve, 1.0).is_err());
    }
}
