//! Pseudo-spectral solver for the stochastically forced 2D Navier–Stokes
//! equations in vorticity form on the 2π-periodic square,
//!
//! ∂ω/∂t + u·∇ω = -αω + νΔω + forcing,   u = ∇⊥ψ,  -Δψ = ω,
//!
//! with 2/3-rule dealiasing and white-in-time forcing on a thin ring.

mod snapshot;
mod solver;
mod state;
mod velocity;

pub use snapshot::{decode as decode_snapshot, encode as encode_snapshot, read_snapshot, write_snapshot, SnapshotHeader};
pub use solver::{
    conservation_probe, conservation_probe_full, ForcingSpec, Integrator, Solver, SolverConfig,
};
pub use state::{dealias_cutoff, random_smooth_field, VorticityState};
pub use velocity::{
    rms_velocity, spectral_divergence, velocity_at, velocity_direct, VelocitySampler,
    DIRECT_SUM_LIMIT,
};

use crate::error::{Error, Result};
use crate::stats::linear_fit;
use serde::{Deserialize, Serialize};

/// Shell-binned kinetic-energy spectrum: bin k collects wavevectors with
/// round(|k|) = k. Entry k of the result is (k, E_k), k = 0..=max bin.
pub fn energy_spectrum(state: &VorticityState) -> Vec<(usize, f64)> {
    let kc = dealias_cutoff(state.n);
    let max_bin = ((2.0_f64).sqrt() * kc as f64).round() as usize;
    let mut e = vec![0.0; max_bin + 1];
    for (i, kx, ky) in state.modes() {
        let k2 = (kx * kx + ky * ky) as f64;
        if k2 == 0.0 {
            continue;
        }
        let bin = k2.sqrt().round() as usize;
        if bin <= max_bin {
            e[bin] += state.coeffs[i].norm_sqr() / (2.0 * k2);
        }
    }
    e.into_iter().enumerate().collect()
}

/// Real part of ω̂(k) sampled at a fixed stride.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSeries {
    pub k: (i64, i64),
    pub dt_sample: f64,
    pub samples: Vec<f64>,
}

impl ModeSeries {
    pub fn modulus(&self) -> f64 {
        ((self.k.0 * self.k.0 + self.k.1 * self.k.1) as f64).sqrt()
    }
}

/// Checks that every mode lies inside the dealiased band and is nonzero.
pub fn validate_modes(n: usize, modes: &[(i64, i64)]) -> Result<()> {
    let kc = dealias_cutoff(n);
    for &(kx, ky) in modes {
        if kx.abs() > kc || ky.abs() > kc || (kx == 0 && ky == 0) {
            return Err(Error::Domain(format!(
                "mode ({kx}, {ky}) outside the resolved band |k_x|, |k_y| <= {kc}"
            )));
        }
    }
    Ok(())
}

/// Initial vorticity of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    Zero,
    RandomSmooth { k_peak: f64, enstrophy: f64, seed: u64 },
    Given(#[serde(skip)] Option<Box<VorticityState>>),
}

/// A full DNS run: spin-up followed by a collection window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub solver: SolverConfig,
    pub initial: InitialCondition,
    /// Minimum spin-up time; extended until the energy passes the
    /// stationarity test or `max_spin_up` is reached.
    pub spin_up: f64,
    pub max_spin_up: f64,
    /// Length of the collection window (time units).
    pub duration: f64,
    pub sample_every: usize,
    pub modes: Vec<(i64, i64)>,
    /// Stride (in steps) of the energy/enstrophy record.
    pub energy_every: usize,
    /// Stride (in steps) of spectra entering the time average.
    pub spectrum_every: usize,
}

impl RunSpec {
    /// Spin-up defaults to 20/α (at most three times that).
    pub fn new(solver: SolverConfig, duration: f64) -> Self {
        let spin_up = if solver.alpha > 0.0 { 20.0 / solver.alpha } else { 0.0 };
        Self {
            solver,
            initial: InitialCondition::Zero,
            spin_up,
            max_spin_up: 3.0 * spin_up,
            duration,
            sample_every: 1,
            modes: Vec::new(),
            energy_every: 10,
            spectrum_every: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        validate_modes(self.solver.n, &self.modes)?;
        if self.sample_every == 0 || self.energy_every == 0 || self.spectrum_every == 0 {
            return Err(Error::Validation("sampling strides must be positive".into()));
        }
        for (name, v) in [("spin_up", self.spin_up), ("duration", self.duration)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Time series of energy and enstrophy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    pub enstrophy: Vec<f64>,
}

impl EnergyRecord {
    fn push(&mut self, s: &VorticityState) {
        self.t.push(s.t);
        self.energy.push(s.energy());
        self.enstrophy.push(s.enstrophy());
    }
}

/// |trend slope| · (window length) / mean of the energy over the second half
/// of the record; small values indicate a statistically stationary state.
pub fn stationarity_ratio(t: &[f64], energy: &[f64]) -> f64 {
    let half = t.len() / 2;
    if t.len() - half < 3 {
        return f64::INFINITY;
    }
    let (ts, es) = (&t[half..], &energy[half..]);
    let (slope, _) = linear_fit(ts, es);
    let mean = crate::stats::mean(es);
    if mean == 0.0 {
        return 0.0;
    }
    (slope * (ts[ts.len() - 1] - ts[0]) / mean).abs()
}

pub const STATIONARITY_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub final_state: VorticityState,
    pub spin_up_time: f64,
    pub stationary: bool,
    pub stationarity_ratio: f64,
    pub spin_up_energy: EnergyRecord,
    pub energy: EnergyRecord,
    pub mean_spectrum: Vec<(usize, f64)>,
    pub mode_series: Vec<ModeSeries>,
    pub steps: u64,
}

fn initial_state(spec: &RunSpec) -> VorticityState {
    let n = spec.solver.n;
    match &spec.initial {
        InitialCondition::Zero => VorticityState::zeros(n),
        InitialCondition::RandomSmooth { k_peak, enstrophy, seed } => {
            random_smooth_field(n, *k_peak, *enstrophy, *seed)
        }
        InitialCondition::Given(Some(s)) => (**s).clone(),
        InitialCondition::Given(None) => VorticityState::zeros(n),
    }
}

/// Runs spin-up and collection, calling `observer(state, step)` after each
/// collection step (step counted from 1 within the window).
pub fn run_with_observer<F>(spec: &RunSpec, mut observer: F) -> Result<RunOutput>
where
    F: FnMut(&VorticityState, u64) -> Result<()>,
{
    spec.validate()?;
    let dt = spec.solver.dt;
    let mut solver = Solver::new(spec.solver.clone())?;
    let mut state = initial_state(spec);
    if state.n != spec.solver.n {
        return Err(Error::Validation(format!(
            "initial state has N = {}, config N = {}",
            state.n, spec.solver.n
        )));
    }

    let mut spin = EnergyRecord::default();
    spin.push(&state);
    let min_steps = (spec.spin_up / dt).round() as u64;
    let max_steps = ((spec.max_spin_up.max(spec.spin_up)) / dt).round() as u64;
    let check_every = (min_steps / 4).max(1);
    let mut taken = 0u64;
    let mut ratio = f64::INFINITY;
    let mut stationary = min_steps == 0;
    while taken < max_steps {
        solver.step(&mut state)?;
        taken += 1;
        if taken % spec.energy_every as u64 == 0 {
            spin.push(&state);
        }
        if taken >= min_steps && (taken - min_steps) % check_every == 0 {
            // trailing window of the minimum spin-up length
            let from = spin.t.partition_point(|&t| t < state.t - spec.spin_up);
            ratio = stationarity_ratio(&spin.t[from..], &spin.energy[from..]);
            if ratio < STATIONARITY_THRESHOLD {
                stationary = true;
                break;
            }
        }
    }
    if !stationary {
        log::warn!(
            "energy not stationary after spin-up of {:.3} time units (ratio {ratio:.3})",
            state.t
        );
    }
    let spin_up_time = state.t;

    let n_steps = (spec.duration / dt).round() as u64;
    let mut energy = EnergyRecord::default();
    let mut series: Vec<ModeSeries> = spec
        .modes
        .iter()
        .map(|&k| ModeSeries {
            k,
            dt_sample: dt * spec.sample_every as f64,
            samples: Vec::with_capacity((n_steps / spec.sample_every as u64) as usize + 1),
        })
        .collect();
    let idx: Vec<usize> = spec.modes.iter().map(|&k| state.idx(k)).collect();
    let mut spec_sum: Vec<f64> = Vec::new();
    let mut spec_count = 0usize;
    let record = |state: &VorticityState, series: &mut Vec<ModeSeries>| {
        for (s, &i) in series.iter_mut().zip(&idx) {
            s.samples.push(state.coeffs[i].re);
        }
    };
    record(&state, &mut series);
    energy.push(&state);
    for step in 1..=n_steps {
        solver.step(&mut state)?;
        if step % spec.sample_every as u64 == 0 {
            record(&state, &mut series);
        }
        if step % spec.energy_every as u64 == 0 {
            energy.push(&state);
        }
        if step % spec.spectrum_every as u64 == 0 {
            let sp = energy_spectrum(&state);
            if spec_sum.is_empty() {
                spec_sum = vec![0.0; sp.len()];
            }
            for (acc, (_, e)) in spec_sum.iter_mut().zip(&sp) {
                *acc += e;
            }
            spec_count += 1;
        }
        observer(&state, step)?;
    }
    let mean_spectrum = if spec_count == 0 {
        energy_spectrum(&state)
    } else {
        spec_sum
            .into_iter()
            .enumerate()
            .map(|(k, e)| (k, e / spec_count as f64))
            .collect()
    };
    let final_ratio = stationarity_ratio(&energy.t, &energy.energy);
    Ok(RunOutput {
        final_state: state,
        spin_up_time,
        stationary,
        stationarity_ratio: final_ratio,
        spin_up_energy: spin,
        energy,
        mean_spectrum,
        mode_series: series,
        steps: solver.steps_taken(),
    })
}

pub fn run(spec: &RunSpec) -> Result<RunOutput> {
    run_with_observer(spec, |_, _| Ok(()))
}

/// Runs `spec` with the given modes and stride and returns their series.
pub fn extract_mode_series(
    spec: &RunSpec,
    modes: &[(i64, i64)],
    sample_every: usize,
) -> Result<Vec<ModeSeries>> {
    validate_modes(spec.solver.n, modes)?;
    let mut s = spec.clone();
    s.modes = modes.to_vec();
    s.sample_every = sample_every;
    Ok(run(&s)?.mode_series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn cfg(n: usize) -> SolverConfig {
        SolverConfig {
            n,
            nu: 0.01,
            alpha: 0.1,
            dt: 1e-2,
            forcing: None,
            seed: 1,
            integrator: Integrator::Rk3,
        }
    }

    #[test]
    fn bad_grid_is_rejected() {
        for n in [4, 48, 98, 100] {
            assert!(Solver::new(cfg(n)).is_err(), "n = {n}");
        }
        assert!(Solver::new(cfg(128)).is_ok());
    }

    #[test]
    fn forcing_ring_must_fit() {
        let mut c = cfg(32);
        c.forcing = Some(ForcingSpec::new(10, 1.0));
        assert!(c.validate().is_err());
        c.forcing = Some(ForcingSpec::new(8, 1.0));
        assert!(c.validate().is_ok());
        c.forcing = Some(ForcingSpec { k_f: 4, bandwidth: 0, epsilon: 1.0 });
        assert!(c.validate().is_err());
        c.forcing = Some(ForcingSpec { k_f: 1, bandwidth: 2, epsilon: 1.0 });
        assert!(c.validate().is_err());
    }

    #[test]
    fn forcing_ring_is_half_plane() {
        let r = ForcingSpec::new(4, 1.0).ring();
        assert!(r.contains(&(4, 0)) && r.contains(&(0, 4)) && r.contains(&(3, -3)));
        assert!(!r.contains(&(-4, 0)) && !r.contains(&(0, -4)));
        for &(a, b) in &r {
            assert!(!r.contains(&(-a, -b)));
            assert_eq!((((a * a + b * b) as f64).sqrt()).round(), 4.0);
        }
    }

    #[test]
    fn spectrum_bins_single_mode() {
        let mut s = VorticityState::zeros(32);
        s.set_mode((3, 4), Complex64::new(2.0, 1.0));
        let sp = energy_spectrum(&s);
        for (k, e) in &sp {
            if *k == 5 {
                // two conjugate coefficients, each |ω̂|²/(2·25)
                assert!((e - 2.0 * 5.0 / 50.0).abs() < 1e-15);
            } else {
                assert_eq!(*e, 0.0);
            }
        }
    }

    #[test]
    fn modes_outside_band_are_rejected() {
        assert!(validate_modes(64, &[(3, 4), (21, 21)]).is_ok());
        assert!(validate_modes(64, &[(22, 0)]).is_err());
        assert!(validate_modes(64, &[(0, 0)]).is_err());
    }

    #[test]
    fn stationarity_of_flat_and_trending_series() {
        let t: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let flat = vec![1.0; 100];
        assert!(stationarity_ratio(&t, &flat) < 1e-12);
        let trend: Vec<f64> = t.iter().map(|x| 1.0 + x).collect();
        assert!(stationarity_ratio(&t, &trend) > 0.1);
    }
}
