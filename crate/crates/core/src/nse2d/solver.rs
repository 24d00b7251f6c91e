use super::state::{dealias_cutoff, symmetrize, VorticityState};
use crate::error::{Error, Result};
use crate::fft::{wavenumber, Fft2};
use crate::rng::{stream, StreamRng};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const MIDPOINT_TOL: f64 = 1e-13;
const MIDPOINT_MAX_ITER: usize = 200;
const CFL_WARN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Rk3,
    ImplicitMidpoint,
}

impl std::str::FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rk3" => Ok(Integrator::Rk3),
            "implicit-midpoint" | "midpoint" => Ok(Integrator::ImplicitMidpoint),
            other => Err(Error::Validation(format!("unknown integrator `{other}`"))),
        }
    }
}

/// White-in-time forcing on the ring k_f - b + 1/2 ≤ |k| < k_f + b - 1/2,
/// i.e. the 2b - 1 spectrum bins centered on k_f.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingSpec {
    pub k_f: u32,
    pub bandwidth: u32,
    /// Mean energy injection rate.
    pub epsilon: f64,
}

impl ForcingSpec {
    pub fn new(k_f: u32, epsilon: f64) -> Self {
        Self { k_f, bandwidth: 1, epsilon }
    }

    /// Forced wavevectors in the half plane k_x > 0 or (k_x = 0, k_y > 0),
    /// ordered by (k_x, k_y). The list depends only on the spec, not on N.
    pub fn ring(&self) -> Vec<(i64, i64)> {
        let lo = self.k_f as f64 - self.bandwidth as f64 + 0.5;
        let hi = self.k_f as f64 + self.bandwidth as f64 - 0.5;
        let r = (self.k_f + self.bandwidth) as i64;
        let mut out = Vec::new();
        for kx in 0..=r {
            for ky in -r..=r {
                if kx == 0 && ky <= 0 {
                    continue;
                }
                let k = ((kx * kx + ky * ky) as f64).sqrt();
                if k >= lo && k < hi {
                    out.push((kx, ky));
                }
            }
        }
        out
    }

    /// Per-mode increment amplitude a with a² Σ_ring |k|^{-2} = ε.
    pub fn amplitude(&self) -> f64 {
        let s: f64 = self
            .ring()
            .iter()
            .map(|&(kx, ky)| 1.0 / (kx * kx + ky * ky) as f64)
            .sum();
        (self.epsilon / s).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n: usize,
    pub nu: f64,
    pub alpha: f64,
    pub dt: f64,
    pub forcing: Option<ForcingSpec>,
    pub seed: u64,
    pub integrator: Integrator,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 8 || !self.n.is_power_of_two() {
            return Err(Error::Validation(format!(
                "grid size must be a power of two and at least 8, got {}",
                self.n
            )));
        }
        for (name, v) in [("nu", self.nu), ("alpha", self.alpha)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::Validation(format!("dt must be positive, got {}", self.dt)));
        }
        if let Some(f) = &self.forcing {
            if f.bandwidth == 0 || f.bandwidth > f.k_f {
                return Err(Error::Validation(format!(
                    "forcing bandwidth must lie in 1..=k_f (k_f = {}, bandwidth = {})",
                    f.k_f, f.bandwidth
                )));
            }
            if 3 * (f.k_f + f.bandwidth) as usize >= self.n {
                return Err(Error::Validation(format!(
                    "forcing ring k_f + bandwidth = {} not below N/3",
                    f.k_f + f.bandwidth
                )));
            }
            if !f.epsilon.is_finite() || f.epsilon < 0.0 {
                return Err(Error::Validation(format!("epsilon must be >= 0, got {}", f.epsilon)));
            }
        }
        Ok(())
    }
}

/// Time stepper holding transforms, precomputed factors and the forcing
/// stream.
pub struct Solver {
    cfg: SolverConfig,
    fft: Fft2,
    /// ω̂ ↦ û + i v̂ = ω̂ (k_x + i k_y)/|k|²
    to_velocity: Vec<Complex64>,
    /// ω̂ ↦ (∂ₓω)^ + i (∂ᵧω)^ = ω̂ (-k_y + i k_x)
    to_gradient: Vec<Complex64>,
    band: i64,
    mask: Vec<f64>,
    rate: Vec<f64>,
    e_full: Vec<f64>,
    e_half: Vec<f64>,
    e_back_half: Vec<f64>,
    ring_idx: Vec<(usize, usize)>,
    force_amp: f64,
    rng: StreamRng,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    w1: Vec<Complex64>,
    w2: Vec<Complex64>,
    nl: Vec<Complex64>,
    steps: u64,
    max_speed: f64,
    cfl_warned: bool,
}

impl Solver {
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n;
        let kc = dealias_cutoff(n);
        let mut to_velocity = vec![Complex64::new(0.0, 0.0); n * n];
        let mut to_gradient = vec![Complex64::new(0.0, 0.0); n * n];
        let mut mask = vec![0.0; n * n];
        let mut rate = vec![0.0; n * n];
        for idx in 0..n * n {
            let (ix, iy) = (wavenumber(idx / n, n), wavenumber(idx % n, n));
            let k2 = (ix * ix + iy * iy) as f64;
            if k2 > 0.0 {
                to_velocity[idx] = Complex64::new(ix as f64, iy as f64) / k2;
            }
            to_gradient[idx] = Complex64::new(-iy as f64, ix as f64);
            if ix.abs() <= kc && iy.abs() <= kc && k2 > 0.0 {
                mask[idx] = 1.0;
            }
            rate[idx] = cfg.alpha + cfg.nu * k2;
        }
        let dt = cfg.dt;
        let e_full = rate.iter().map(|l| (-l * dt).exp()).collect();
        let e_half = rate.iter().map(|l| (-l * 0.5 * dt).exp()).collect();
        let e_back_half = rate.iter().map(|l| (l * 0.5 * dt).exp()).collect();
        let (ring_idx, force_amp) = match &cfg.forcing {
            Some(f) if f.epsilon > 0.0 => {
                let idx = f
                    .ring()
                    .into_iter()
                    .map(|(a, b)| {
                        let i = crate::fft::index_of(a, n) * n + crate::fft::index_of(b, n);
                        let j = crate::fft::index_of(-a, n) * n + crate::fft::index_of(-b, n);
                        (i, j)
                    })
                    .collect();
                (idx, f.amplitude())
            }
            _ => (Vec::new(), 0.0),
        };
        let zero = vec![Complex64::new(0.0, 0.0); n * n];
        Ok(Self {
            rng: stream(cfg.seed),
            fft: Fft2::new(n),
            cfg,
            to_velocity,
            to_gradient,
            band: kc,
            mask,
            rate,
            e_full,
            e_half,
            e_back_half,
            ring_idx,
            force_amp,
            a: zero.clone(),
            b: zero.clone(),
            w1: zero.clone(),
            w2: zero.clone(),
            nl: zero,
            steps: 0,
            max_speed: 0.0,
            cfl_warned: false,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    /// Largest |u| seen in the most recent nonlinear evaluation.
    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    pub fn fft(&mut self) -> &mut Fft2 {
        &mut self.fft
    }

    /// Writes the dealiased -(u·∇ω)^ into `self.nl`.
    ///
    /// Packs u + iv and ∂ₓω + i∂ᵧω into one complex field each, so a
    /// nonlinear evaluation costs three 2D transforms.
    fn nonlinear(&mut self, w: &[Complex64]) {
        for (((a, b), w), (cu, cg)) in self
            .a
            .iter_mut()
            .zip(self.b.iter_mut())
            .zip(w)
            .zip(self.to_velocity.iter().zip(&self.to_gradient))
        {
            *a = w * cu;
            *b = w * cg;
        }
        let band = Some(self.band);
        self.fft.inverse_transposed(&mut self.a, band);
        self.fft.inverse_transposed(&mut self.b, band);
        let mut vmax2: f64 = 0.0;
        for (a, b) in self.a.iter_mut().zip(&self.b) {
            vmax2 = vmax2.max(a.norm_sqr());
            *a = Complex64::new(a.re * b.re + a.im * b.im, 0.0);
        }
        self.max_speed = vmax2.sqrt();
        self.fft.forward_transposed(&mut self.a, band);
        for ((nl, a), m) in self.nl.iter_mut().zip(&self.a).zip(&self.mask) {
            *nl = -a * m;
        }
    }

    fn check_cfl(&mut self) {
        let dx = 2.0 * PI / self.cfg.n as f64;
        let c = self.max_speed * self.cfg.dt / dx;
        if c > CFL_WARN && !self.cfl_warned {
            log::warn!(
                "advective CFL number {c:.3} exceeds {CFL_WARN} at step {}",
                self.steps
            );
            self.cfl_warned = true;
        }
    }

    fn rk3(&mut self, w: &mut [Complex64]) {
        let dt = self.cfg.dt;
        let n2 = w.len();
        self.nonlinear(w);
        self.check_cfl();
        for idx in 0..n2 {
            self.w1[idx] = self.e_full[idx] * (w[idx] + dt * self.nl[idx]);
        }
        let w1 = std::mem::take(&mut self.w1);
        self.nonlinear(&w1);
        for idx in 0..n2 {
            self.w2[idx] = 0.75 * self.e_half[idx] * w[idx]
                + 0.25 * self.e_back_half[idx] * (w1[idx] + dt * self.nl[idx]);
        }
        self.w1 = w1;
        let w2 = std::mem::take(&mut self.w2);
        self.nonlinear(&w2);
        for idx in 0..n2 {
            w[idx] = (1.0 / 3.0) * self.e_full[idx] * w[idx]
                + (2.0 / 3.0) * self.e_half[idx] * (w2[idx] + dt * self.nl[idx]);
        }
        self.w2 = w2;
    }

    fn midpoint(&mut self, w: &mut [Complex64]) -> Result<()> {
        let dt = self.cfg.dt;
        let n2 = w.len();
        let mut next = w.to_vec();
        let mut mid = vec![Complex64::new(0.0, 0.0); n2];
        for iter in 0..MIDPOINT_MAX_ITER {
            for idx in 0..n2 {
                mid[idx] = 0.5 * (w[idx] + next[idx]);
            }
            self.nonlinear(&mid);
            if iter == 0 {
                self.check_cfl();
            }
            let mut diff: f64 = 0.0;
            let mut size: f64 = 0.0;
            for idx in 0..n2 {
                let h = 0.5 * dt * self.rate[idx];
                let v = ((1.0 - h) * w[idx] + dt * self.nl[idx]) / (1.0 + h);
                diff = diff.max((v - next[idx]).norm());
                size = size.max(v.norm());
                next[idx] = v;
            }
            if diff <= MIDPOINT_TOL * size.max(f64::MIN_POSITIVE) {
                w.copy_from_slice(&next);
                return Ok(());
            }
        }
        Err(Error::BlowUp {
            step: self.steps + 1,
            detail: "implicit midpoint iteration did not converge".into(),
        })
    }

    fn add_forcing(&mut self, w: &mut [Complex64]) {
        if self.ring_idx.is_empty() {
            return;
        }
        let s = self.force_amp * (self.cfg.dt / 2.0).sqrt();
        for &(i, j) in &self.ring_idx {
            let g1: f64 = StandardNormal.sample(&mut self.rng);
            let g2: f64 = StandardNormal.sample(&mut self.rng);
            let inc = Complex64::new(s * g1, s * g2);
            w[i] += inc;
            w[j] += inc.conj();
        }
    }

    /// Advances the state by one time step.
    pub fn step(&mut self, state: &mut VorticityState) -> Result<()> {
        if state.n != self.cfg.n {
            return Err(Error::Precondition(format!(
                "state has N = {}, solver N = {}",
                state.n, self.cfg.n
            )));
        }
        match self.cfg.integrator {
            Integrator::Rk3 => self.rk3(&mut state.coeffs),
            Integrator::ImplicitMidpoint => self.midpoint(&mut state.coeffs)?,
        }
        self.add_forcing(&mut state.coeffs);
        symmetrize(&mut state.coeffs, self.cfg.n);
        self.steps += 1;
        state.t += self.cfg.dt;
        if !state.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::BlowUp {
                step: self.steps,
                detail: format!("non-finite vorticity at t = {}", state.t),
            });
        }
        #[cfg(debug_assertions)]
        if self.steps % 64 == 0 {
            state.check_invariants(1e-12)?;
        }
        Ok(())
    }
}

/// Relative enstrophy drift |Z(end) - Z(0)| / Z(0) of an unforced inviscid
/// run; 0 for a zero field.
pub fn conservation_probe(state: &VorticityState, cfg: &SolverConfig, steps: usize) -> Result<f64> {
    Ok(conservation_probe_full(state, cfg, steps)?.0)
}

/// Relative (enstrophy, energy) drifts of an unforced inviscid run.
pub fn conservation_probe_full(
    state: &VorticityState,
    cfg: &SolverConfig,
    steps: usize,
) -> Result<(f64, f64)> {
    if cfg.nu != 0.0 || cfg.alpha != 0.0 {
        return Err(Error::Precondition(format!(
            "conservation probe needs nu = alpha = 0, got nu = {}, alpha = {}",
            cfg.nu, cfg.alpha
        )));
    }
    if cfg.forcing.map(|f| f.epsilon > 0.0).unwrap_or(false) {
        return Err(Error::Precondition("conservation probe needs forcing disabled".into()));
    }
    let mut solver = Solver::new(cfg.clone())?;
    let mut s = state.clone();
    let (z0, e0) = (s.enstrophy(), s.energy());
    for _ in 0..steps {
        solver.step(&mut s)?;
    }
    let rel = |a: f64, b: f64| if b == 0.0 { (a - b).abs() } else { (a - b).abs() / b };
    Ok((rel(s.enstrophy(), z0), rel(s.energy(), e0)))
}
