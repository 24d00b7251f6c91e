//! Synthetic velocity field restricted to the most energetic shell,
//!
//! u(x, t) = σ Σ_m e_m(x) ξ_m(t),   σ = √(E / (2π k_max)),
//!
//! with divergence-free real Fourier modes e_m and independent filtered-noise
//! coefficients ξ_m.

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::noise::{simulate_path, standard_normals, FilteredNoiseSpec};
use crate::rng::{derive_seed, stream, StreamRng};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Parity {
    Cos,
    Sin,
}

/// e(x) = √2 (k⊥/|k|) cos(k·x) or √2 (k⊥/|k|) sin(k·x), k⊥ = (-k_y, k_x).
/// Unit mean square over the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BasisMode {
    pub k: (i64, i64),
    pub parity: Parity,
}

impl BasisMode {
    pub fn new(k: (i64, i64), parity: Parity) -> Result<Self> {
        if k == (0, 0) {
            return Err(Error::Domain("basis mode needs k != 0".into()));
        }
        Ok(Self { k, parity })
    }

    /// √2 k⊥/|k|
    pub fn direction(&self) -> [f64; 2] {
        let (kx, ky) = (self.k.0 as f64, self.k.1 as f64);
        let norm = (kx * kx + ky * ky).sqrt();
        [-SQRT_2 * ky / norm, SQRT_2 * kx / norm]
    }

    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        let phase = self.k.0 as f64 * x[0] + self.k.1 as f64 * x[1];
        let s = match self.parity {
            Parity::Cos => phase.cos(),
            Parity::Sin => phase.sin(),
        };
        let d = self.direction();
        [d[0] * s, d[1] * s]
    }
}

/// Mean of u·v over the torus, approximated on an m×m grid (exact for
/// trigonometric polynomials of degree below m).
pub fn inner_product(a: &BasisMode, b: &BasisMode, m: usize) -> f64 {
    let h = 2.0 * PI / m as f64;
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            let x = [i as f64 * h, j as f64 * h];
            let (u, v) = (a.eval(x), b.eval(x));
            acc += u[0] * v[0] + u[1] * v[1];
        }
    }
    acc / (m * m) as f64
}

/// Integer wavevectors with k_max - h + 1/2 ≤ |k| < k_max + h - 1/2, i.e.
/// the 2h - 1 unit-width spectrum bins centered on k_max - h + 1..k_max + h - 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ShellSpec {
    pub k_max: u32,
    pub half_width: u32,
}

impl ShellSpec {
    pub fn new(k_max: u32, half_width: u32) -> Result<Self> {
        let s = Self { k_max, half_width };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.half_width == 0 || self.k_max < self.half_width + 1 {
            return Err(Error::Domain(format!(
                "shell needs half_width >= 1 and k_max - half_width >= 1 (k_max = {}, half_width = {})",
                self.k_max, self.half_width
            )));
        }
        Ok(())
    }

    pub fn radii(&self) -> (f64, f64) {
        let (k, h) = (self.k_max as f64, self.half_width as f64);
        (k - h + 0.5, k + h - 0.5)
    }

    /// Half-plane wavevectors (k_x > 0, or k_x = 0 and k_y > 0) in the shell,
    /// ordered by (k_x, k_y).
    pub fn wavevectors(&self) -> Vec<(i64, i64)> {
        let (lo, hi) = self.radii();
        let r = hi.ceil() as i64;
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

    /// One cosine and one sine mode per wavevector.
    pub fn modes(&self) -> Vec<BasisMode> {
        self.wavevectors()
            .into_iter()
            .flat_map(|k| {
                [
                    BasisMode { k, parity: Parity::Cos },
                    BasisMode { k, parity: Parity::Sin },
                ]
            })
            .collect()
    }
}

/// Q(x) = Σ e_m(x) ⊗ e_m(x) compared with π k_max I.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QReport {
    pub q: [[f64; 2]; 2],
    pub isotropic: f64,
    /// ‖Q - π k_max I‖_F / ‖π k_max I‖_F
    pub deviation: f64,
}

pub fn q_matrix(shell: &ShellSpec, x: [f64; 2]) -> Result<QReport> {
    shell.validate()?;
    let mut q = [[0.0; 2]; 2];
    for m in shell.modes() {
        let e = m.eval(x);
        for i in 0..2 {
            for j in 0..2 {
                q[i][j] += e[i] * e[j];
            }
        }
    }
    let iso = PI * shell.k_max as f64;
    let num = ((q[0][0] - iso).powi(2) + (q[1][1] - iso).powi(2) + q[0][1].powi(2) + q[1][0].powi(2)).sqrt();
    Ok(QReport {
        q,
        isotropic: iso,
        deviation: num / (iso * SQRT_2),
    })
}

/// The shell field: modes, common amplitude and per-mode noise processes.
#[derive(Debug, Clone)]
pub struct SyntheticField {
    pub shell: ShellSpec,
    pub modes: Vec<BasisMode>,
    pub amplitude: f64,
    pub energy: f64,
    pub kernel: Kernel,
    /// Relaxation time of each mode's process.
    pub taus: Vec<f64>,
    pub seed: u64,
}

/// Serializable description of a [`SyntheticField`].
#[derive(Debug, Clone, Serialize)]
pub struct FieldRecord {
    pub shell: ShellSpec,
    pub kernel: String,
    pub tau: Vec<f64>,
    pub energy: f64,
    pub amplitude: f64,
    pub mode_count: usize,
    pub seed: u64,
}

impl SyntheticField {
    pub fn record(&self) -> FieldRecord {
        let tau = if self.constant_tau().is_some() {
            vec![self.taus[0]]
        } else {
            self.taus.clone()
        };
        FieldRecord {
            shell: self.shell,
            kernel: self.kernel.label().to_string(),
            tau,
            energy: self.energy,
            amplitude: self.amplitude,
            mode_count: self.modes.len(),
            seed: self.seed,
        }
    }

    pub fn constant_tau(&self) -> Option<f64> {
        let t0 = *self.taus.first()?;
        self.taus.iter().all(|&t| t == t0).then_some(t0)
    }

    /// Seed of mode `m` in realization `r`.
    pub fn mode_seed(&self, realization: u64, m: usize) -> u64 {
        derive_seed(derive_seed(self.seed, realization), m as u64)
    }

    /// Samples every mode process on t_i = i·dt, i = 0..=round(T/dt).
    pub fn realize(&self, realization: u64, dt: f64, horizon: f64) -> Result<FieldRealization> {
        let paths = (0..self.modes.len())
            .into_par_iter()
            .map(|m| {
                let spec = FilteredNoiseSpec::new(
                    self.kernel.clone(),
                    self.taus[m],
                    dt,
                    horizon,
                    self.mode_seed(realization, m),
                );
                simulate_path(&spec).map(|p| p.values)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FieldRealization {
            eval: ShellEvaluator::new(&self.modes),
            amplitude: self.amplitude,
            dt,
            paths,
        })
    }

    /// Frozen-coefficient field with every ξ_m = `value` (for checks).
    pub fn frozen(&self, value: f64) -> FieldRealization {
        FieldRealization {
            eval: ShellEvaluator::new(&self.modes),
            amplitude: self.amplitude,
            dt: 1.0,
            paths: vec![vec![value; 2]; self.modes.len()],
        }
    }
}

/// u_max with σ = √(E/(2π k_max)), one cosine and one sine mode per shell
/// wavevector, all driven by independent processes sharing kernel and τ.
pub fn build_umax(energy: f64, shell: ShellSpec, kernel: Kernel, tau: f64, seed: u64) -> Result<SyntheticField> {
    shell.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    if !(energy >= 0.0 && energy.is_finite()) {
        return Err(Error::Domain(format!("energy must be >= 0, got {energy}")));
    }
    let modes = shell.modes();
    if modes.is_empty() {
        return Err(Error::Domain(format!("shell around k = {} holds no wavevectors", shell.k_max)));
    }
    Ok(SyntheticField {
        shell,
        amplitude: (energy / (2.0 * PI * shell.k_max as f64)).sqrt(),
        energy,
        taus: vec![tau; modes.len()],
        modes,
        kernel,
        seed,
    })
}

/// Evaluates Σ_m c_m e_m(x) with e^{i k·x} built from powers of e^{ix}
/// and e^{iy}.
#[derive(Debug, Clone)]
pub struct ShellEvaluator {
    /// (k_x, k_y, direction) per wavevector; coefficients come in (cos, sin)
    /// pairs in the same order.
    waves: Vec<(usize, i64, [f64; 2])>,
    paired: bool,
    modes: Vec<BasisMode>,
    kx_max: usize,
    ky_max: i64,
}

impl ShellEvaluator {
    pub fn new(modes: &[BasisMode]) -> Self {
        let paired = modes.len() % 2 == 0
            && modes.chunks(2).all(|c| {
                c[0].k == c[1].k && c[0].parity == Parity::Cos && c[1].parity == Parity::Sin
            });
        let waves: Vec<(usize, i64, [f64; 2])> = if paired {
            modes
                .chunks(2)
                .map(|c| (c[0].k.0.unsigned_abs() as usize, c[0].k.1 * c[0].k.0.signum().max(1), c[0].direction()))
                .collect()
        } else {
            Vec::new()
        };
        let kx_max = modes.iter().map(|m| m.k.0.unsigned_abs() as usize).max().unwrap_or(0);
        let ky_max = modes.iter().map(|m| m.k.1.abs()).max().unwrap_or(0);
        Self {
            waves,
            paired: paired && modes.iter().all(|m| m.k.0 >= 0),
            modes: modes.to_vec(),
            kx_max,
            ky_max,
        }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Σ_m coeff(m) e_m(x).
    pub fn eval(&self, x: [f64; 2], coeff: impl Fn(usize) -> f64) -> [f64; 2] {
        if !self.paired {
            let mut out = [0.0, 0.0];
            for (m, mode) in self.modes.iter().enumerate() {
                let e = mode.eval(x);
                let c = coeff(m);
                out[0] += c * e[0];
                out[1] += c * e[1];
            }
            return out;
        }
        // powers e^{i p x}, p = 0..=kx_max and e^{i q y}, q = -ky_max..=ky_max
        let ex = Complex64::from_polar(1.0, x[0]);
        let ey = Complex64::from_polar(1.0, x[1]);
        let mut px = Vec::with_capacity(self.kx_max + 1);
        let mut acc = Complex64::new(1.0, 0.0);
        for _ in 0..=self.kx_max {
            px.push(acc);
            acc *= ex;
        }
        let ky = self.ky_max as usize;
        let mut py = vec![Complex64::new(1.0, 0.0); 2 * ky + 1];
        let mut acc = Complex64::new(1.0, 0.0);
        for q in 1..=ky {
            acc *= ey;
            py[ky + q] = acc;
            py[ky - q] = acc.conj();
        }
        let mut out = [0.0, 0.0];
        for (w, &(kx, kyv, d)) in self.waves.iter().enumerate() {
            let e = px[kx] * py[(kyv + self.ky_max) as usize];
            let s = coeff(2 * w) * e.re + coeff(2 * w + 1) * e.im;
            out[0] += d[0] * s;
            out[1] += d[1] * s;
        }
        out
    }
}

/// One realization of a synthetic field on a uniform time grid.
#[derive(Debug, Clone)]
pub struct FieldRealization {
    eval: ShellEvaluator,
    pub amplitude: f64,
    pub dt: f64,
    /// paths[m][i] = ξ_m(i·dt)
    pub paths: Vec<Vec<f64>>,
}

impl FieldRealization {
    pub fn n_times(&self) -> usize {
        self.paths.first().map(|p| p.len()).unwrap_or(0)
    }

    /// Velocity at sample index `i`.
    pub fn velocity_at_index(&self, x: [f64; 2], i: usize) -> [f64; 2] {
        let v = self.eval.eval(x, |m| self.paths[m][i]);
        [self.amplitude * v[0], self.amplitude * v[1]]
    }

    /// Velocity at time t with coefficients interpolated linearly between
    /// samples.
    pub fn velocity(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let s = (t / self.dt).max(0.0);
        let last = self.n_times().saturating_sub(1);
        let i = (s.floor() as usize).min(last);
        let j = (i + 1).min(last);
        let w = (s - i as f64).clamp(0.0, 1.0);
        let v = self
            .eval
            .eval(x, |m| (1.0 - w) * self.paths[m][i] + w * self.paths[m][j]);
        [self.amplitude * v[0], self.amplitude * v[1]]
    }
}

/// White-noise limit of a shell field: over a step dt each coefficient is
/// √(τ/dt)·N(0, 1), independent across modes and steps.
#[derive(Debug, Clone)]
pub struct WhiteNoiseField {
    pub modes: Vec<BasisMode>,
    pub amplitude: f64,
    pub tau: f64,
    pub energy: f64,
    pub seed: u64,
    eval: ShellEvaluator,
}

pub fn white_noise_field(field: &SyntheticField) -> Result<WhiteNoiseField> {
    let tau = field.constant_tau().ok_or_else(|| {
        Error::Precondition("white-noise limit needs one τ for the whole shell".into())
    })?;
    Ok(WhiteNoiseField {
        modes: field.modes.clone(),
        amplitude: field.amplitude,
        tau,
        energy: field.energy,
        seed: field.seed,
        eval: ShellEvaluator::new(&field.modes),
    })
}

impl WhiteNoiseField {
    /// Coefficients for one step of length dt.
    pub fn step_coefficients(&self, rng: &mut StreamRng, dt: f64) -> Vec<f64> {
        let s = (self.tau / dt).sqrt();
        standard_normals(rng, self.modes.len())
            .into_iter()
            .map(|g| s * g)
            .collect()
    }

    /// σ Σ_m c_m e_m(x) for given coefficients.
    pub fn velocity_with(&self, x: [f64; 2], coeffs: &[f64]) -> [f64; 2] {
        let v = self.eval.eval(x, |m| coeffs[m]);
        [self.amplitude * v[0], self.amplitude * v[1]]
    }

    pub fn stream(&self, realization: u64) -> StreamRng {
        stream(derive_seed(self.seed, realization))
    }
}
