use super::state::VorticityState;
use crate::fft::{index_of, Fft2};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Fields with at most this many nonzero coefficients are summed directly.
pub const DIRECT_SUM_LIMIT: usize = 64;

/// Velocity û = i k_y ω̂/|k|², v̂ = -i k_x ω̂/|k|² of one coefficient.
#[inline]
fn velocity_coeffs(w: Complex64, kx: i64, ky: i64) -> (Complex64, Complex64) {
    let k2 = (kx * kx + ky * ky) as f64;
    if k2 == 0.0 {
        return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    }
    let psi = w / k2;
    let i = Complex64::i();
    (i * ky as f64 * psi, -i * kx as f64 * psi)
}

enum Repr {
    Direct(Vec<(f64, f64, Complex64, Complex64)>),
    Grid { m: usize, u: Vec<f64>, v: Vec<f64> },
}

/// Evaluates u = ∇⊥ψ, ψ = -Δ⁻¹ω at arbitrary points of the torus.
pub struct VelocitySampler {
    repr: Repr,
}

impl VelocitySampler {
    pub fn new(state: &VorticityState) -> Self {
        let nonzero: Vec<(usize, i64, i64)> = state
            .modes()
            .filter(|&(i, kx, ky)| (kx != 0 || ky != 0) && state.coeffs[i] != Complex64::new(0.0, 0.0))
            .collect();
        if nonzero.len() <= DIRECT_SUM_LIMIT {
            let modes = nonzero
                .into_iter()
                .map(|(i, kx, ky)| {
                    let (u, v) = velocity_coeffs(state.coeffs[i], kx, ky);
                    (kx as f64, ky as f64, u, v)
                })
                .collect();
            return Self { repr: Repr::Direct(modes) };
        }
        let mut fft = Fft2::new(2 * state.n);
        Self::oversampled(state, &mut fft)
    }

    /// Grid representation on a 2N × 2N physical grid, reusing `fft`
    /// (which must have size 2N).
    pub fn oversampled(state: &VorticityState, fft: &mut Fft2) -> Self {
        let m = 2 * state.n;
        assert_eq!(fft.size(), m);
        let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
        let i = Complex64::i();
        for (idx, kx, ky) in state.modes() {
            let w = state.coeffs[idx];
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            let (u, v) = velocity_coeffs(w, kx, ky);
            buf[index_of(kx, m) * m + index_of(ky, m)] = u + i * v;
        }
        fft.inverse(&mut buf);
        let u = buf.iter().map(|c| c.re).collect();
        let v = buf.iter().map(|c| c.im).collect();
        Self { repr: Repr::Grid { m, u, v } }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.repr, Repr::Direct(_))
    }

    /// Velocity at (x, y); positions are wrapped periodically.
    pub fn sample(&self, x: f64, y: f64) -> [f64; 2] {
        match &self.repr {
            Repr::Direct(modes) => {
                let mut out = [0.0, 0.0];
                for &(kx, ky, u, v) in modes {
                    let e = Complex64::from_polar(1.0, kx * x + ky * y);
                    out[0] += (u * e).re;
                    out[1] += (v * e).re;
                }
                out
            }
            Repr::Grid { m, u, v } => {
                let m = *m;
                let h = 2.0 * PI / m as f64;
                let sx = x.rem_euclid(2.0 * PI) / h;
                let sy = y.rem_euclid(2.0 * PI) / h;
                let (ix, iy) = (sx.floor(), sy.floor());
                let wx = lagrange4(sx - ix);
                let wy = lagrange4(sy - iy);
                let (ix, iy) = (ix as i64, iy as i64);
                let mut out = [0.0, 0.0];
                for (a, wa) in wx.iter().enumerate() {
                    let row = (ix + a as i64 - 1).rem_euclid(m as i64) as usize * m;
                    for (b, wb) in wy.iter().enumerate() {
                        let col = (iy + b as i64 - 1).rem_euclid(m as i64) as usize;
                        let w = wa * wb;
                        out[0] += w * u[row + col];
                        out[1] += w * v[row + col];
                    }
                }
                out
            }
        }
    }
}

/// Weights of the cubic Lagrange interpolant on nodes -1, 0, 1, 2 at t ∈ [0, 1).
#[inline]
fn lagrange4(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Velocity at each position; direct Fourier summation for sparse fields,
/// bicubic interpolation on a 2× oversampled grid otherwise.
pub fn velocity_at(state: &VorticityState, positions: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let s = VelocitySampler::new(state);
    positions.iter().map(|p| s.sample(p[0], p[1])).collect()
}

/// Velocity by direct summation over every nonzero coefficient.
pub fn velocity_direct(state: &VorticityState, positions: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let modes: Vec<_> = state
        .modes()
        .filter(|&(i, kx, ky)| (kx != 0 || ky != 0) && state.coeffs[i] != Complex64::new(0.0, 0.0))
        .map(|(i, kx, ky)| {
            let (u, v) = velocity_coeffs(state.coeffs[i], kx, ky);
            (kx as f64, ky as f64, u, v)
        })
        .collect();
    let s = VelocitySampler { repr: Repr::Direct(modes) };
    positions.iter().map(|p| s.sample(p[0], p[1])).collect()
}

/// max_k |k_x û + k_y v̂| relative to max |û|, |v̂|.
pub fn spectral_divergence(state: &VorticityState) -> f64 {
    let mut div: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, kx, ky) in state.modes() {
        let (u, v) = velocity_coeffs(state.coeffs[i], kx, ky);
        div = div.max((kx as f64 * u + ky as f64 * v).norm());
        scale = scale.max(u.norm()).max(v.norm());
    }
    if scale == 0.0 {
        0.0
    } else {
        div / scale
    }
}

/// Root-mean-square speed √⟨|u|²⟩ from the coefficients.
pub fn rms_velocity(state: &VorticityState) -> f64 {
    (2.0 * state.energy()).sqrt()
}
