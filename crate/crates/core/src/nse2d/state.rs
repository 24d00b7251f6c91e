use crate::error::{Error, Result};
use crate::fft::{index_of, wavenumber, Fft2};
use crate::rng::stream;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

/// Spectral vorticity on an N×N grid of [0, 2π)², stored row-major with
/// index `ix * n + iy`. Coefficients follow f(x) = Σ_k f̂(k) e^{i k·x}.
#[derive(Debug, Clone, PartialEq)]
pub struct VorticityState {
    pub n: usize,
    pub t: f64,
    pub coeffs: Vec<Complex64>,
}

/// Largest retained |k_x|, |k_y| under the 2/3 rule (3K < N).
pub fn dealias_cutoff(n: usize) -> i64 {
    ((n as i64) - 1) / 3
}

impl VorticityState {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            t: 0.0,
            coeffs: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    #[inline]
    pub fn idx(&self, k: (i64, i64)) -> usize {
        index_of(k.0, self.n) * self.n + index_of(k.1, self.n)
    }

    pub fn get(&self, k: (i64, i64)) -> Complex64 {
        self.coeffs[self.idx(k)]
    }

    /// Sets ω̂(k) and its Hermitian partner ω̂(-k).
    pub fn set_mode(&mut self, k: (i64, i64), value: Complex64) {
        let i = self.idx(k);
        let j = self.idx((-k.0, -k.1));
        self.coeffs[i] = value;
        self.coeffs[j] = value.conj();
        if i == j {
            self.coeffs[i] = Complex64::new(value.re, 0.0);
        }
    }

    /// Iterator over (index, k_x, k_y).
    pub fn modes(&self) -> impl Iterator<Item = (usize, i64, i64)> + '_ {
        let n = self.n;
        (0..n * n).map(move |idx| (idx, wavenumber(idx / n, n), wavenumber(idx % n, n)))
    }

    /// Kinetic energy ½⟨|u|²⟩ = Σ |ω̂|² / (2|k|²).
    pub fn energy(&self) -> f64 {
        self.modes()
            .filter(|&(_, kx, ky)| kx != 0 || ky != 0)
            .map(|(i, kx, ky)| self.coeffs[i].norm_sqr() / (2.0 * (kx * kx + ky * ky) as f64))
            .sum()
    }

    /// Enstrophy Z = ½ Σ |ω̂|².
    pub fn enstrophy(&self) -> f64 {
        0.5 * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Largest violation of ω̂(-k) = conj ω̂(k).
    pub fn hermitian_defect(&self) -> f64 {
        self.modes()
            .map(|(i, kx, ky)| (self.coeffs[i] - self.get((-kx, -ky)).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Largest |ω̂| in the band removed by the 2/3 rule.
    pub fn dealias_defect(&self) -> f64 {
        let kc = dealias_cutoff(self.n);
        self.modes()
            .filter(|&(_, kx, ky)| kx.abs() > kc || ky.abs() > kc)
            .map(|(i, _, _)| self.coeffs[i].norm())
            .fold(0.0, f64::max)
    }

    /// Checks Hermitian symmetry, zero mean and the dealiased band.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        let h = self.hermitian_defect();
        if h > tol * scale {
            return Err(Error::Validation(format!("Hermitian symmetry broken by {h}")));
        }
        let m = self.coeffs[0].norm();
        if m > tol * scale {
            return Err(Error::Validation(format!("nonzero mean {m}")));
        }
        let d = self.dealias_defect();
        if d > 0.0 {
            return Err(Error::Validation(format!("energy in the dealiased band: {d}")));
        }
        Ok(())
    }

    /// Vorticity on the physical grid, `out[ix * n + iy] = ω(2π ix/n, 2π iy/n)`.
    pub fn to_physical(&self, fft: &mut Fft2) -> Vec<f64> {
        let mut buf = self.coeffs.clone();
        fft.inverse(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// Builds a state from physical-grid vorticity, removing the mean and
    /// the dealiased band.
    pub fn from_physical(n: usize, values: &[f64], fft: &mut Fft2) -> Self {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.forward(&mut buf);
        let mut s = Self { n, t: 0.0, coeffs: buf };
        s.project();
        s
    }

    /// Zeroes the mean and the dealiased band, and symmetrizes.
    pub fn project(&mut self) {
        let n = self.n;
        let kc = dealias_cutoff(n);
        for idx in 0..n * n {
            let (kx, ky) = (wavenumber(idx / n, n), wavenumber(idx % n, n));
            if kx.abs() > kc || ky.abs() > kc || (kx == 0 && ky == 0) {
                self.coeffs[idx] = Complex64::new(0.0, 0.0);
            }
        }
        symmetrize(&mut self.coeffs, n);
    }
}

/// Replaces each pair (ω̂(k), ω̂(-k)) by its Hermitian part.
pub(crate) fn symmetrize(c: &mut [Complex64], n: usize) {
    for ix in 0..n {
        let jx = (n - ix) % n;
        for iy in 0..n {
            let jy = (n - iy) % n;
            let a = ix * n + iy;
            let b = jx * n + jy;
            if a < b {
                let avg = 0.5 * (c[a] + c[b].conj());
                c[a] = avg;
                c[b] = avg.conj();
            } else if a == b {
                c[a].im = 0.0;
            }
        }
    }
}

/// Random smooth field with spectrum ∝ |k|^4 e^{-2(|k|/k_peak)²} (in
/// vorticity), scaled to the given enstrophy.
pub fn random_smooth_field(n: usize, k_peak: f64, enstrophy: f64, seed: u64) -> VorticityState {
    let mut rng = stream(seed);
    let mut s = VorticityState::zeros(n);
    let kc = dealias_cutoff(n);
    for kx in 0..=kc {
        for ky in -kc..=kc {
            if kx == 0 && ky <= 0 {
                continue;
            }
            let k = ((kx * kx + ky * ky) as f64).sqrt();
            let amp = k * k * (-(k / k_peak).powi(2)).exp();
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            s.set_mode((kx, ky), Complex64::new(a, b) * amp);
        }
    }
    let z = s.enstrophy();
    if z > 0.0 {
        let f = (enstrophy / z).sqrt();
        s.coeffs.iter_mut().for_each(|c| *c *= f);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_keeps_products_unaliased() {
        for n in [12usize, 16, 64, 128, 256] {
            let k = dealias_cutoff(n);
            assert!(3 * k < n as i64);
            assert!(3 * (k + 1) >= n as i64);
        }
    }

    #[test]
    fn random_field_is_valid() {
        let s = random_smooth_field(32, 4.0, 2.0, 3);
        s.check_invariants(1e-12).unwrap();
        assert!((s.enstrophy() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn physical_round_trip() {
        let s = random_smooth_field(32, 4.0, 1.0, 5);
        let mut fft = Fft2::new(32);
        let phys = s.to_physical(&mut fft);
        let back = VorticityState::from_physical(32, &phys, &mut fft);
        for (a, b) in s.coeffs.iter().zip(&back.coeffs) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
