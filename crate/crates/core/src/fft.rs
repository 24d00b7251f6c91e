//! FFT plumbing over `rustfft`: square 2D transforms for the spectral
//! solver, and 1D helpers (linear convolution, lagged autocovariance) for
//! the time-series code.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Square N×N complex transform, row-major storage `a[ix * n + iy]`.
///
/// `forward` maps grid values to Fourier coefficients normalized so that
/// `f(x) = Σ_k f̂(k) e^{i k·x}`; `inverse` is the unscaled synthesis.
///
/// The `*_transposed` variants keep the physical-space array in transposed
/// order (`p[iy * n + ix]`), which saves one transpose per transform; they
/// suit pointwise products where the layout does not matter.
pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    work: Vec<Complex64>,
}

const BLOCK: usize = 8;

fn transpose_into(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for bi in (0..n).step_by(BLOCK) {
        for bj in (0..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                for j in bj..(bj + BLOCK).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); len],
            work: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Row index ranges holding wavenumbers |k| <= band (all rows if None).
    fn row_ranges(&self, band: Option<i64>) -> [(usize, usize); 2] {
        let n = self.n;
        match band {
            Some(b) if (2 * b as usize + 1) < n => {
                let b = b as usize;
                [(0, b + 1), (n - b, n)]
            }
            _ => [(0, n), (n, n)],
        }
    }

    fn rows(&mut self, a: &mut [Complex64], forward: bool, ranges: [(usize, usize); 2]) {
        let plan = if forward { &self.fwd } else { &self.inv };
        let n = self.n;
        for (lo, hi) in ranges {
            if hi > lo {
                plan.process_with_scratch(&mut a[lo * n..hi * n], &mut self.scratch);
            }
        }
    }

    fn transpose(&mut self, a: &mut Vec<Complex64>) {
        transpose_into(a, &mut self.work, self.n);
        std::mem::swap(a, &mut self.work);
    }

    pub fn forward(&mut self, a: &mut Vec<Complex64>) {
        self.transpose(a);
        self.forward_transposed(a, None);
    }

    pub fn inverse(&mut self, a: &mut Vec<Complex64>) {
        self.inverse_transposed(a, None);
        self.transpose(a);
    }

    /// Spectral (standard order) to physical (transposed order). With
    /// `band = Some(b)` the input must vanish for |k_x| > b.
    pub fn inverse_transposed(&mut self, a: &mut Vec<Complex64>, band: Option<i64>) {
        debug_assert_eq!(a.len(), self.n * self.n);
        let all = self.row_ranges(None);
        self.rows(a, false, self.row_ranges(band));
        self.transpose(a);
        self.rows(a, false, all);
    }

    /// Physical (transposed order) to spectral (standard order), scaled by
    /// 1/N². With `band = Some(b)` only rows |k_x| <= b are computed; the
    /// others are set to zero.
    pub fn forward_transposed(&mut self, a: &mut Vec<Complex64>, band: Option<i64>) {
        debug_assert_eq!(a.len(), self.n * self.n);
        let n = self.n;
        let all = self.row_ranges(None);
        self.rows(a, true, all);
        self.transpose(a);
        let ranges = self.row_ranges(band);
        self.rows(a, true, ranges);
        let s = 1.0 / (n * n) as f64;
        let zero = Complex64::new(0.0, 0.0);
        let (r0, r1) = (ranges[0], ranges[1]);
        for (row, chunk) in a.chunks_exact_mut(n).enumerate() {
            let kept = (row >= r0.0 && row < r0.1) || (row >= r1.0 && row < r1.1);
            if kept {
                chunk.iter_mut().for_each(|v| *v *= s);
            } else {
                chunk.fill(zero);
            }
        }
    }
}

/// Signed wavenumber of FFT index `i` on an `n`-point grid.
#[inline]
pub fn wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// FFT index of signed wavenumber `k` on an `n`-point grid.
#[inline]
pub fn index_of(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

fn fft_len(min: usize) -> usize {
    min.next_power_of_two()
}

/// Full linear convolution of `a` and `b` (length `a.len() + b.len() - 1`).
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let len = fft_len(out_len);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fa.resize(len, Complex64::new(0.0, 0.0));
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fb.resize(len, Complex64::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let s = 1.0 / len as f64;
    fa.iter().take(out_len).map(|c| c.re * s).collect()
}

/// Lagged sums `Σ_{i} x[i] x[i+k]` for k = 0..=max_lag (no normalization,
/// no centering).
pub fn lagged_products(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return vec![0.0; max_lag + 1];
    }
    let len = fft_len(n + max_lag + 1);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    fwd.process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    inv.process(&mut buf);
    let s = 1.0 / len as f64;
    (0..=max_lag)
        .map(|k| if k < n { buf[k].re * s } else { 0.0 })
        .collect()
}
