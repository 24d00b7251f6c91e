//! One-dimensional quadrature: adaptive Gauss–Kronrod (7/15) with a global
//! error budget, plus the trapezoid helpers used on sampled data.

use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

/// Integrates `f` over `[a, b]`, bisecting the worst segment until the summed
/// error estimate drops below `max(abs_tol, rel_tol·|I|)` or the segment
/// budget is spent. Endpoint singularities of log or power type are handled
/// by the bisection (the integrand is never evaluated at the endpoints).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Quadrature {
    if a == b {
        return Quadrature { value: 0.0, error: 0.0 };
    }
    if b < a {
        let q = integrate(f, b, a, abs_tol, rel_tol);
        return Quadrature { value: -q.value, error: q.error };
    }
    let max_segments = 4000;
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, err: e });
    let mut total = v;
    let mut total_err = e;
    let mut n = 1;
    while total_err > abs_tol.max(rel_tol * total.abs()) && n < max_segments {
        let seg = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            heap.push(seg);
            break;
        }
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.err;
        heap.push(Segment { a: seg.a, b: mid, value: v1, err: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, err: e2 });
        n += 1;
    }
    // resum to shed accumulated cancellation in the running totals
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.err).sum();
    Quadrature { value, error }
}

/// Shorthand for [`integrate`] returning only the value.
pub fn quad<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    integrate(f, a, b, tol, tol).value
}

/// Trapezoid rule on uniformly spaced samples.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => step * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Running trapezoid integral starting at zero.
pub fn cumulative_trapezoid(values: &[f64], step: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * step * (values[i - 1] + v);
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = quad(|x| 3.0 * x * x - x + 2.0, -1.0, 2.0, 1e-14);
        assert!((v - 13.5).abs() < 1e-12);
    }

    #[test]
    fn log_singularity() {
        // ∫_0^1 ln x dx = -1
        let q = integrate(|x: f64| x.ln(), 0.0, 1.0, 1e-12, 1e-12);
        assert!((q.value + 1.0).abs() < 1e-10, "{q:?}");
    }

    #[test]
    fn gaussian_mass() {
        let v = quad(|x: f64| (-x * x).exp(), -10.0, 10.0, 1e-13);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn reversed_limits() {
        let v = quad(|x| x, 1.0, 0.0, 1e-12);
        assert!((v + 0.5).abs() < 1e-14);
    }

    #[test]
    fn trapezoid_helpers() {
        assert_eq!(trapezoid(&[], 0.1), 0.0);
        let ones = vec![1.0; 11];
        assert!((trapezoid(&ones, 0.1) - 1.0).abs() < 1e-15);
        let c = cumulative_trapezoid(&ones, 0.1);
        assert_eq!(c[0], 0.0);
        assert!((c[10] - 1.0).abs() < 1e-15);
    }
}
