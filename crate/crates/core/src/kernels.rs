//! Filtering kernels θ and their covariance functions C = θ∗θ.
//!
//! A kernel is admissible when it is nonnegative, even, and has unit L¹ and
//! L² norms with a finite first absolute moment. The covariance of the
//! filtered-noise process is then C(u) with C(0) = 1 and ∫₀^∞ C = 1/2.

use crate::error::{Error, Result};
use crate::quad::{integrate, quad};
use crate::special::{ln_bessel_k, scaled_power_bessel_k};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

/// Gaussian kernel is cut where e^{-2πx²} < 1e-16.
const GAUSSIAN_SUPPORT: f64 = 2.421_463_357_359_640_7;
/// Tail mass budget used to truncate Matérn kernels.
const MATERN_TAIL_MASS: f64 = 1e-10;
/// Lag step of tabulated (numerically convolved) covariances, in kernel units.
const LAG_STEP: f64 = 1e-3;
/// Quadrature tolerance for density checks in [`kernel_from_density`].
const DENSITY_CHECK_TOL: f64 = 1e-4;

/// Smoothness index of the Matérn family; `Infinite` selects the Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Smoothness {
    Finite(f64),
    Infinite,
}

impl Smoothness {
    /// Ordering key where `Infinite` sorts after every finite value.
    pub fn sort_key(&self) -> f64 {
        match self {
            Smoothness::Finite(b) => *b,
            Smoothness::Infinite => f64::INFINITY,
        }
    }

    /// The grid searched when fitting smoothness to estimated autocorrelations.
    pub fn default_grid() -> Vec<Smoothness> {
        [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
            .into_iter()
            .map(Smoothness::Finite)
            .chain(std::iter::once(Smoothness::Infinite))
            .collect()
    }
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoothness::Finite(b) => write!(f, "{b}"),
            Smoothness::Infinite => write!(f, "inf"),
        }
    }
}

/// Parameters of the Matérn kernel θ_β and its covariance C_β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternParams {
    pub beta: f64,
    /// γ_β = 2^{2β+1} Γ(β+1/2) Γ(β+1) / Γ(2β+1/2).
    pub gamma_beta: f64,
    ln_kernel_prefactor: f64,
    ln_cov_prefactor: f64,
}

impl MaternParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::Domain(format!(
                "Matérn smoothness must be finite and >= 0, got {beta}"
            )));
        }
        let lg_b_half = ln_gamma(beta + 0.5);
        let lg_b_one = ln_gamma(beta + 1.0);
        let lg_2b_half = ln_gamma(2.0 * beta + 0.5);
        let lg_2b_one = ln_gamma(2.0 * beta + 1.0);
        let ln_gamma_beta = (2.0 * beta + 1.0) * LN_2 + lg_b_half + lg_b_one - lg_2b_half;
        Ok(Self {
            beta,
            gamma_beta: ln_gamma_beta.exp(),
            ln_kernel_prefactor: (beta + 1.0) * LN_2 - 0.5 * PI.ln() + lg_b_one - lg_2b_half,
            ln_cov_prefactor: 0.5 * (2.0 / PI).ln() + lg_b_half + lg_b_one - lg_2b_half - lg_2b_one,
        })
    }

    fn kernel(&self, x: f64) -> f64 {
        let z = self.gamma_beta * x.abs();
        if z == 0.0 {
            return self.ln_kernel_prefactor.exp() * scaled_power_bessel_k(self.beta, 0.0);
        }
        (self.ln_kernel_prefactor + self.beta * z.ln() + ln_bessel_k(self.beta, z)).exp()
    }

    fn covariance(&self, u: f64) -> f64 {
        let z = self.gamma_beta * u.abs();
        if z == 0.0 {
            return 1.0;
        }
        let nu = 2.0 * self.beta + 0.5;
        (self.ln_cov_prefactor + nu * z.ln() + ln_bessel_k(nu, z)).exp()
    }
}

/// Uniformly tabulated function with local cubic (4-point Lagrange)
/// interpolation; zero outside the table.
#[derive(Debug, Clone)]
struct Table {
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl Table {
    fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let s = (x - self.start) / self.step;
        if s < 0.0 || s > (n - 1) as f64 {
            return 0.0;
        }
        let i = (s.floor() as usize).clamp(1, n.saturating_sub(3).max(1));
        if n < 4 {
            let j = s.floor() as usize;
            let t = s - j as f64;
            let b = self.values[(j + 1).min(n - 1)];
            return self.values[j] * (1.0 - t) + b * t;
        }
        let t = s - i as f64;
        let (y0, y1, y2, y3) = (
            self.values[i - 1],
            self.values[i],
            self.values[i + 1],
            self.values[i + 2],
        );
        // Lagrange basis on nodes -1, 0, 1, 2
        let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        w0 * y0 + w1 * y1 + w2 * y2 + w3 * y3
    }
}

/// A user density, either a closure or a piecewise-linear table.
#[derive(Clone)]
pub struct Density {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Density {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    /// Piecewise-linear interpolation of (x, density) pairs, zero outside.
    pub fn piecewise_linear(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Validation("density table needs at least two points".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Validation("density table x values must increase".into()));
        }
        Ok(Self::new(move |x| {
            let last = points.len() - 1;
            if x < points[0].0 || x > points[last].0 {
                return 0.0;
            }
            let i = points.partition_point(|p| p.0 <= x).clamp(1, last);
            let (x0, y0) = points[i - 1];
            let (x1, y1) = points[i];
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        }))
    }

    /// Loads a two-column CSV `x,density` (an optional non-numeric header
    /// line is skipped).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = cols.iter().map(|c| c.parse()).collect();
            match parsed {
                Ok(v) if v.len() == 2 => pts.push((v[0], v[1])),
                _ if lineno == 0 && pts.is_empty() => continue,
                _ => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("expected two numeric columns, got `{line}`"),
                    })
                }
            }
        }
        Self::piecewise_linear(pts)
    }

    fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Density(..)")
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Gaussian,
    Matern(MaternParams),
    /// θ(x) = density(x / a) / a
    Rescaled { density: Density, a: f64 },
}

impl Shape {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Shape::Gaussian => std::f64::consts::SQRT_2 * (-2.0 * PI * x * x).exp(),
            Shape::Matern(p) => p.kernel(x),
            Shape::Rescaled { density, a } => density.eval(x / a) / a,
        }
    }
}

/// How a covariance function is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovarianceForm {
    Analytic,
    NumericSelfConvolution,
}

#[derive(Debug, Clone)]
enum CovRepr {
    Gaussian,
    Matern(MaternParams),
    Table(Arc<Table>),
}

/// Covariance C(u) of the filtered-noise process, u being the lag in units
/// of τ.
#[derive(Debug, Clone)]
pub struct CovarianceFunction {
    repr: CovRepr,
    scale: f64,
    support: f64,
}

impl CovarianceFunction {
    pub fn evaluate(&self, u: f64) -> f64 {
        let u = u.abs();
        let v = match &self.repr {
            CovRepr::Gaussian => (-PI * u * u).exp(),
            CovRepr::Matern(p) => p.covariance(u),
            CovRepr::Table(t) => t.eval(u),
        };
        self.scale * v
    }

    pub fn form(&self) -> CovarianceForm {
        match self.repr {
            CovRepr::Table(_) => CovarianceForm::NumericSelfConvolution,
            _ => CovarianceForm::Analytic,
        }
    }

    /// Lag beyond which C is treated as zero (twice the kernel support).
    pub fn support(&self) -> f64 {
        self.support
    }
}

/// An admissible filtering kernel together with its covariance.
#[derive(Debug, Clone)]
pub struct Kernel {
    shape: Shape,
    scale: f64,
    support_radius: f64,
    first_abs_moment: f64,
    covariance: CovarianceFunction,
    label: String,
}

impl Kernel {
    pub fn evaluate(&self, x: f64) -> f64 {
        self.scale * self.shape.eval(x)
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// M = ∫ |x| θ(x) dx.
    pub fn first_abs_moment(&self) -> f64 {
        self.first_abs_moment
    }

    pub fn covariance(&self) -> &CovarianceFunction {
        &self.covariance
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The kernel is log-divergent at the origin (Matérn with β = 0).
    pub fn is_singular_at_origin(&self) -> bool {
        !self.shape.eval(0.0).is_finite()
    }

    pub fn smoothness(&self) -> Option<Smoothness> {
        match &self.shape {
            Shape::Gaussian => Some(Smoothness::Infinite),
            Shape::Matern(p) => Some(Smoothness::Finite(p.beta)),
            Shape::Rescaled { .. } => None,
        }
    }

    /// Same kernel multiplied by `factor` (which breaks admissibility unless
    /// `factor == 1`). Mainly useful to exercise [`validate_kernel`].
    pub fn scaled(&self, factor: f64) -> Kernel {
        let mut k = self.clone();
        k.scale *= factor;
        k.covariance.scale *= factor * factor;
        k.first_abs_moment *= factor;
        k.label = format!("{}*{}", factor, self.label);
        k
    }

    /// Mean of θ over the cell [x - h/2, x + h/2]; finite even where θ is
    /// singular.
    pub fn cell_average(&self, x: f64, h: f64) -> f64 {
        let (a, b) = (x - 0.5 * h, x + 0.5 * h);
        let f = |y: f64| self.evaluate(y);
        let v = if a < 0.0 && b > 0.0 {
            quad(f, a, 0.0, 1e-13) + quad(f, 0.0, b, 1e-13)
        } else {
            quad(f, a, b, 1e-13)
        };
        v / h
    }

    /// ∫ θ(u - r) θ(r) dr by adaptive quadrature, split at the kernel's
    /// possible singular points r = 0 and r = u. Independent of the stored
    /// covariance representation.
    pub fn self_convolution_at(&self, u: f64) -> f64 {
        let u = u.abs();
        let r = self.support_radius;
        let f = |s: f64| self.evaluate(u - s) * self.evaluate(s);
        let mut pts = vec![-r, 0.0, u, u + r];
        pts.dedup();
        pts.windows(2)
            .map(|w| integrate(f, w[0], w[1], 1e-13, 1e-12).value)
            .sum()
    }

    /// ∫ g(θ(x)) over the support, split at the origin.
    fn integral_of(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let r = self.support_radius;
        let f = |x: f64| g(x, self.evaluate(x));
        integrate(&f, -r, 0.0, 1e-13, 1e-12).value + integrate(&f, 0.0, r, 1e-13, 1e-12).value
    }
}

/// θ(x) = √2 e^{-2πx²} with C(u) = e^{-πu²} and M = √2/(2π).
pub fn gaussian_kernel() -> Kernel {
    Kernel {
        shape: Shape::Gaussian,
        scale: 1.0,
        support_radius: GAUSSIAN_SUPPORT,
        first_abs_moment: std::f64::consts::SQRT_2 / (2.0 * PI),
        covariance: CovarianceFunction {
            repr: CovRepr::Gaussian,
            scale: 1.0,
            support: 2.0 * GAUSSIAN_SUPPORT,
        },
        label: "gaussian".into(),
    }
}

/// Covariance C_β alone, without building the kernel (no support search for
/// θ_β). The reported support is where C_β drops below 1e-16.
pub fn matern_covariance(beta: Smoothness) -> Result<CovarianceFunction> {
    match beta {
        Smoothness::Infinite => Ok(gaussian_kernel().covariance),
        Smoothness::Finite(b) => {
            let params = MaternParams::new(b)?;
            let mut support = 1.0 / params.gamma_beta;
            while params.covariance(support) > 1e-16 {
                support *= 1.25;
            }
            Ok(CovarianceFunction {
                repr: CovRepr::Matern(params),
                scale: 1.0,
                support,
            })
        }
    }
}

/// Matérn kernel θ_β. `Smoothness::Infinite` returns the Gaussian kernel.
pub fn matern_kernel(beta: Smoothness) -> Result<Kernel> {
    let beta = match beta {
        Smoothness::Infinite => return Ok(gaussian_kernel()),
        Smoothness::Finite(b) => b,
    };
    let params = MaternParams::new(beta)?;
    let shape = Shape::Matern(params);
    let g = params.gamma_beta;
    let tail = |r: f64| quad(|x| shape.eval(x), r, r + 60.0 / g, 1e-16);
    // bisection on the one-sided tail mass; total outside mass is twice this
    let (mut lo, mut hi) = (0.0, 5.0 / g);
    while 2.0 * tail(hi) > MATERN_TAIL_MASS {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if 2.0 * tail(mid) > MATERN_TAIL_MASS {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 * hi {
            break;
        }
    }
    let support_radius = hi;
    let m = 2.0 * quad(|x| x * shape.eval(x), 0.0, support_radius, 1e-14);
    Ok(Kernel {
        shape,
        scale: 1.0,
        support_radius,
        first_abs_moment: m,
        covariance: CovarianceFunction {
            repr: CovRepr::Matern(params),
            scale: 1.0,
            support: 2.0 * support_radius,
        },
        label: format!("matern:{beta}"),
    })
}

/// Builds a kernel from a probability density supported on `[-support, support]`:
/// θ(x) = density(x/A)/A with A = ∫ density², so that ‖θ‖₂ = 1. The
/// covariance is tabulated by trapezoid self-convolution and interpolated.
pub fn kernel_from_density(density: Density, support: f64) -> Result<Kernel> {
    if !(support.is_finite() && support > 0.0) {
        return Err(Error::Domain(format!("support radius must be positive, got {support}")));
    }
    let d = |x: f64| density.eval(x);
    let mass = quad(d, -support, 0.0, 1e-12) + quad(d, 0.0, support, 1e-12);
    if (mass - 1.0).abs() > DENSITY_CHECK_TOL {
        return Err(Error::Validation(format!(
            "density integrates to {mass}, expected 1"
        )));
    }
    let asym = quad(|x| (d(x) - d(-x)).abs(), 0.0, support, 1e-12);
    if asym > DENSITY_CHECK_TOL {
        return Err(Error::Validation(format!(
            "density is not even: ∫|f(x) - f(-x)| = {asym}"
        )));
    }
    let probe = 2001;
    for i in 0..probe {
        let x = -support + 2.0 * support * i as f64 / (probe - 1) as f64;
        if d(x) < 0.0 {
            return Err(Error::Validation(format!("density is negative at x = {x}")));
        }
    }
    let a = quad(|x| d(x) * d(x), -support, 0.0, 1e-13) + quad(|x| d(x) * d(x), 0.0, support, 1e-13);
    let shape = Shape::Rescaled { density: density.clone(), a };
    let radius = a * support;
    let m = 2.0 * quad(|x| x * shape.eval(x), 0.0, radius, 1e-13);

    // θ sampled on j·h, |j| ≤ J; discrete self-convolution gives C at lags m·h
    let j_max = (radius / LAG_STEP).ceil() as usize;
    let samples: Vec<f64> = (0..=2 * j_max)
        .map(|j| shape.eval((j as f64 - j_max as f64) * LAG_STEP))
        .collect();
    let conv = crate::fft::convolve(&samples, &samples);
    // conv[2J + m] is the lag-m value
    let lags: Vec<f64> = conv[2 * j_max..]
        .iter()
        .map(|v| (v * LAG_STEP).max(0.0))
        .collect();
    let table = Table {
        start: 0.0,
        step: LAG_STEP,
        values: lags,
    };
    Ok(Kernel {
        shape,
        scale: 1.0,
        support_radius: radius,
        first_abs_moment: m,
        covariance: CovarianceFunction {
            repr: CovRepr::Table(Arc::new(table)),
            scale: 1.0,
            support: 2.0 * radius,
        },
        label: "custom".into(),
    })
}

/// One row of a [`ValidationReport`].
#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub label: String,
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks the five admissibility conditions numerically. Failures are
/// reported, never raised.
pub fn validate_kernel(k: &Kernel, tol: f64) -> Result<ValidationReport> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let r = k.support_radius;
    let probes = 4001;
    let mut min_val = f64::INFINITY;
    let mut asym: f64 = 0.0;
    for i in 0..probes {
        let x = r * i as f64 / (probes - 1) as f64;
        let (a, b) = (k.evaluate(x), k.evaluate(-x));
        if a.is_finite() && b.is_finite() {
            min_val = min_val.min(a).min(b);
            asym = asym.max((a - b).abs());
        }
    }
    let neg = (-min_val).max(0.0);
    let l1 = k.integral_of(|_, t| t.abs());
    let l2 = k.integral_of(|_, t| t * t);
    let m = k.integral_of(|x, t| x.abs() * t);
    let checks = vec![
        ConditionCheck { name: "nonnegative", passed: neg <= tol, residual: neg },
        ConditionCheck { name: "even", passed: asym <= tol, residual: asym },
        ConditionCheck { name: "l1_norm", passed: (l1 - 1.0).abs() <= tol, residual: (l1 - 1.0).abs() },
        ConditionCheck { name: "l2_norm", passed: (l2.sqrt() - 1.0).abs() <= tol, residual: (l2.sqrt() - 1.0).abs() },
        ConditionCheck { name: "finite_moment", passed: m.is_finite(), residual: m },
    ];
    Ok(ValidationReport {
        label: k.label.clone(),
        checks,
    })
}

/// Γ(s) = ∫₀^s C(r) dr by adaptive quadrature.
pub fn gamma_integral(c: &CovarianceFunction, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("lag must be >= 0, got {s}")));
    }
    let upper = s.min(c.support());
    Ok(integrate(|r| c.evaluate(r), 0.0, upper, 1e-14, 1e-13).value)
}

/// Kernel selector as written in configuration files.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Gaussian,
    Matern(Smoothness),
    Custom { path: std::path::PathBuf, support: Option<f64> },
}

impl KernelSpec {
    /// Parses `gaussian`, `matern:<beta>`, `matern:inf` or `custom:<path>`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("gaussian") {
            return Ok(KernelSpec::Gaussian);
        }
        if let Some(b) = s.strip_prefix("matern:") {
            let b = b.trim();
            if b.eq_ignore_ascii_case("inf") || b.eq_ignore_ascii_case("infinity") {
                return Ok(KernelSpec::Matern(Smoothness::Infinite));
            }
            let beta: f64 = b
                .parse()
                .map_err(|_| Error::Validation(format!("bad Matérn smoothness `{b}`")))?;
            return Ok(KernelSpec::Matern(Smoothness::Finite(beta)));
        }
        if let Some(p) = s.strip_prefix("custom:") {
            return Ok(KernelSpec::Custom { path: p.trim().into(), support: None });
        }
        Err(Error::Validation(format!("unknown kernel `{s}`")))
    }

    pub fn build(&self) -> Result<Kernel> {
        match self {
            KernelSpec::Gaussian => Ok(gaussian_kernel()),
            KernelSpec::Matern(b) => matern_kernel(*b),
            KernelSpec::Custom { path, support } => {
                let text_support = match support {
                    Some(s) => *s,
                    None => {
                        // support = largest |x| in the table
                        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                        text.lines()
                            .filter_map(|l| l.split(',').next()?.trim().parse::<f64>().ok())
                            .fold(0.0_f64, |m, x| m.max(x.abs()))
                    }
                };
                let mut k = kernel_from_density(Density::from_csv(path)?, text_support)?;
                k.label = format!("custom:{}", path.display());
                Ok(k)
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Gaussian => f.write_str("gaussian"),
            KernelSpec::Matern(b) => write!(f, "matern:{b}"),
            KernelSpec::Custom { path, .. } => write!(f, "custom:{}", path.display()),
        }
    }
}
