use filtnoise::kernels::{gaussian_kernel, matern_kernel, Smoothness};
use filtnoise::noise::{
    empirical_autocovariance, ensemble_summary, integrated_path, simulate_path, standard_normals, white_noise_gap,
    FilteredNoiseSpec, SamplePath,
};
use filtnoise::rng::{derive_seed, stream};
use filtnoise::Error;
use std::f64::consts::PI;

fn gaussian_spec(tau: f64, dt: f64, t: f64, seed: u64) -> FilteredNoiseSpec {
    FilteredNoiseSpec::new(gaussian_kernel(), tau, dt, t, seed)
}

fn path_from(values: Vec<f64>, dt: f64) -> SamplePath {
    let spec = gaussian_spec(1.0, dt, dt * (values.len() - 1) as f64, 0);
    SamplePath {
        times: (0..values.len()).map(|i| i as f64 * dt).collect(),
        values,
        spec,
    }
}

/// Bartlett standard error of the biased autocovariance estimate at lag k
/// for a process with true autocovariance `g` (lags in samples).
fn bartlett_se(g: &dyn Fn(i64) -> f64, k: i64, n: usize, reach: i64) -> f64 {
    let s: f64 = (-reach..=reach).map(|j| g(j) * g(j) + g(j + k) * g(j - k)).sum();
    (s / n as f64).sqrt()
}

#[test]
fn long_path_has_unit_variance_and_gaussian_covariance() {
    let path = simulate_path(&gaussian_spec(1.0, 0.005, 2000.0, 7)).unwrap();
    assert_eq!(path.values.len(), path.times.len());
    let acf = empirical_autocovariance(&path, 200).unwrap();
    assert!((acf[0].1 - 1.0).abs() < 0.05, "variance {}", acf[0].1);
    assert!((acf[200].0 - 1.0).abs() < 1e-12);
    assert!((acf[200].1 - (-PI).exp()).abs() < 0.02, "C(1) {}", acf[200].1);
}

#[test]
fn fixed_seed_is_deterministic() {
    let k = matern_kernel(Smoothness::Finite(1.0)).unwrap();
    let s = FilteredNoiseSpec::new(k, 0.5, 0.01, 20.0, 99);
    assert_eq!(simulate_path(&s).unwrap().values, simulate_path(&s).unwrap().values);
    assert_ne!(simulate_path(&s).unwrap().values, simulate_path(&s.with_seed(100)).unwrap().values);
}

#[test]
fn invalid_specs_rejected() {
    assert!(matches!(simulate_path(&gaussian_spec(1.0, 1.5, 10.0, 1)), Err(Error::Domain(_))));
    assert!(matches!(simulate_path(&gaussian_spec(f64::INFINITY, 0.1, 10.0, 1)), Err(Error::Domain(_))));
    assert!(matches!(simulate_path(&gaussian_spec(1.0, -0.1, 10.0, 1)), Err(Error::Domain(_))));
}

#[test]
fn autocovariance_of_zero_path() {
    let acf = empirical_autocovariance(&path_from(vec![0.0; 100], 0.1), 10).unwrap();
    assert!(acf.iter().all(|p| p.1 == 0.0));
    assert!(matches!(empirical_autocovariance(&path_from(vec![0.0; 100], 0.1), 50), Err(Error::Domain(_))));
}

#[test]
fn autocovariance_of_white_sequence() {
    let n = 20_000;
    let x = standard_normals(&mut stream(3), n);
    let acf = empirical_autocovariance(&path_from(x, 1.0), 20).unwrap();
    for (k, (_, v)) in acf.iter().enumerate().skip(1) {
        assert!(v.abs() < 3.0 / (n as f64).sqrt(), "lag {k}: {v}");
    }
}

#[test]
fn autocovariance_of_ar1() {
    let n = 200_000;
    let e = standard_normals(&mut stream(4), n);
    let rho: f64 = 0.9;
    let mut x = vec![0.0; n];
    x[0] = e[0] / (1.0 - rho * rho).sqrt();
    for i in 1..n {
        x[i] = rho * x[i - 1] + e[i];
    }
    let acf = empirical_autocovariance(&path_from(x, 1.0), 10).unwrap();
    for k in 1..=10 {
        let r = acf[k].1 / acf[0].1;
        assert!((r - rho.powi(k as i32)).abs() < 0.02, "lag {k}: {r}");
    }
}

#[test]
fn integrated_path_degenerate_cases() {
    let zero = integrated_path(&path_from(vec![0.0; 11], 0.1));
    assert!(zero.values.iter().all(|v| *v == 0.0));
    let one = integrated_path(&path_from(vec![1.0; 11], 0.1));
    for (t, v) in one.times.iter().zip(&one.values) {
        assert!((t - v).abs() < 1e-12);
    }
}

#[test]
fn integrated_variance_grows_like_tau_t() {
    let tau = 0.1;
    let t = 20.0;
    let finals: Vec<f64> = (0..2000)
        .map(|r| {
            let p = simulate_path(&gaussian_spec(tau, 0.01, t, derive_seed(5, r))).unwrap();
            *integrated_path(&p).values.last().unwrap()
        })
        .collect();
    let var = finals.iter().map(|v| v * v).sum::<f64>() / finals.len() as f64;
    let ratio = var / t / tau;
    assert!((ratio - 1.0).abs() < 0.1, "Var[I(T)]/(τT) = {ratio}");
}

#[test]
fn white_noise_gap_within_bound() {
    let r = white_noise_gap(&gaussian_spec(0.1, 0.005, 10.0, 8), 500).unwrap();
    assert!((r.bound - (2.0 * 0.225079f64).sqrt() * 0.1).abs() < 1e-6);
    assert!((r.bound - 0.0671).abs() < 1e-4);
    assert!(r.rms_gap <= 1.1 * r.bound, "{} vs {}", r.rms_gap, r.bound);
    assert!(r.probe_times.len() >= 11);
    assert!(r.within(1.1), "{:?}", r.rms_at_probes);
    assert!(matches!(white_noise_gap(&gaussian_spec(0.1, 0.005, 10.0, 8), 50), Err(Error::Domain(_))));
}

#[test]
fn gap_bound_is_linear_in_tau_and_gap_shrinks() {
    let mut last_gap = f64::INFINITY;
    let mut last_bound = f64::NAN;
    for tau in [0.4, 0.2, 0.1, 0.05] {
        let r = white_noise_gap(&gaussian_spec(tau, tau / 20.0, 10.0, 9), 200).unwrap();
        if last_bound.is_finite() {
            assert!((r.bound - 0.5 * last_bound).abs() < 1e-15);
        }
        assert!(r.rms_gap < 1.1 * last_gap, "τ = {tau}: {} after {last_gap}", r.rms_gap);
        last_gap = r.rms_gap;
        last_bound = r.bound;
    }
}

#[test]
fn covariance_within_bartlett_band_and_stationary() {
    let dt = 0.05;
    let path = simulate_path(&gaussian_spec(1.0, dt, 2000.0, 10)).unwrap();
    let lags = 60;
    let c = |j: i64| (-PI * (j as f64 * dt).powi(2)).exp();
    let acf = empirical_autocovariance(&path, lags).unwrap();
    let n = path.values.len();
    let inside = (0..=lags)
        .filter(|&k| (acf[k].1 - c(k as i64)).abs() <= 1.96 * bartlett_se(&c, k as i64, n, 200))
        .count();
    assert!(inside as f64 >= 0.9 * (lags + 1) as f64, "{inside} of {}", lags + 1);

    let half = n / 2;
    let a = empirical_autocovariance(&path_from(path.values[..half].to_vec(), dt), lags).unwrap();
    let b = empirical_autocovariance(&path_from(path.values[half..].to_vec(), dt), lags).unwrap();
    for k in 0..=lags {
        // difference of two independent estimates: √2 × single-half SE
        let band = 2.0 * 1.96 * bartlett_se(&c, k as i64, half, 200) * 2f64.sqrt();
        assert!((a[k].1 - b[k].1).abs() <= band, "lag {k}");
    }
}

#[test]
fn paths_are_gaussian() {
    let s = ensemble_summary(&gaussian_spec(1.0, 0.05, 2000.0, 11), 4).unwrap();
    assert_eq!(s.seeds.len(), 4);
    assert!(s.skewness.abs() < 0.1, "skew {}", s.skewness);
    assert!(s.excess_kurtosis.abs() < 0.2, "kurt {}", s.excess_kurtosis);
    assert!((s.variance - 1.0).abs() < 0.05);
}
