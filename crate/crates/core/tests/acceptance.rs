//! Acceptance suite: runs every criterion in sequence and prints one line
//! per criterion followed by a summary. A failed criterion is reported, not
//! raised, so the remaining criteria still run and the workspace test run
//! is not aborted.

mod common;

use common::{ar1, simpson};
use filtnoise::diagnostics::{analyze, autocorrelation, AnalysisOptions, Samples};
use filtnoise::io::{dispersion_table, mode_series_table, write_csv, write_json, Table};
use filtnoise::kernels::{gamma_integral, gaussian_kernel, matern_kernel, Kernel, Smoothness};
use filtnoise::noise::{simulate_path, white_noise_gap, FilteredNoiseSpec};
use filtnoise::nse2d::{
    conservation_probe, encode_snapshot, random_smooth_field, run, ForcingSpec, Integrator, RunSpec, SolverConfig,
};
use filtnoise::pipeline::{desk_run, DeskConfig, DeskResult};
use filtnoise::rng::{derive_seed, stream};
use filtnoise::synthfield::{build_umax, q_matrix, ShellSpec};
use filtnoise::transport::{
    advect, linear_slope, predict_variance, regime_check, AdvectOptions, Field, StartPositions, VariancePrediction,
};
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// ∫ g(x, θ(x)) over the support by Simpson sums on the graded substitution
/// x = r s³, which resolves the logarithmic singularity of the roughest kernel.
fn kernel_integral(k: &Kernel, g: impl Fn(f64) -> f64) -> f64 {
    let r = k.support_radius();
    let half = |sign: f64| {
        simpson(
            |s| if s == 0.0 { 0.0 } else { g(k.evaluate(sign * r * s * s * s)) * 3.0 * r * s * s },
            0.0,
            1.0,
            20_000,
        )
    };
    half(1.0) + half(-1.0)
}

fn kernel_normalizations() -> Outcome {
    let mut kernels = vec![gaussian_kernel()];
    for b in [0.0, 0.5, 1.0, 2.0, 8.0] {
        kernels.push(matern_kernel(Smoothness::Finite(b)).unwrap());
    }
    let mut worst = [0.0f64; 4];
    for k in &kernels {
        let c = k.covariance();
        let errs = [
            (kernel_integral(k, |t| t) - 1.0).abs(),
            (kernel_integral(k, |t| t * t) - 1.0).abs(),
            (c.evaluate(0.0) - 1.0).abs(),
            (gamma_integral(c, f64::INFINITY).unwrap() - 0.5).abs(),
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    let pass = worst[0] <= 1e-4 && worst[1] <= 1e-4 && worst[2] <= 1e-6 && worst[3] <= 1e-4;
    outcome(
        pass,
        format!("max errors: L1 {:.1e}, L2 {:.1e}, C(0) {:.1e}, half-integral {:.1e}", worst[0], worst[1], worst[2], worst[3]),
    )
}

fn covariance_oracle() -> Outcome {
    let kernels = [
        gaussian_kernel(),
        matern_kernel(Smoothness::Finite(0.0)).unwrap(),
        matern_kernel(Smoothness::Finite(1.0)).unwrap(),
    ];
    let lags: Vec<f64> = (0..=400).map(|i| i as f64 * 0.01).collect();
    let sup = kernels
        .iter()
        .flat_map(|k| lags.iter().map(move |&u| (k.covariance().evaluate(u) - k.self_convolution_at(u)).abs()))
        .fold(0.0, f64::max);
    let c0 = kernels[1].covariance();
    let ou = lags.iter().map(|&u| (c0.evaluate(u) - (-2.0 * u).exp()).abs()).fold(0.0, f64::max);
    outcome(sup <= 1e-5 && ou <= 1e-8, format!("sup |C - θ*θ| {sup:.1e}, sup |C₀ - e^(-2u)| {ou:.1e}"))
}

fn gap_bound() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for tau in [0.4, 0.2, 0.1, 0.05] {
        let spec = FilteredNoiseSpec::new(gaussian_kernel(), tau, tau / 20.0, 10.0, 31);
        let r = white_noise_gap(&spec, 500).unwrap();
        let worst = r.rms_at_probes.iter().copied().fold(0.0, f64::max);
        pass &= r.within(1.1);
        parts.push(format!("τ={tau}: {:.3}", worst / r.bound));
    }
    outcome(pass, format!("max RMS gap / bound: {}", parts.join(", ")))
}

fn process_statistics() -> Outcome {
    let tau = 1.0;
    let path = simulate_path(&FilteredNoiseSpec::new(gaussian_kernel(), tau, 0.05, 2000.0 * tau, 41)).unwrap();
    let est = autocorrelation(&path, 3.0 * tau).unwrap().with_bartlett(0.95).unwrap();
    let ci = est.ci_halfwidths.as_ref().unwrap();
    let (mut used, mut inside) = (0usize, 0usize);
    for k in 0..est.values.len() {
        let truth = (-PI * (est.lags[k] / tau).powi(2)).exp();
        if truth > 0.1 {
            used += 1;
            inside += usize::from((est.values[k] - truth).abs() <= ci[k]);
        }
    }
    let d = analyze(&path, None, &AnalysisOptions::default()).unwrap();
    let tau_hat = d.tau.unwrap_or(f64::NAN);
    let frac = inside as f64 / used as f64;
    outcome(
        frac >= 0.9 && (tau_hat / tau - 1.0).abs() <= 0.05,
        format!("{inside}/{used} lags inside band ({frac:.2}), τ estimate {tau_hat:.4}"),
    )
}

fn enstrophy_conservation() -> Outcome {
    let state = random_smooth_field(64, 6.0, 1.0, 51);
    let cfg = SolverConfig {
        n: 64,
        nu: 0.0,
        alpha: 0.0,
        dt: 1e-3,
        forcing: None,
        seed: 51,
        integrator: Integrator::ImplicitMidpoint,
    };
    let drift = conservation_probe(&state, &cfg, 100).unwrap();
    outcome(drift < 1e-10, format!("relative enstrophy drift {drift:.1e} after 100 steps"))
}

const FORCED_MODE: (i64, i64) = (32, 0);
const INERTIAL_MODES: [(i64, i64); 5] = [(3, 4), (6, 8), (12, 16), (30, 40), (60, 60)];

fn desk_config() -> DeskConfig {
    let solver = SolverConfig {
        n: 256,
        nu: 2e-3,
        alpha: 1.0,
        dt: 5e-3,
        forcing: Some(ForcingSpec::new(32, 1.0)),
        seed: 11,
        integrator: Integrator::Rk3,
    };
    let mut run = RunSpec::new(solver, 300.0);
    run.spin_up = 10.0;
    run.max_spin_up = 30.0;
    let mut cfg = DeskConfig::new(run, 30.0, 5);
    cfg.diag_modes = INERTIAL_MODES[..3]
        .iter()
        .chain(&[FORCED_MODE])
        .chain(&INERTIAL_MODES[3..])
        .copied()
        .collect();
    cfg
}

fn dns_slopes(r: &DeskResult) -> Outcome {
    let find = |k: (i64, i64)| r.diagnostics.iter().find(|d| d.mode == Some(k)).unwrap();
    let forced = find(FORCED_MODE).v_initial_slope.unwrap_or(f64::NAN);
    let inertial: Vec<f64> = INERTIAL_MODES.iter().map(|&k| find(k).v_initial_slope.unwrap_or(f64::NAN)).collect();
    let taus: Vec<f64> = INERTIAL_MODES.iter().map(|&k| find(k).tau.unwrap_or(f64::NAN)).collect();
    let corr = r.cross.max_off_diagonal();
    let pass = (0.8..=1.2).contains(&forced)
        && inertial.iter().all(|s| (1.6..=2.2).contains(s))
        && taus.windows(2).all(|w| w[1] < w[0])
        && corr < 0.15;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ");
    outcome(
        pass,
        format!(
            "forced slope {forced:.2}, inertial slopes [{}], τ [{}], max |corr| {corr:.3}",
            fmt(&inertial),
            fmt(&taus)
        ),
    )
}

fn bartlett_coverage() -> Outcome {
    let rho: f64 = 0.9;
    let truth = rho.powi(10);
    let hits: usize = (0..500u64)
        .into_par_iter()
        .map(|r| {
            let x = ar1(rho, 100_000, derive_seed(71, r));
            let est = autocorrelation(&Samples { values: &x, step: 1.0 }, 10.0).unwrap().with_bartlett(0.95).unwrap();
            usize::from((est.values[10] - truth).abs() <= est.ci_halfwidths.unwrap()[10])
        })
        .sum();
    let coverage = hits as f64 / 500.0;
    outcome((0.92..=0.98).contains(&coverage), format!("coverage {coverage:.3} at lag 10"))
}

fn q_isotropization() -> Outcome {
    let shell = ShellSpec::new(32, 1).unwrap();
    let mut rng = stream(81);
    let worst = (0..100)
        .map(|_| {
            let x = [rng.random::<f64>() * 2.0 * PI, rng.random::<f64>() * 2.0 * PI];
            q_matrix(&shell, x).unwrap().deviation
        })
        .fold(0.0, f64::max);
    outcome(worst < 0.1, format!("max relative deviation {worst:.4} over 100 points"))
}

fn two_regime_dispersion() -> Outcome {
    let (tau, energy) = (0.01, 1.0);
    let field = build_umax(energy, ShellSpec::new(14, 1).unwrap(), gaussian_kernel(), tau, 91).unwrap();
    let mut o = AdvectOptions::new(10_000, tau / 100.0, 50.0 * tau, 92);
    o.realizations = 100;
    o.start = StartPositions::Uniform;
    let mc = advect(&Field::Synthetic(&field), &o).unwrap();
    let pred = VariancePrediction::new(field.kernel.covariance().clone(), tau, energy).unwrap();

    let mut worst = 0.0f64;
    for (t, v) in mc.times.iter().zip(&mc.var_x) {
        if *t >= tau / 10.0 - 1e-12 && *t <= 30.0 * tau + 1e-12 {
            worst = worst.max((v / predict_variance(&pred, *t).unwrap() - 1.0).abs());
        }
    }
    let log_times: Vec<f64> = (0..200).map(|i| tau / 100.0 * 1e4f64.powf(i as f64 / 199.0)).collect();
    let regime = regime_check(&pred.curve(&log_times).unwrap(), tau).unwrap();
    // least-squares prefactor of var_x = a t² over t ≤ τ/10
    let (num, den) = mc
        .times
        .iter()
        .zip(&mc.var_x)
        .filter(|(t, _)| **t > 0.0 && **t <= tau / 10.0 + 1e-12)
        .fold((0.0, 0.0), |(n, d), (t, v)| (n + t * t * v, d + t.powi(4)));
    let prefactor = num / den;
    let long = linear_slope(&mc, 10.0 * tau, 50.0 * tau).unwrap();
    let pass = worst <= 0.15
        && (regime.slope_short - 2.0).abs() <= 0.1
        && (regime.slope_long - 1.0).abs() <= 0.1
        && (prefactor / (energy / 2.0) - 1.0).abs() <= 0.05
        && (long / (tau * energy / 2.0) - 1.0).abs() <= 0.1;
    outcome(
        pass,
        format!(
            "max |MC/prediction - 1| {worst:.3}, prediction slopes {:.3}/{:.3}, prefactor {prefactor:.4} (E/2 = {}), long slope {long:.5} (τE/2 = {})",
            regime.slope_short,
            regime.slope_long,
            energy / 2.0,
            tau * energy / 2.0
        ),
    )
}

fn end_to_end(r: &DeskResult) -> Outcome {
    let (d, m) = (r.dns.long_slope, r.model.long_slope);
    let ratio = d.max(m) / d.min(m);
    let short = |c: &Option<filtnoise::transport::RegimeReport>| c.as_ref().map(|x| x.slope_short).unwrap_or(f64::NAN);
    let (sd, sm) = (short(&r.dns.regime), short(&r.model.regime));
    outcome(
        d > 0.0 && m > 0.0 && ratio <= 2.0 && sd > 1.5 && sm > 1.5,
        format!(
            "shell k={} E={:.4} τ={:.3}; long slopes DNS {d:.4} model {m:.4} (ratio {ratio:.2}); short slopes {sd:.2}/{sm:.2}",
            r.shell.k_max, r.shell.energy, r.shell.tau
        ),
    )
}

/// Bytes a stage writes into a fresh file.
fn bytes(write: impl Fn(&Path)) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("out");
    write(&p);
    std::fs::read(&p).unwrap()
}

fn small_desk() -> DeskConfig {
    let solver = SolverConfig {
        n: 32,
        nu: 0.01,
        alpha: 0.5,
        dt: 0.01,
        forcing: Some(ForcingSpec::new(4, 1.0)),
        seed: 5,
        integrator: Integrator::Rk3,
    };
    let mut run = RunSpec::new(solver, 40.0);
    run.spin_up = 5.0;
    run.max_spin_up = 5.0;
    run.sample_every = 2;
    let mut cfg = DeskConfig::new(run, 30.0, 9);
    cfg.tracers.trajectories = 100;
    cfg.tracers.record_every = 10;
    cfg.diag_modes = vec![(1, 1), (4, 0)];
    cfg.model_trajectories = 100;
    cfg.model_realizations = 10;
    cfg.steps_per_tau = 20;
    cfg
}

fn determinism() -> Outcome {
    let stages: Vec<(&str, Box<dyn Fn() -> Vec<u8>>)> = vec![
        (
            "kernels",
            Box::new(|| {
                bytes(|p| {
                    let k = matern_kernel(Smoothness::Finite(1.5)).unwrap();
                    let mut t = Table::new(&["u", "c", "theta"]);
                    for i in 0..200 {
                        let u = i as f64 * 0.02;
                        t.push(vec![u, k.covariance().evaluate(u), k.evaluate(u)]);
                    }
                    write_csv(p, &t).unwrap();
                })
            }),
        ),
        (
            "noise",
            Box::new(|| {
                bytes(|p| {
                    let s = simulate_path(&FilteredNoiseSpec::new(gaussian_kernel(), 0.5, 0.01, 50.0, 3)).unwrap();
                    let mut t = Table::new(&["t", "xi"]);
                    for (a, b) in s.times.iter().zip(&s.values) {
                        t.push(vec![*a, *b]);
                    }
                    write_csv(p, &t).unwrap();
                })
            }),
        ),
        (
            "nse2d",
            Box::new(|| {
                let mut spec = small_desk().run;
                spec.duration = 2.0;
                spec.modes = vec![(1, 2), (3, 0)];
                let out = run(&spec).unwrap();
                let mut b = encode_snapshot(&out.final_state, spec.solver.nu, spec.solver.alpha, spec.solver.seed);
                for s in &out.mode_series {
                    b.extend(bytes(|p| write_csv(p, &mode_series_table(s)).unwrap()));
                }
                b
            }),
        ),
        (
            "diagnostics",
            Box::new(|| {
                bytes(|p| {
                    let s = simulate_path(&FilteredNoiseSpec::new(gaussian_kernel(), 0.5, 0.025, 200.0, 4)).unwrap();
                    write_json(p, &analyze(&s, None, &AnalysisOptions::default()).unwrap()).unwrap();
                })
            }),
        ),
        (
            "synthfield",
            Box::new(|| {
                let f = build_umax(1.0, ShellSpec::new(8, 1).unwrap(), gaussian_kernel(), 0.1, 6).unwrap();
                let real = f.realize(2, 0.01, 1.0).unwrap();
                let mut b = bytes(|p| write_json(p, &f.record()).unwrap());
                for i in 0..50 {
                    let v = real.velocity([0.1 * i as f64, 0.2], 0.013 * i as f64);
                    b.extend(v[0].to_le_bytes());
                    b.extend(v[1].to_le_bytes());
                }
                b
            }),
        ),
        (
            "transport",
            Box::new(|| {
                let f = build_umax(1.0, ShellSpec::new(8, 1).unwrap(), gaussian_kernel(), 0.1, 7).unwrap();
                let mut o = AdvectOptions::new(200, 0.005, 1.0, 8);
                o.realizations = 8;
                o.start = StartPositions::Uniform;
                bytes(|p| write_csv(p, &dispersion_table(&advect(&Field::Synthetic(&f), &o).unwrap())).unwrap())
            }),
        ),
        (
            "pipeline",
            Box::new(|| {
                let r = desk_run(&small_desk()).unwrap();
                let mut b = bytes(|p| write_csv(p, &dispersion_table(&r.dns_curve)).unwrap());
                b.extend(bytes(|p| write_csv(p, &dispersion_table(&r.model_curve)).unwrap()));
                b.extend(bytes(|p| write_json(p, &r.shell).unwrap()));
                b.extend(bytes(|p| write_json(p, &r.diagnostics).unwrap()));
                b
            }),
        ),
    ];
    let differing: Vec<&str> = stages.iter().filter(|(_, f)| f() != f()).map(|(n, _)| *n).collect();
    let names: Vec<&str> = stages.iter().map(|(n, _)| *n).collect();
    if differing.is_empty() {
        outcome(true, format!("identical bytes on repeat for {}", names.join(", ")))
    } else {
        outcome(false, format!("outputs differ on repeat for {}", differing.join(", ")))
    }
}

fn main() {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, limit: Duration, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = std::panic::catch_unwind(std::panic::AssertUnwindSafe(&mut *f))
            .unwrap_or_else(|_| outcome(false, "panicked".into()));
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = o.pass && in_time;
        failed += usize::from(!pass);
        let timing = if in_time { String::new() } else { format!(" [over the {:.0} s limit]", limit.as_secs_f64()) };
        println!(
            "criterion {id:>2} {:<4} {name}: {} ({:.1} s){timing}",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    };
    let secs = Duration::from_secs;
    report(1, "kernel normalizations", secs(1), &mut kernel_normalizations);
    report(2, "covariance oracle", secs(5), &mut covariance_oracle);
    report(3, "white-noise limit bound", secs(60), &mut gap_bound);
    report(4, "process statistics", secs(60), &mut process_statistics);
    report(5, "enstrophy conservation", secs(30), &mut enstrophy_conservation);

    let start = Instant::now();
    let desk = desk_run(&desk_config());
    let desk_time = start.elapsed();
    println!("desk run: {:.1} s", desk_time.as_secs_f64());
    let from_desk = |f: fn(&DeskResult) -> Outcome| {
        let desk = &desk;
        move || match desk {
            Ok(r) => f(r),
            Err(e) => outcome(false, format!("desk run failed: {e}")),
        }
    };
    report(6, "DNS mode statistics", secs(30 * 60).saturating_sub(desk_time), &mut from_desk(dns_slopes));
    report(7, "Bartlett coverage", secs(120), &mut bartlett_coverage);
    report(8, "Q isotropization", secs(5), &mut q_isotropization);
    report(9, "two-regime dispersion", secs(600), &mut two_regime_dispersion);
    report(10, "end-to-end DNS vs model", secs(3600).saturating_sub(desk_time), &mut from_desk(end_to_end));
    report(11, "determinism", Duration::MAX, &mut determinism);

    println!("{} of 11 criteria passed", 11 - failed);
}
