use crate::config::{Config, ConfigError};
use crate::{Cli, DiagCmd, DnsCmd, Group, ModesCmd, ReportCmd, SynthCmd, TracerCmd};
use filtnoise::diagnostics::{analyze, cross_correlation, AnalysisOptions, SeriesDiagnostics};
use filtnoise::io::{
    dispersion_table, mode_series_file_name, mode_series_table, read_json, read_mode_series, write_csv, write_json,
    Manifest, Table,
};
use filtnoise::kernels::KernelSpec;
use filtnoise::noise::{simulate_path, FilteredNoiseSpec};
use filtnoise::nse2d::{
    run, write_snapshot, ForcingSpec, InitialCondition, Integrator, RunOutput, RunSpec, SolverConfig,
};
use filtnoise::pipeline::collapse_table;
use filtnoise::rng::derive_seed;
use filtnoise::synthfield::{build_umax, white_noise_field, BasisMode, FieldRecord, ShellSpec, SyntheticField};
use filtnoise::transport::{
    advect, advect_dns, regime_check, AdvectOptions, DispersionCurve, DnsTracerOptions, Field, RegimeReport,
    StartPositions, VariancePrediction,
};
use filtnoise::Error;
use serde::Serialize;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Failure mapped onto the exit-code contract.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numeric(String),
    Input(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Input(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) | Failure::Numeric(m) | Failure::Input(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Missing(_) | ConfigError::Io(..) => Failure::Input(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Domain(_) | Error::Validation(_) => Failure::Config(msg),
            Error::BlowUp { .. }
            | Error::IntegrationIncomplete { .. }
            | Error::FitUndefined(_)
            | Error::Precondition(_) => Failure::Numeric(msg),
            Error::Parse { .. } | Error::Io { .. } | Error::Json(_) => Failure::Input(msg),
        }
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Shared state of one command: resolved config, output directory and the
/// files written so far (removed again if the command fails).
struct Ctx {
    cfg: Config,
    out: PathBuf,
    seed: u64,
    command: String,
    started: u64,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Ctx {
    fn csv(&mut self, name: &str, table: &Table) -> Res<()> {
        let p = self.out.join(name);
        self.outputs.push(p.clone());
        Ok(write_csv(&p, table)?)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Res<()> {
        let p = self.out.join(name);
        self.outputs.push(p.clone());
        Ok(write_json(&p, value)?)
    }

    fn input(&mut self, p: &Path) -> Res<()> {
        if !p.exists() {
            return Err(Failure::Input(format!("missing input {}", p.display())));
        }
        self.inputs.push(p.to_path_buf());
        Ok(())
    }

    fn finish(self) -> Res<()> {
        let m = Manifest::new(&self.command, self.seed, self.cfg.snapshot(), self.started);
        m.finish(&self.out, &self.inputs, &self.outputs, now())?;
        Ok(())
    }

    fn discard(&self) {
        for p in &self.outputs {
            let _ = std::fs::remove_file(p);
        }
    }
}

pub fn dispatch(cli: &Cli) -> Res<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    init_logging(&cfg);
    init_threads(cli.threads)?;
    if let Some(s) = cli.seed {
        cfg.set("global", "seed", &s.to_string());
    }
    let seed: u64 = cfg.get("global", "seed")?.ok_or_else(|| {
        Failure::Config("a seed is required (--seed or global.seed)".into())
    })?;
    let out = match &cli.out {
        Some(o) => o.clone(),
        None => cfg
            .path("global", "out")
            .ok_or_else(|| Failure::Config("an output directory is required (--out or global.out)".into()))?,
    };
    std::fs::create_dir_all(&out).map_err(|e| Failure::Input(format!("cannot create {}: {e}", out.display())))?;
    let command = match &cli.group {
        Group::Dns { cmd: DnsCmd::Run } => "dns run",
        Group::Modes { cmd: ModesCmd::Extract } => "modes extract",
        Group::Diag { cmd: DiagCmd::Run } => "diag run",
        Group::Synth { cmd: SynthCmd::Build } => "synth build",
        Group::Tracer { cmd: TracerCmd::Disperse } => "tracer disperse",
        Group::Tracer { cmd: TracerCmd::Predict } => "tracer predict",
        Group::Report { cmd: ReportCmd::Collapse } => "report collapse",
    };
    let mut ctx = Ctx {
        cfg,
        out,
        seed,
        command: command.into(),
        started: now(),
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    if let Some(p) = &cli.config {
        ctx.inputs.push(p.clone());
    }
    let r = match command {
        "dns run" => cmd_dns(&mut ctx, false),
        "modes extract" => cmd_dns(&mut ctx, true),
        "diag run" => cmd_diag(&mut ctx),
        "synth build" => cmd_synth(&mut ctx),
        "tracer disperse" => cmd_disperse(&mut ctx),
        "tracer predict" => cmd_predict(&mut ctx),
        _ => cmd_collapse(&mut ctx),
    };
    match r {
        Ok(()) => ctx.finish(),
        Err(e) => {
            ctx.discard();
            Err(e)
        }
    }
}

fn init_logging(cfg: &Config) {
    let level = cfg
        .raw("global", "log_level")
        .and_then(|l| l.parse::<log::LevelFilter>().ok())
        .unwrap_or(log::LevelFilter::Info);
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}

fn init_threads(flag: Option<usize>) -> Res<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("FILTNOISE_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Failure::Config(format!("FILTNOISE_THREADS is not a count: `{v}`")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Failure::Config("thread count must be positive".into()));
        }
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn solver_config(cfg: &Config, seed: u64) -> Res<SolverConfig> {
    let forcing = if cfg.has_section("forcing") && cfg.get_or("forcing", "enabled", true)? {
        let mut f = ForcingSpec::new(cfg.require("forcing", "k_f")?, cfg.require("forcing", "epsilon")?);
        f.bandwidth = cfg.get_or("forcing", "bandwidth", f.bandwidth)?;
        Some(f)
    } else {
        None
    };
    let integrator = match cfg.raw("solver", "integrator") {
        Some(s) => s.parse::<Integrator>()?,
        None => Integrator::Rk3,
    };
    let c = SolverConfig {
        n: cfg.require("solver", "n")?,
        nu: cfg.get_or("solver", "nu", 0.0)?,
        alpha: cfg.get_or("solver", "alpha", 0.0)?,
        dt: cfg.require("solver", "dt")?,
        forcing,
        seed: derive_seed(seed, 0),
        integrator,
    };
    c.validate()?;
    Ok(c)
}

fn run_spec(cfg: &Config, seed: u64) -> Res<RunSpec> {
    let solver = solver_config(cfg, seed)?;
    let mut spec = RunSpec::new(solver, cfg.require("run", "duration")?);
    spec.spin_up = cfg.get_or("run", "spin_up", spec.spin_up)?;
    spec.max_spin_up = cfg.get_or("run", "max_spin_up", 3.0 * spec.spin_up)?;
    spec.sample_every = cfg.get_or("run", "sample_every", spec.sample_every)?;
    spec.energy_every = cfg.get_or("run", "energy_every", spec.energy_every)?;
    spec.spectrum_every = cfg.get_or("run", "spectrum_every", spec.spectrum_every)?;
    spec.modes = cfg.modes("run", "modes")?;
    spec.initial = match cfg.raw("run", "initial").unwrap_or("zero") {
        "zero" => InitialCondition::Zero,
        "random" => InitialCondition::RandomSmooth {
            k_peak: cfg.get_or("run", "init_k_peak", 4.0)?,
            enstrophy: cfg.get_or("run", "init_enstrophy", 1.0)?,
            seed: derive_seed(seed, 1),
        },
        other => return Err(Failure::Config(format!("run.initial must be `zero` or `random`, got `{other}`"))),
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct RunSummary {
    spin_up_time: f64,
    stationary: bool,
    stationarity_ratio: f64,
    steps: u64,
    final_time: f64,
    final_energy: f64,
    final_enstrophy: f64,
}

fn write_modes(ctx: &mut Ctx, out: &RunOutput) -> Res<()> {
    for s in &out.mode_series {
        ctx.csv(&format!("modes/{}", mode_series_file_name(s.k)), &mode_series_table(s))?;
    }
    Ok(())
}

fn cmd_dns(ctx: &mut Ctx, modes_only: bool) -> Res<()> {
    let spec = run_spec(&ctx.cfg, ctx.seed)?;
    if modes_only && spec.modes.is_empty() {
        return Err(Failure::Config("run.modes lists no wavevectors".into()));
    }
    let out = run(&spec)?;
    write_modes(ctx, &out)?;
    if modes_only {
        return Ok(());
    }
    let snap = ctx.out.join("snapshot.bin");
    ctx.outputs.push(snap.clone());
    write_snapshot(&snap, &out.final_state, spec.solver.nu, spec.solver.alpha, spec.solver.seed)?;
    let mut sp = Table::new(&["k", "energy"]);
    for (k, e) in &out.mean_spectrum {
        sp.push(vec![*k as f64, *e]);
    }
    ctx.csv("spectrum.csv", &sp)?;
    let mut en = Table::new(&["t", "energy", "enstrophy"]);
    for i in 0..out.energy.t.len() {
        en.push(vec![out.energy.t[i], out.energy.energy[i], out.energy.enstrophy[i]]);
    }
    ctx.csv("energy.csv", &en)?;
    let summary = RunSummary {
        spin_up_time: out.spin_up_time,
        stationary: out.stationary,
        stationarity_ratio: out.stationarity_ratio,
        steps: out.steps,
        final_time: out.final_state.t,
        final_energy: out.final_state.energy(),
        final_enstrophy: out.final_state.enstrophy(),
    };
    ctx.json("run.json", &summary)
}

/// Files named directly plus `*.csv` inside named directories, sorted.
fn expand_inputs(paths: &[PathBuf], ext: &str) -> Res<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Failure::Input(format!("cannot list {}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|q| q.extension().and_then(|x| x.to_str()) == Some(ext))
                .collect();
            found.sort();
            out.extend(found);
        } else if p.exists() {
            out.push(p.clone());
        } else {
            return Err(Failure::Input(format!("missing input {}", p.display())));
        }
    }
    Ok(out)
}

fn analysis_options(cfg: &Config) -> Res<AnalysisOptions> {
    let mut o = AnalysisOptions::default();
    o.level = cfg.get_or("diag", "level", o.level)?;
    o.lag_factor = cfg.get_or("diag", "lag_factor", o.lag_factor)?;
    o.refinements = cfg.get_or("diag", "refinements", o.refinements)?;
    o.slope_threshold = cfg.get_or("diag", "slope_threshold", o.slope_threshold)?;
    o.slope_points = cfg.get_or("diag", "slope_points", o.slope_points)?;
    Ok(o)
}

fn stem(p: &Path) -> String {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or("series").to_string()
}

fn cmd_diag(ctx: &mut Ctx) -> Res<()> {
    let files = expand_inputs(&ctx.cfg.paths("diag", "inputs"), "csv")?;
    if files.is_empty() {
        log::warn!("diag.inputs names no series; nothing to do");
        return Ok(());
    }
    let opts = analysis_options(&ctx.cfg)?;
    let mut diags: Vec<SeriesDiagnostics> = Vec::new();
    let mut series = Vec::new();
    for f in &files {
        ctx.input(f)?;
        let s = read_mode_series(f)?;
        let mode = (s.k != (0, 0)).then_some(s.k);
        let d = analyze(&s, mode, &opts)?;
        ctx.json(&format!("diag/{}.json", stem(f)), &d)?;
        diags.push(d);
        series.push(s);
    }
    ctx.csv("collapse.csv", &collapse_table(&diags))?;
    let len = series[0].samples.len();
    if series.len() >= 2 && series.iter().all(|s| s.samples.len() == len) {
        let sl: Vec<&[f64]> = series.iter().map(|s| s.samples.as_slice()).collect();
        let cm = cross_correlation(&sl)?;
        #[derive(Serialize)]
        struct Cross<'a> {
            series: Vec<String>,
            values: &'a [Vec<f64>],
            max_off_diagonal: f64,
        }
        let names = files.iter().map(|f| stem(f)).collect();
        ctx.json(
            "cross_correlation.json",
            &Cross {
                series: names,
                values: &cm.values,
                max_off_diagonal: cm.max_off_diagonal(),
            },
        )?;
    }
    Ok(())
}

fn kernel_spec(cfg: &Config) -> Res<KernelSpec> {
    let raw = cfg.raw("synth", "kernel").unwrap_or("gaussian");
    let mut spec = KernelSpec::parse(raw)?;
    if let KernelSpec::Custom { path, .. } = &mut spec {
        let p = if path.is_absolute() {
            path.clone()
        } else {
            cfg.path("synth", "kernel")
                .and_then(|k| k.parent().map(|d| d.join(path.file_name().unwrap_or_default())))
                .unwrap_or(path.clone())
        };
        *path = p;
    }
    Ok(spec)
}

fn synth_field(ctx: &Ctx) -> Res<SyntheticField> {
    let cfg = &ctx.cfg;
    let shell = ShellSpec::new(cfg.require("synth", "k_max")?, cfg.get_or("synth", "half_width", 1)?)?;
    let kernel = kernel_spec(cfg)?.build()?;
    Ok(build_umax(
        cfg.require("synth", "energy")?,
        shell,
        kernel,
        cfg.require("synth", "tau")?,
        derive_seed(ctx.seed, 2),
    )?)
}

#[derive(Serialize)]
struct FieldFile<'a> {
    #[serde(flatten)]
    record: FieldRecord,
    modes: &'a [BasisMode],
}

fn cmd_synth(ctx: &mut Ctx) -> Res<()> {
    let field = synth_field(ctx)?;
    ctx.json(
        "field.json",
        &FieldFile {
            record: field.record(),
            modes: &field.modes,
        },
    )?;
    let count: usize = ctx.cfg.get_or("synth", "paths", 0)?;
    if count > 0 {
        let tau = field.taus[0];
        let dt: f64 = ctx.cfg.get_or("synth", "dt", tau / 20.0)?;
        let horizon: f64 = ctx.cfg.get_or("synth", "horizon", 200.0 * tau)?;
        for m in 0..count.min(field.modes.len()) {
            let spec = FilteredNoiseSpec::new(field.kernel.clone(), field.taus[m], dt, horizon, field.mode_seed(0, m));
            let path = simulate_path(&spec)?;
            let mut t = Table::new(&["t", "xi"]);
            for (a, b) in path.times.iter().zip(&path.values) {
                t.push(vec![*a, *b]);
            }
            ctx.csv(&format!("paths/path_{m}.csv"), &t)?;
        }
    }
    Ok(())
}

fn parse_pair(s: &str, key: &str) -> Res<(f64, f64)> {
    let bad = || Failure::Config(format!("{key} must be `a,b`, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

#[derive(Serialize)]
struct RegimeFile {
    slope_short: f64,
    slope_long: f64,
    transition: f64,
    tau: f64,
    short_band: (f64, f64),
    long_band: (f64, f64),
    pass: bool,
    note: Option<String>,
}

fn regime_file(cfg: &Config, r: &RegimeReport, tau: f64) -> Res<RegimeFile> {
    let short_band = parse_pair(cfg.raw("tracer", "short_band").unwrap_or("1.9,2.1"), "tracer.short_band")?;
    let long_band = parse_pair(cfg.raw("tracer", "long_band").unwrap_or("0.9,1.1"), "tracer.long_band")?;
    let inside = |v: f64, b: (f64, f64)| v >= b.0 && v <= b.1;
    let ballistic = (r.slope_short - 2.0).abs() < 0.05 && (r.slope_long - 2.0).abs() < 0.05;
    Ok(RegimeFile {
        slope_short: r.slope_short,
        slope_long: r.slope_long,
        transition: r.transition,
        tau,
        short_band,
        long_band,
        pass: inside(r.slope_short, short_band) && inside(r.slope_long, long_band),
        note: ballistic.then(|| "ballistic only".to_string()),
    })
}

fn write_regime(ctx: &mut Ctx, curve: &DispersionCurve, tau: f64) -> Res<()> {
    let r = regime_check(curve, tau).map_err(|e| {
        Failure::Config(format!(
            "{e}; the regime check needs the curve to cover [tau/50, 50 tau] = [{:.4e}, {:.4e}]",
            tau / 50.0,
            50.0 * tau
        ))
    })?;
    let file = regime_file(&ctx.cfg, &r, tau)?;
    ctx.json("regime.json", &file)
}

fn cmd_disperse(ctx: &mut Ctx) -> Res<()> {
    let cfg = ctx.cfg.clone();
    let kind = cfg.raw("tracer", "field").unwrap_or("synthetic").to_string();
    let tau: f64 = match kind.as_str() {
        "synthetic" | "white" => cfg.require("synth", "tau")?,
        _ => cfg.require("tracer", "tau")?,
    };
    let trajectories: usize = cfg.get_or("tracer", "trajectories", 10_000)?;
    let dt: f64 = cfg.get_or("tracer", "dt", tau / 100.0)?;
    let horizon: f64 = cfg.get_or("tracer", "horizon", 50.0 * tau)?;
    let record_every: usize = cfg.get_or("tracer", "record_every", 1)?;
    let tracer_seed = derive_seed(ctx.seed, 3);
    let start = |default: StartPositions| -> Res<StartPositions> {
        match cfg.raw("tracer", "start") {
            None => Ok(default),
            Some("origin") => Ok(StartPositions::Origin),
            Some("uniform") => Ok(StartPositions::Uniform),
            Some(o) => Err(Failure::Config(format!("tracer.start must be origin or uniform, got `{o}`"))),
        }
    };
    let (curve, prediction) = match kind.as_str() {
        "constant" => {
            let (ux, uy) = parse_pair(cfg.raw("tracer", "u0").unwrap_or("1,0"), "tracer.u0")?;
            let mut o = AdvectOptions::new(trajectories, dt, horizon, tracer_seed);
            o.record_every = record_every;
            o.start = start(StartPositions::Origin)?;
            let c = advect(&Field::Constant([ux, uy]), &o)?;
            let mut p = c.clone();
            for (i, t) in c.times.iter().enumerate() {
                p.var_x[i] = ux * ux * t * t;
                p.var_y[i] = uy * uy * t * t;
                p.var_total[i] = p.var_x[i] + p.var_y[i];
                p.stderr[i] = 0.0;
            }
            (c, Some(p))
        }
        "synthetic" | "white" => {
            let field = synth_field(ctx)?;
            let mut o = AdvectOptions::new(trajectories, dt, horizon, tracer_seed);
            o.realizations = cfg.get_or("tracer", "realizations", 100.min(trajectories))?;
            o.record_every = record_every;
            o.start = start(StartPositions::Uniform)?;
            let c = if kind == "white" {
                let w = white_noise_field(&field)?;
                advect(&Field::WhiteNoise(&w), &o)?
            } else {
                advect(&Field::Synthetic(&field), &o)?
            };
            let pred = VariancePrediction::new(field.kernel.covariance().clone(), tau, field.energy)?;
            (c.clone(), Some(pred.curve(&c.times)?))
        }
        "dns" => {
            let spec = run_spec(&cfg, ctx.seed)?;
            let opts = DnsTracerOptions {
                trajectories,
                stride: cfg.get_or("tracer", "stride", 1)?,
                horizon: cfg.get_or("tracer", "horizon", spec.duration)?,
                record_every,
                start: start(StartPositions::Uniform)?,
                seed: tracer_seed,
            };
            let (_, c) = advect_dns(&spec, &opts)?;
            (c, None)
        }
        other => {
            return Err(Failure::Config(format!(
                "tracer.field must be constant, synthetic, white or dns, got `{other}`"
            )))
        }
    };
    ctx.csv("dispersion.csv", &dispersion_table(&curve))?;
    if let Some(p) = prediction {
        ctx.csv("prediction.csv", &dispersion_table(&p))?;
    }
    write_regime(ctx, &curve, tau)
}

fn cmd_predict(ctx: &mut Ctx) -> Res<()> {
    let cfg = ctx.cfg.clone();
    let tau: f64 = cfg.require("synth", "tau")?;
    let energy: f64 = cfg.require("synth", "energy")?;
    let kernel = kernel_spec(&cfg)?.build()?;
    let dt: f64 = cfg.get_or("tracer", "dt", tau / 100.0)?;
    let horizon: f64 = cfg.get_or("tracer", "horizon", 50.0 * tau)?;
    if !(dt > 0.0 && horizon > 0.0) {
        return Err(Failure::Config("tracer.dt and tracer.horizon must be positive".into()));
    }
    let n = (horizon / dt).round() as usize;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    let curve = VariancePrediction::new(kernel.covariance().clone(), tau, energy)?.curve(&times)?;
    ctx.csv("prediction.csv", &dispersion_table(&curve))?;
    write_regime(ctx, &curve, tau)
}

fn cmd_collapse(ctx: &mut Ctx) -> Res<()> {
    let files = expand_inputs(&ctx.cfg.paths("report", "inputs"), "json")?;
    if files.is_empty() {
        log::warn!("report.inputs names no diagnostics; nothing to do");
        return Ok(());
    }
    let mut collapse = Table::new(&["series", "k", "lag_over_tau", "r"]);
    let mut incr = Table::new(&["series", "k", "lag_over_tau", "v"]);
    for (i, f) in files.iter().enumerate() {
        ctx.input(f)?;
        let d: serde_json::Value = read_json(f)?;
        let Some(tau) = d["tau"].as_f64() else {
            log::warn!("{} has no relaxation time; skipped", f.display());
            continue;
        };
        let k = match d["mode"].as_array() {
            Some(a) if a.len() == 2 => {
                let (x, y) = (a[0].as_f64().unwrap_or(0.0), a[1].as_f64().unwrap_or(0.0));
                (x * x + y * y).sqrt()
            }
            _ => f64::NAN,
        };
        let nums = |key: &str| -> Vec<f64> {
            d[key]
                .as_array()
                .map(|a| a.iter().filter_map(|v| v.as_f64()).collect())
                .unwrap_or_default()
        };
        let (lags, r, v) = (nums("lags"), nums("r"), nums("v"));
        if lags.len() != r.len() {
            return Err(Failure::Input(format!("{}: lags and r differ in length", f.display())));
        }
        for (j, lag) in lags.iter().enumerate() {
            collapse.push(vec![i as f64, k, lag / tau, r[j]]);
            if let Some(vj) = v.get(j) {
                incr.push(vec![i as f64, k, lag / tau, *vj]);
            }
        }
    }
    ctx.csv("collapse.csv", &collapse)?;
    ctx.csv("increments.csv", &incr)
}
