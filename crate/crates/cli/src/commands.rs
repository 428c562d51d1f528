use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use reporter_core::inference::{
    field_cone, fit_gyromagnetic, fit_trace, localize_reporters, DepthSpec, FitResult, FitSpec, Grid2D,
    LarmorPoint, MultiAngleDataset, ReporterConfig, TraceModel,
};
use reporter_core::io::{
    load_dataset, load_trace, save_dataset, save_fit, save_map, save_trace, synthesize_trace, ExperimentConfig, Meta,
};
use reporter_core::physics::{CONSTANTS_ENV_VAR, CONSTANTS_VERSION};
use reporter_core::{Error, PhysicalConstants, SignalTrace};
use serde::Serialize;

use crate::manifest::RunManifest;
use crate::{
    Cli, CliError, CliResult, Command, FitArgs, LocalizeArgs, OracleArgs, ReplayArgs, ScanFieldArgs, SimulateArgs,
    SynthArgs,
};

struct Ctx {
    c: PhysicalConstants,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// What a command produced; `error` is raised after the manifest is written.
#[derive(Default)]
struct Run {
    seed: Option<u64>,
    config: Option<ExperimentConfig>,
    outputs: Vec<PathBuf>,
    error: Option<Error>,
}

pub(crate) fn dispatch(cli: &Cli, argv: &[String]) -> CliResult<RunManifest> {
    if let Command::Replay(a) = &cli.command {
        return replay(a, cli.quiet);
    }
    let started = Instant::now();
    let out = match &cli.command {
        Command::Simulate(a) => &a.out,
        Command::Oracle(a) => &a.out,
        Command::Synth(a) => &a.out,
        Command::Fit(a) => &a.out,
        Command::Localize(a) => &a.out,
        Command::ScanField(a) => &a.out,
        Command::Replay(_) => unreachable!(),
    };
    let ctx = Ctx {
        c: PhysicalConstants::from_env()?,
        out: out.clone(),
        quiet: cli.quiet,
    };
    std::fs::create_dir_all(&ctx.out)?;

    let (name, run) = match &cli.command {
        Command::Simulate(a) => ("simulate", simulate(&ctx, a)?),
        Command::Oracle(a) => ("oracle", oracle(&ctx, a)?),
        Command::Synth(a) => ("synth", synth(&ctx, a)?),
        Command::Fit(a) => ("fit", fit(&ctx, a)?),
        Command::Localize(a) => ("localize", localize(&ctx, a)?),
        Command::ScanField(a) => ("scan-field", scan_field(&ctx, a)?),
        Command::Replay(_) => unreachable!(),
    };

    let manifest = RunManifest {
        command: name.into(),
        argv: argv.to_vec(),
        working_dir: std::env::current_dir()?.display().to_string(),
        seed: run.seed,
        constants_version: CONSTANTS_VERSION,
        constants_file: std::env::var(CONSTANTS_ENV_VAR).ok(),
        outputs: run
            .outputs
            .iter()
            .map(|p| p.strip_prefix(&ctx.out).unwrap_or(p).display().to_string())
            .collect(),
        wall_time_s: started.elapsed().as_secs_f64(),
        config: run.config,
    };
    let path = manifest.save(&ctx.out)?;
    if !ctx.quiet {
        for o in &run.outputs {
            println!("{}", o.display());
        }
        println!("{}", path.display());
    }
    match run.error {
        Some(e) => Err(e.into()),
        None => Ok(manifest),
    }
}

fn meta(pairs: &[(&str, String)]) -> Meta {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn abscissa_unit(model: &str) -> &'static str {
    if model == "deer_spectrum" {
        "rad/us"
    } else {
        "us"
    }
}

fn trace_meta(cfg: &ExperimentConfig, model: &str, kind: &str) -> Meta {
    meta(&[
        ("kind", kind.into()),
        ("sequence", model.into()),
        ("field_gauss", cfg.scene.field_gauss.to_string()),
        ("seed", cfg.seed.to_string()),
        ("abscissa_unit", abscissa_unit(model).into()),
        ("signal_unit", "normalized".into()),
    ])
}

fn write_config(ctx: &Ctx, cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    let path = ctx.out.join("config.toml");
    std::fs::write(&path, cfg.to_toml()?)?;
    Ok(path)
}

fn check_model(model: &str) -> CliResult<()> {
    if !reporter_core::io::MODEL_IDS.contains(&model) {
        return Err(CliError::Usage(format!("unknown model `{model}`")));
    }
    Ok(())
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> CliResult<Run> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let model = a.model.clone().unwrap_or_else(|| cfg.sequence.model.clone());
    check_model(&model)?;
    let trace = cfg.model_trace(&ctx.c, Some(&model))?;
    let path = ctx.out.join("trace.csv");
    save_trace(&path, &trace, &trace_meta(&cfg, &model, "model"))?;
    ctx.note(format!("simulated {model}: {} points", trace.len()));
    Ok(Run {
        seed: Some(cfg.seed),
        outputs: vec![path, write_config(ctx, &cfg)?],
        config: Some(cfg),
        error: None,
    })
}

fn oracle(ctx: &Ctx, a: &OracleArgs) -> CliResult<Run> {
    let cfg = ExperimentConfig::load(&a.config)?;
    ctx.note(format!("running the density-matrix oracle on `{}`", cfg.sequence.model));
    let trace = cfg.oracle_trace(&ctx.c)?;
    let path = ctx.out.join("oracle.csv");
    let mut m = trace_meta(&cfg, &cfg.sequence.model, "oracle");
    m.insert("frame".into(), cfg.oracle.frame.clone());
    save_trace(&path, &trace, &m)?;
    Ok(Run {
        seed: Some(cfg.seed),
        outputs: vec![path, write_config(ctx, &cfg)?],
        config: Some(cfg),
        error: None,
    })
}

/// Seed of the `i`-th trace drawn in one run.
fn sub_seed(seed: u64, i: usize) -> u64 {
    seed ^ ((i as u64) << 32)
}

fn synth(ctx: &Ctx, a: &SynthArgs) -> CliResult<Run> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let model = a.model.clone().unwrap_or_else(|| cfg.sequence.model.clone());
    check_model(&model)?;
    let mut outputs = Vec::new();
    match a.angles {
        None => {
            let clean = cfg.model_trace(&ctx.c, Some(&model))?;
            let noisy = synthesize_trace(&clean, &cfg.noise, cfg.seed)?;
            let mut m = trace_meta(&cfg, &model, "synthetic");
            m.insert("sigma".into(), cfg.noise.sigma().to_string());
            let path = ctx.out.join("synth.csv");
            save_trace(&path, &noisy, &m)?;
            outputs.push(path);
        }
        Some(n) => {
            if model != "deer" {
                return Err(CliError::Usage("--angles needs the `deer` model".into()));
            }
            if n < 2 {
                return Err(CliError::Usage("--angles needs at least 2 directions".into()));
            }
            let fields = field_cone(cfg.scene.field_gauss, &cfg.nv_axis(), a.polar, n)?;
            let scene = cfg.spin_system()?;
            if scene.reporter_sites.is_empty() {
                return Err(Error::Schema {
                    message: "a DEER dataset needs at least one reporter".into(),
                    line: None,
                    field: Some("scene.reporters".into()),
                }
                .into());
            }
            let clean = MultiAngleDataset::simulate(
                &ctx.c,
                &scene,
                &fields,
                &cfg.abscissa(),
                cfg.sequence.flip_prob,
                &cfg.decoherence(),
            )?;
            let entries = clean
                .entries
                .iter()
                .enumerate()
                .map(|(i, (f, t))| Ok((*f, synthesize_trace(t, &cfg.noise, sub_seed(cfg.seed, i))?)))
                .collect::<Result<Vec<_>, Error>>()?;
            let noisy = MultiAngleDataset::new(entries)?;
            let m = trace_meta(&cfg, "deer", "synthetic");
            outputs.extend(save_dataset(&ctx.out, "dataset", &noisy, &m)?);
            ctx.note(format!("{n} field directions, {} points", noisy.point_count()));
        }
    }
    outputs.push(write_config(ctx, &cfg)?);
    Ok(Run {
        seed: Some(cfg.seed),
        config: Some(cfg),
        outputs,
        error: None,
    })
}

fn parse_assignments(text: &str, flag: &str) -> CliResult<Vec<(String, f64)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{flag}: expected name=value, got `{item}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{flag}: `{v}` is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

/// Data and best-fit model side by side: abscissa, data, sigma, model.
fn fit_curve(
    c: &PhysicalConstants,
    model: TraceModel,
    fit: &FitResult,
    data: &SignalTrace,
    unit: Option<&String>,
) -> CliResult<String> {
    let p = fit
        .ordered(model)
        .ok_or_else(|| Error::InvalidArgument("fit result is missing parameters".into()))?;
    let mut text = format!(
        "# format=fit-curve\n# version={}\n# sequence={model}\n",
        reporter_core::io::FORMAT_VERSION
    );
    if let Some(u) = unit {
        text.push_str(&format!("# abscissa_unit={u}\n"));
    }
    text.push_str("abscissa,data,sigma,model\n");
    for (i, &t) in data.abscissa.iter().enumerate() {
        let s = data.sigma.get(i).copied().unwrap_or(1.0);
        text.push_str(&format!("{t},{},{s},{}\n", data.signal[i], model.evaluate(c, t, &p)));
    }
    Ok(text)
}

fn fit(ctx: &Ctx, a: &FitArgs) -> CliResult<Run> {
    let (data, data_meta) = load_trace(&a.data)?;
    let model: TraceModel = a.model.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
    let init = parse_assignments(&a.init, "--init")?;
    let fix = parse_assignments(&a.fix, "--fix")?;
    let mut spec = FitSpec::new(model).starts(a.starts).seed(a.seed);
    // start the proton Larmor frequency from the recorded field unless told otherwise
    let given = |name: &str| init.iter().chain(&fix).any(|(k, _)| k == name);
    if model.parameter_names().iter().any(|n| n == "omega_n") && !given("omega_n") {
        if let Some(b) = data_meta.get("field_gauss").and_then(|b| b.parse::<f64>().ok()) {
            spec = spec.init("omega_n", ctx.c.gamma_p * b);
        }
    }
    for (k, v) in init {
        spec = spec.init(&k, v);
    }
    for (k, v) in fix {
        spec = spec.fix(&k, v);
    }
    let result = fit_trace(&ctx.c, &spec, &data)?;
    ctx.note(format!(
        "{model}: chi2 {:.4}, reduced {:.4} on {} dof",
        result.chi2, result.reduced_chi2, result.dof
    ));
    let fit_path = ctx.out.join("fit.toml");
    save_fit(&fit_path, &result)?;
    let curve_path = ctx.out.join("fit_curve.csv");
    let curve = fit_curve(&ctx.c, model, &result, &data, data_meta.get("abscissa_unit"))?;
    std::fs::write(&curve_path, curve)?;
    Ok(Run {
        seed: Some(a.seed),
        outputs: vec![fit_path, curve_path],
        ..Run::default()
    })
}

fn parse_grid(text: &str) -> CliResult<Grid2D> {
    let bad = || CliError::Usage(format!("--grid: expected HALF_WIDTH:STEP, got `{text}`"));
    let (h, s) = text.split_once(':').ok_or_else(bad)?;
    let h: f64 = h.trim().parse().map_err(|_| bad())?;
    let s: f64 = s.trim().parse().map_err(|_| bad())?;
    Grid2D::surface(h, s).map_err(|e| CliError::Usage(format!("--grid: {e}")))
}

#[derive(Serialize)]
struct LocalizeSummary {
    format: &'static str,
    version: u32,
    depth_nm: f64,
    flip_prob: f64,
    chi2: f64,
    reduced_chi2: f64,
    dof: usize,
    evaluated_cells: usize,
    total_cells: usize,
    complete: bool,
    /// Best-fit reporter sites, nm.
    sites: Vec<[f64; 3]>,
    /// Map maximum of each reporter, nm.
    argmax: Vec<[f64; 2]>,
}

fn localize(ctx: &Ctx, a: &LocalizeArgs) -> CliResult<Run> {
    let data = load_dataset(&a.data)?;
    if a.spins == 0 {
        return Err(CliError::Usage("--spins must be at least 1".into()));
    }
    let mut cfg = ReporterConfig::new(a.spins, parse_grid(&a.grid)?);
    if let Some(d) = a.depth {
        cfg.depth = DepthSpec::Fixed(d);
    }
    cfg.flip_prob = a.flip_prob;
    cfg.budget = a.budget;
    cfg.seed = a.seed;
    ctx.note(format!(
        "localizing {} reporter(s) on {} cells from {} traces",
        a.spins,
        cfg.grid.len(),
        data.entries.len()
    ));
    let loc = localize_reporters(&ctx.c, &data, &cfg)?;

    let mut outputs = Vec::new();
    let base = meta(&[
        ("kind", "reporter-map".into()),
        ("depth_nm", loc.fit.depth.to_string()),
        ("complete", loc.is_complete().to_string()),
    ]);
    for (k, map) in loc.maps.iter().enumerate() {
        let path = ctx.out.join(format!("map_{}.csv", k + 1));
        save_map(&path, map, &base)?;
        outputs.push(path);
    }
    let path = ctx.out.join("map_combined.csv");
    save_map(&path, &loc.combined, &base)?;
    outputs.push(path);

    let summary = LocalizeSummary {
        format: "reporter-localization",
        version: reporter_core::io::FORMAT_VERSION,
        depth_nm: loc.fit.depth,
        flip_prob: loc.fit.flip_prob,
        chi2: loc.fit.chi2,
        reduced_chi2: loc.fit.reduced_chi2,
        dof: loc.fit.dof,
        evaluated_cells: loc.evaluated,
        total_cells: loc.total,
        complete: loc.is_complete(),
        sites: loc.fit.sites.iter().map(|s| [s.x, s.y, s.z]).collect(),
        argmax: loc
            .maps
            .iter()
            .map(|m| {
                let (x, y) = m.argmax_position();
                [x, y]
            })
            .collect(),
    };
    let path = ctx.out.join("localize.toml");
    std::fs::write(&path, toml::to_string(&summary).map_err(|e| Error::InvalidArgument(e.to_string()))?)?;
    outputs.push(path);
    for (k, s) in summary.argmax.iter().enumerate() {
        ctx.note(format!("reporter {}: map maximum at ({:.2}, {:.2}) nm", k + 1, s[0], s[1]));
    }
    Ok(Run {
        seed: Some(a.seed),
        outputs,
        config: None,
        error: loc.check().err(),
    })
}

/// Fits ωn to one bath echo. A coarse scan with ωn held over 0.5–2× the
/// nominal Larmor frequency picks the basin; a free fit then refines it.
fn fit_larmor(c: &PhysicalConstants, data: &SignalTrace, nominal: f64, seed: u64) -> CliResult<FitResult> {
    let mut best: Option<FitResult> = None;
    for k in 0..=30 {
        let wn = nominal * (0.5 + 1.5 * k as f64 / 30.0);
        for b in [0.1, 0.3, 1.0] {
            let spec = FitSpec::new(TraceModel::Bath).fix("omega_n", wn).init("b_rms", b).starts(1).seed(seed);
            if let Ok(r) = fit_trace(c, &spec, data) {
                if best.as_ref().is_none_or(|x| r.chi2 < x.chi2) {
                    best = Some(r);
                }
            }
        }
    }
    let start = best.ok_or(Error::NonConvergence { restarts: 93 })?;
    let mut spec = FitSpec::new(TraceModel::Bath).starts(4).seed(seed);
    for (k, v) in &start.parameters {
        spec = spec.init(k, *v);
    }
    Ok(fit_trace(c, &spec, data)?)
}

#[derive(Serialize)]
struct LarmorSummary {
    format: &'static str,
    version: u32,
    /// rad/(μs·G)
    slope: f64,
    sigma: f64,
    reduced_chi2: Option<f64>,
    dof: usize,
    low_dof: bool,
    /// γp of the constants in use, for comparison.
    gamma_p: f64,
    deviation_sigma: f64,
}

fn scan_field(ctx: &Ctx, a: &ScanFieldArgs) -> CliResult<Run> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if cfg.bath.is_none() {
        return Err(Error::Schema {
            message: "scan-field needs a [bath] table".into(),
            line: None,
            field: Some("bath".into()),
        }
        .into());
    }
    let mut outputs = Vec::new();
    let mut points = Vec::new();
    for (i, &field) in a.fields.iter().enumerate() {
        let mut at = cfg.clone();
        at.scene.field_gauss = field;
        at.scene.omega_n = None;
        if let Some(b) = at.bath.as_mut() {
            b.omega_n = None;
        }
        at.validate()?;
        let clean = at.model_trace(&ctx.c, Some("bath"))?;
        let noisy = synthesize_trace(&clean, &at.noise, sub_seed(cfg.seed, i))?;
        let path = ctx.out.join(format!("bath_{i}.csv"));
        save_trace(&path, &noisy, &trace_meta(&at, "bath", "synthetic"))?;
        outputs.push(path);

        let r = fit_larmor(&ctx.c, &noisy, ctx.c.gamma_p * field, cfg.seed)?;
        let (wn, sigma) = (r.value("omega_n").unwrap_or(f64::NAN), r.uncertainty("omega_n").unwrap_or(f64::NAN));
        ctx.note(format!("{field} G: omega_n = {wn:.4} ± {sigma:.4} rad/us"));
        points.push(LarmorPoint {
            field,
            omega_n: wn,
            sigma,
        });
    }
    let path = ctx.out.join("larmor.csv");
    let mut text = format!(
        "# format=larmor-scan\n# version={}\n# seed={}\n# units=G,rad/us,rad/us\nfield_gauss,omega_n,sigma\n",
        reporter_core::io::FORMAT_VERSION,
        cfg.seed
    );
    for p in &points {
        text.push_str(&format!("{},{},{}\n", p.field, p.omega_n, p.sigma));
    }
    std::fs::write(&path, text)?;
    outputs.push(path);

    let g = fit_gyromagnetic(&points)?;
    let summary = LarmorSummary {
        format: "reporter-larmor",
        version: reporter_core::io::FORMAT_VERSION,
        slope: g.slope,
        sigma: g.sigma,
        reduced_chi2: g.reduced_chi2,
        dof: g.dof,
        low_dof: g.low_dof,
        gamma_p: ctx.c.gamma_p,
        deviation_sigma: (g.slope - ctx.c.gamma_p) / g.sigma,
    };
    ctx.note(format!(
        "slope {:.6e} ± {:.2e} rad/(us G); gamma_p {:.6e} ({:+.2} sigma)",
        g.slope, g.sigma, ctx.c.gamma_p, summary.deviation_sigma
    ));
    let path = ctx.out.join("gyromagnetic.toml");
    std::fs::write(&path, toml::to_string(&summary).map_err(|e| Error::InvalidArgument(e.to_string()))?)?;
    outputs.push(path);
    outputs.push(write_config(ctx, &cfg)?);
    Ok(Run {
        seed: Some(cfg.seed),
        config: Some(cfg),
        outputs,
        error: None,
    })
}

const PATH_FLAGS: [&str; 2] = ["--config", "--data"];

/// Re-runs a manifest into a new directory. The recorded resolved config
/// replaces `--config`; other relative input paths resolve against the
/// original working directory.
fn replay(a: &ReplayArgs, quiet: bool) -> CliResult<RunManifest> {
    let m = RunManifest::load(&a.manifest)?;
    std::fs::create_dir_all(&a.out)?;
    let config_path = match &m.config {
        Some(cfg) => {
            let p = a.out.join("replay-input.toml");
            std::fs::write(&p, cfg.to_toml()?)?;
            Some(p)
        }
        None => None,
    };
    let wd = Path::new(&m.working_dir);
    let mut argv = Vec::with_capacity(m.argv.len());
    let mut iter = m.argv.iter();
    while let Some(arg) = iter.next() {
        let (flag, inline) = match arg.split_once('=') {
            Some((f, v)) if f.starts_with("--") => (f, Some(v.to_string())),
            _ => (arg.as_str(), None),
        };
        let mut value = || inline.clone().or_else(|| iter.next().cloned());
        if flag == "--out" {
            value();
            argv.push("--out".into());
            argv.push(a.out.display().to_string());
        } else if flag == "--config" && config_path.is_some() {
            value();
            argv.push("--config".into());
            argv.push(config_path.as_ref().unwrap().display().to_string());
        } else if PATH_FLAGS.contains(&flag) {
            let v = value().ok_or_else(|| CliError::Usage(format!("{flag} without a value in manifest")))?;
            argv.push(flag.into());
            argv.push(wd.join(v).display().to_string());
        } else {
            argv.push(arg.clone());
        }
    }
    if quiet && !argv.iter().any(|s| s == "--quiet") {
        argv.push("--quiet".into());
    }
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::Usage(e.to_string()))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Usage("a replay manifest cannot itself be replayed".into()));
    }
    if let (Some(v), Some(f)) = (&m.constants_file, std::env::var(CONSTANTS_ENV_VAR).ok()) {
        if *v != f {
            eprintln!("warning: manifest used constants file {v}, now {f}");
        }
    }
    dispatch(&cli, &argv)
}
