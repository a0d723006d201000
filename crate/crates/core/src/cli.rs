//! Command-line front end: argument parsing, run configuration, reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::error::{Error, Result};
use crate::image::{ImageBuffer, MaskBuffer};
use crate::restore::{default_denoise_params, default_inpaint_params, RestoreParams, RestoreReport, Solver, StopRule};
use crate::{io, metrics, restore, verify};

#[derive(Debug, Parser)]
#[command(name = "gsr", version, about = "Group-sparse low-rank restoration of grayscale images")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "GSR_THREADS")]
    pub threads: Option<usize>,
    /// Write a key=value run report here (overwritten).
    #[arg(long, global = true, env = "GSR_REPORT")]
    pub report: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Remove additive Gaussian noise.
    Denoise(RestoreArgs),
    /// Fill missing pixels.
    Inpaint(RestoreArgs),
    /// Generate a random missing-pixel mask.
    Mask(MaskArgs),
    /// PSNR and SSIM between two images.
    Metrics(MetricsArgs),
    /// Run the operator oracle suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct RestoreArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long = "out")]
    pub output: Option<PathBuf>,
    /// Clean image for PSNR/SSIM in the report.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Mask file (0 = missing); inpainting only.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Noise level; required for denoising.
    #[arg(long, env = "GSR_SIGMA")]
    pub sigma: Option<f64>,
    /// Missing ratio; without --mask a seeded mask is generated and applied.
    #[arg(long, env = "GSR_RATIO")]
    pub ratio: Option<f64>,
    /// Add seeded noise of level --sigma to the input first.
    #[arg(long)]
    pub add_noise: bool,
    #[arg(long, env = "GSR_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "GSR_SOLVER", default_value = "wnnm")]
    pub solver: Solver,
    #[arg(long, env = "GSR_DETERMINISTIC")]
    pub deterministic: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Optional replacements for the tabulated defaults.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Overrides {
    #[arg(long, env = "GSR_SIDE")]
    pub side: Option<usize>,
    #[arg(long, env = "GSR_STRIDE")]
    pub stride: Option<usize>,
    #[arg(long, env = "GSR_WINDOW")]
    pub window: Option<usize>,
    #[arg(long, env = "GSR_GROUP_SIZE")]
    pub group_size: Option<usize>,
    #[arg(long, env = "GSR_TAU")]
    pub tau: Option<f64>,
    #[arg(long, env = "GSR_C")]
    pub c: Option<f64>,
    #[arg(long, env = "GSR_MU")]
    pub mu: Option<f64>,
    #[arg(long, env = "GSR_MAX_ITER")]
    pub max_iter: Option<usize>,
    #[arg(long, env = "GSR_EPS")]
    pub eps: Option<f64>,
    #[arg(long, env = "GSR_STOP_RULE")]
    pub stop_rule: Option<StopRule>,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    /// Take the mask shape from this image.
    #[arg(long = "in", conflicts_with = "size")]
    pub input: Option<PathBuf>,
    /// Mask shape as HEIGHTxWIDTH.
    #[arg(long)]
    pub size: Option<String>,
    #[arg(long, env = "GSR_RATIO")]
    pub ratio: f64,
    #[arg(long, env = "GSR_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "out")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, env = "GSR_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Task {
    #[default]
    Denoise,
    Inpaint,
    Mask,
    Metrics,
    Verify,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Denoise => "denoise",
            Task::Inpaint => "inpaint",
            Task::Mask => "mask",
            Task::Metrics => "metrics",
            Task::Verify => "verify",
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "denoise" => Task::Denoise,
            "inpaint" => Task::Inpaint,
            "mask" => Task::Mask,
            "metrics" => Task::Metrics,
            "verify" => Task::Verify,
            other => return Err(Error::invalid_input(format!("unknown task '{other}'"))),
        })
    }
}

/// Everything one invocation needs, independent of how it was spelled.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// Second image for `metrics`.
    pub other: Option<PathBuf>,
    /// `HEIGHTxWIDTH` for `mask` without an input image.
    pub size: Option<(usize, usize)>,
    pub sigma: Option<f64>,
    pub ratio: Option<f64>,
    pub add_noise: bool,
    pub seed: u64,
    pub solver: Solver,
    pub deterministic: bool,
    pub threads: Option<usize>,
    pub overrides: Overrides,
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::invalid_input(format!("size must look like 256x256, got '{s}'"));
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((h.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?))
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let mut cfg = RunConfig {
            threads: cli.threads,
            report: cli.report,
            ..Default::default()
        };
        match cli.command {
            Command::Denoise(a) => {
                cfg.task = Task::Denoise;
                cfg.apply_restore(a);
            }
            Command::Inpaint(a) => {
                cfg.task = Task::Inpaint;
                cfg.apply_restore(a);
            }
            Command::Mask(a) => {
                cfg.task = Task::Mask;
                cfg.input = a.input;
                cfg.size = a.size.as_deref().map(parse_size).transpose()?;
                cfg.ratio = Some(a.ratio);
                cfg.seed = a.seed;
                cfg.output = Some(a.output);
            }
            Command::Metrics(a) => {
                cfg.task = Task::Metrics;
                cfg.input = Some(a.a);
                cfg.other = Some(a.b);
            }
            Command::Verify(a) => {
                cfg.task = Task::Verify;
                cfg.seed = a.seed;
            }
        }
        Ok(cfg)
    }

    fn apply_restore(&mut self, a: RestoreArgs) {
        self.input = Some(a.input);
        self.output = a.output;
        self.reference = a.reference;
        self.mask = a.mask;
        self.sigma = a.sigma;
        self.ratio = a.ratio;
        self.add_noise = a.add_noise;
        self.seed = a.seed;
        self.solver = a.solver;
        self.deterministic = a.deterministic;
        self.overrides = a.overrides;
    }

    /// One `key=value` line per set field.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        put("task", self.task.as_str().into());
        let paths = [
            ("input", &self.input),
            ("output", &self.output),
            ("reference", &self.reference),
            ("mask", &self.mask),
            ("report", &self.report),
            ("other", &self.other),
        ];
        for (k, p) in paths {
            if let Some(p) = p {
                put(k, p.display().to_string());
            }
        }
        if let Some((h, w)) = self.size {
            put("size", format!("{h}x{w}"));
        }
        if let Some(v) = self.sigma {
            put("sigma", v.to_string());
        }
        if let Some(v) = self.ratio {
            put("ratio", v.to_string());
        }
        put("add_noise", self.add_noise.to_string());
        put("seed", self.seed.to_string());
        put("solver", self.solver.as_str().into());
        put("deterministic", self.deterministic.to_string());
        if let Some(v) = self.threads {
            put("threads", v.to_string());
        }
        let o = &self.overrides;
        let usizes = [
            ("side", o.side),
            ("stride", o.stride),
            ("window", o.window),
            ("group_size", o.group_size),
            ("max_iter", o.max_iter),
        ];
        for (k, v) in usizes {
            if let Some(v) = v {
                put(k, v.to_string());
            }
        }
        let floats = [("tau", o.tau), ("c", o.c), ("mu", o.mu), ("eps", o.eps)];
        for (k, v) in floats {
            if let Some(v) = v {
                put(k, v.to_string());
            }
        }
        if let Some(r) = o.stop_rule {
            put("stop_rule", r.as_str().into());
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        fn num<T: FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::invalid_input(format!("bad value for {k}: '{v}'")))
        }
        let mut cfg = RunConfig::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid_input(format!("expected key=value, got '{line}'")))?;
            let path = || Some(PathBuf::from(v));
            let o = &mut cfg.overrides;
            match k {
                "task" => cfg.task = v.parse()?,
                "input" => cfg.input = path(),
                "output" => cfg.output = path(),
                "reference" => cfg.reference = path(),
                "mask" => cfg.mask = path(),
                "report" => cfg.report = path(),
                "other" => cfg.other = path(),
                "size" => cfg.size = Some(parse_size(v)?),
                "sigma" => cfg.sigma = Some(num(k, v)?),
                "ratio" => cfg.ratio = Some(num(k, v)?),
                "add_noise" => cfg.add_noise = num(k, v)?,
                "seed" => cfg.seed = num(k, v)?,
                "solver" => cfg.solver = v.parse()?,
                "deterministic" => cfg.deterministic = num(k, v)?,
                "threads" => cfg.threads = Some(num(k, v)?),
                "side" => o.side = Some(num(k, v)?),
                "stride" => o.stride = Some(num(k, v)?),
                "window" => o.window = Some(num(k, v)?),
                "group_size" => o.group_size = Some(num(k, v)?),
                "max_iter" => o.max_iter = Some(num(k, v)?),
                "tau" => o.tau = Some(num(k, v)?),
                "c" => o.c = Some(num(k, v)?),
                "mu" => o.mu = Some(num(k, v)?),
                "eps" => o.eps = Some(num(k, v)?),
                "stop_rule" => o.stop_rule = Some(v.parse()?),
                other => return Err(Error::invalid_input(format!("unknown config key '{other}'"))),
            }
        }
        Ok(cfg)
    }

    fn require<'a>(&self, p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        p.as_deref()
            .ok_or_else(|| Error::invalid_input(format!("{} needs {flag}", self.task.as_str())))
    }
}

impl Overrides {
    pub fn apply(&self, p: &mut RestoreParams) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        set!(side, stride, window, group_size, tau, c, mu, max_iter, eps, stop_rule);
    }
}

/// Ordered key=value report; written in one go, replacing any old file.
#[derive(Debug, Default, PartialEq)]
pub struct Report(Vec<(String, String)>);

impl Report {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.0
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn parse(text: &str) -> Result<Self> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| Error::invalid_input(format!("malformed report line '{l}'")))
            })
            .collect::<Result<_>>()
            .map(Report)
    }

    fn params(&mut self, p: &RestoreParams) {
        self.push("solver", p.solver.as_str());
        self.push("sigma_n", p.sigma_n);
        self.push("side", p.side);
        self.push("stride", p.stride);
        self.push("window", p.window);
        self.push("group_size", p.group_size);
        self.push("tau", p.tau);
        self.push("c", p.c);
        self.push("mu", p.mu);
        self.push("max_iter", p.max_iter);
        self.push("eps", p.eps);
        self.push("stop_rule", p.stop_rule.as_str());
        self.push("sigma_scale", p.sigma_scale);
        self.push("sigma_floor", p.sigma_floor);
        self.push("deterministic", p.deterministic);
    }

    fn outcome(&mut self, r: &RestoreReport) {
        self.push("iterations", r.iterations_run);
        self.push("converged", r.converged);
        self.push("seconds", format!("{:.3}", r.wall_seconds));
        self.push("groups", r.groups_processed);
        self.push("truncated_groups", r.truncated_groups);
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        self.push("relative_changes", join(&r.relative_changes));
        self.push("effective_sigmas", join(&r.effective_sigmas));
        for w in &r.warnings {
            self.push("warning", w);
        }
    }

    fn quality(&mut self, out: &ImageBuffer, reference: Option<&ImageBuffer>) -> Result<()> {
        if let Some(r) = reference {
            let m = metrics::evaluate(out, r)?;
            self.push("psnr_db", m.psnr_db);
            self.push("ssim", m.ssim);
        }
        Ok(())
    }
}

/// Parse the process arguments and run; returns the exit code.
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match RunConfig::from_cli(cli) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Execute a configuration; errors go to standard error and become exit codes.
pub fn run(cfg: &RunConfig) -> i32 {
    let result = match cfg.threads {
        Some(0) => Err(Error::invalid_param("--threads must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))
            .and_then(|pool| pool.install(|| execute(cfg))),
        None => execute(cfg),
    };
    match result {
        Ok(report) => {
            if let Some(path) = &cfg.report {
                if let Err(e) = report.write(path) {
                    eprintln!("error: {e}");
                    return e.exit_code();
                }
            }
            print!("{}", report.render());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Run the task and return its report.
pub fn execute(cfg: &RunConfig) -> Result<Report> {
    let mut report = Report::default();
    report.push("task", cfg.task.as_str());
    match cfg.task {
        Task::Denoise => denoise_task(cfg, &mut report)?,
        Task::Inpaint => inpaint_task(cfg, &mut report)?,
        Task::Mask => {
            let shape = match (&cfg.input, cfg.size) {
                (Some(p), _) => io::load_image(p)?.shape(),
                (None, Some(s)) => s,
                (None, None) => return Err(Error::invalid_input("mask needs --in or --size")),
            };
            let ratio = cfg.ratio.ok_or_else(|| Error::invalid_input("mask needs --ratio"))?;
            let mask = io::make_mask(shape, ratio, cfg.seed)?;
            io::save_mask(&mask, cfg.require(&cfg.output, "--out")?)?;
            report.push("missing", mask.missing_count());
            report.push("observed", mask.observed_count());
            report.push("seed", cfg.seed);
        }
        Task::Metrics => {
            let a = io::load_image(cfg.require(&cfg.input, "--a")?)?;
            let b = io::load_image(cfg.require(&cfg.other, "--b")?)?;
            let m = metrics::evaluate(&a, &b)?;
            report.push("psnr_db", m.psnr_db);
            report.push("ssim", m.ssim);
        }
        Task::Verify => {
            let outcomes = verify::run_all(cfg.seed)?;
            for o in &outcomes {
                report.push(&report_key(o.name), if o.passed() { "pass" } else { "FAIL" });
                info!("{}", o.summary());
            }
            if let Err(e) = verify::require_all(&outcomes) {
                eprint!("{}", report.render());
                return Err(e);
            }
        }
    }
    Ok(report)
}

/// Lowercase alphanumeric words joined by `_`.
fn report_key(name: &str) -> String {
    name.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_ascii_lowercase())
        .collect::<Vec<_>>()
        .join("_")
}

fn load_reference(cfg: &RunConfig) -> Result<Option<ImageBuffer>> {
    cfg.reference.as_deref().map(io::load_image).transpose()
}

fn save_output(cfg: &RunConfig, img: &ImageBuffer, report: &mut Report) -> Result<()> {
    if let Some(p) = &cfg.output {
        io::save_image(img, p)?;
        report.push("output", p.display());
    }
    Ok(())
}

fn denoise_task(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let sigma = cfg
        .sigma
        .ok_or_else(|| Error::invalid_input("denoise needs --sigma"))?;
    let mut y = io::load_image(cfg.require(&cfg.input, "--in")?)?;
    if cfg.add_noise {
        y = io::add_gaussian_noise(&y, sigma, cfg.seed)?;
    }
    let defaults = default_denoise_params(sigma);
    let mut p = defaults.params;
    p.solver = cfg.solver;
    p.deterministic = cfg.deterministic;
    cfg.overrides.apply(&mut p);
    let (out, mut r) = restore::denoise(&y, &p)?;
    r.warnings.extend(defaults.warning);
    finish(cfg, report, &p, &r, &out)
}

fn inpaint_task(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let img = io::load_image(cfg.require(&cfg.input, "--in")?)?;
    let mask: MaskBuffer = match (&cfg.mask, cfg.ratio) {
        (Some(path), _) => io::load_mask(path)?,
        (None, Some(ratio)) => io::make_mask(img.shape(), ratio, cfg.seed)?,
        (None, None) => return Err(Error::invalid_input("inpaint needs --mask or --ratio")),
    };
    let ratio = cfg
        .ratio
        .unwrap_or(mask.missing_count() as f64 / (mask.height() * mask.width()) as f64);
    let y = mask.apply(&img)?;
    let defaults = default_inpaint_params(ratio);
    let mut p = defaults.params;
    p.solver = cfg.solver;
    p.deterministic = cfg.deterministic;
    cfg.overrides.apply(&mut p);
    report.push("missing", mask.missing_count());
    let (out, mut r) = restore::inpaint(&y, &mask, &p)?;
    r.warnings.extend(defaults.warning);
    finish(cfg, report, &p, &r, &out)
}

fn finish(
    cfg: &RunConfig,
    report: &mut Report,
    p: &RestoreParams,
    r: &RestoreReport,
    out: &ImageBuffer,
) -> Result<()> {
    for w in &r.warnings {
        warn!("{w}");
    }
    report.push("seed", cfg.seed);
    report.quality(out, load_reference(cfg)?.as_ref())?;
    report.outcome(r);
    report.params(p);
    save_output(cfg, out, report)
}
