//! Command-line front end. Settings resolve as built-in defaults, then a
//! flat `key = value` config file, then command-line flags.

mod commands;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Arg, ArgAction, ArgMatches, Command};
use serde::Serialize;

use crate::bench::{BenchConfig, Scenario, SuiteSettings};
use crate::emd::{BoundaryPolicy, SiftConfig, StopNorm, Threshold};
use crate::ensemble::EnsembleConfig;
use crate::pipeline::{DecompositionMethod, UpdateMode};
use crate::predict::EngineKind;
use crate::series::Preset;
use crate::Error;

pub use commands::dispatch;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Decompose,
    Spectral,
    Pacf,
    Forecast,
    Scenario,
    Suite,
    Boundary,
    Synth,
}

impl CommandKind {
    const ALL: [CommandKind; 8] = [
        CommandKind::Decompose,
        CommandKind::Spectral,
        CommandKind::Pacf,
        CommandKind::Forecast,
        CommandKind::Scenario,
        CommandKind::Suite,
        CommandKind::Boundary,
        CommandKind::Synth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Decompose => "decompose",
            CommandKind::Spectral => "spectral",
            CommandKind::Pacf => "pacf",
            CommandKind::Forecast => "forecast",
            CommandKind::Scenario => "scenario",
            CommandKind::Suite => "suite",
            CommandKind::Boundary => "boundary",
            CommandKind::Synth => "synth",
        }
    }

    fn about(self) -> &'static str {
        match self {
            CommandKind::Decompose => "Decompose a series into IMFs and a residual",
            CommandKind::Spectral => "STFT magnitudes of a series or of each component",
            CommandKind::Pacf => "Partial autocorrelation of a series or of each component",
            CommandKind::Forecast => "Fit per-component engines and forecast the test span",
            CommandKind::Scenario => "Run scenarios I-III on one series",
            CommandKind::Suite => "Run the preset x engine x scenario x seed benchmark",
            CommandKind::Boundary => "Compare IMFs with and without future samples",
            CommandKind::Synth => "Generate a synthetic preset series",
        }
    }
}

/// Usage problems and run failures, mapped to distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Run(Error::InvalidParameter { .. }) => EXIT_USAGE,
            CliError::Run(e) if e.is_input_error() => EXIT_INPUT,
            CliError::Run(_) => EXIT_COMPUTE,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

struct OptSpec {
    name: &'static str,
    help: &'static str,
    commands: &'static [CommandKind],
}

use CommandKind as K;

const DECOMPOSING: &[CommandKind] = &[K::Decompose, K::Spectral, K::Pacf, K::Forecast, K::Scenario, K::Suite];
const SIFTING: &[CommandKind] = &[
    K::Decompose,
    K::Spectral,
    K::Pacf,
    K::Forecast,
    K::Scenario,
    K::Suite,
    K::Boundary,
];
const FORECASTING: &[CommandKind] = &[K::Forecast, K::Scenario, K::Suite];

const OPTIONS: &[OptSpec] = &[
    OptSpec { name: "input", help: "Input CSV with timestamp,value columns", commands: &[K::Decompose, K::Spectral, K::Pacf, K::Forecast, K::Scenario, K::Boundary] },
    OptSpec { name: "preset", help: "Synthetic preset: load or wind", commands: &[K::Forecast, K::Scenario, K::Boundary, K::Synth] },
    OptSpec { name: "length", help: "Length of a generated preset series", commands: &[K::Forecast, K::Scenario, K::Suite, K::Boundary, K::Synth] },
    OptSpec { name: "seed", help: "Master seed for every random stream", commands: &[K::Decompose, K::Spectral, K::Pacf, K::Forecast, K::Scenario, K::Boundary, K::Synth] },
    OptSpec { name: "method", help: "Decomposition: none, emd, eemd or ceemd", commands: DECOMPOSING },
    OptSpec { name: "ne", help: "Ensemble members (even for CEEMD)", commands: DECOMPOSING },
    OptSpec { name: "noise", help: "Noise std as a fraction of the series std", commands: DECOMPOSING },
    OptSpec { name: "boundary-policy", help: "Envelope end handling: linear, mirror or clamp", commands: SIFTING },
    OptSpec { name: "max-imfs", help: "IMF cap (never above floor(log2 N))", commands: SIFTING },
    OptSpec { name: "max-sift", help: "Sifting iterations per IMF", commands: SIFTING },
    OptSpec { name: "epsilon", help: "Sifting stop threshold relative to the series std", commands: SIFTING },
    OptSpec { name: "stop-norm", help: "Mean-envelope norm: max or mean", commands: SIFTING },
    OptSpec { name: "engine", help: "Prediction engine: elm or svr", commands: &[K::Forecast, K::Scenario] },
    OptSpec { name: "scenario", help: "Scenario(s): I, II, III (comma separated) or all", commands: &[K::Forecast, K::Scenario] },
    OptSpec { name: "presets", help: "Comma-separated presets", commands: &[K::Suite] },
    OptSpec { name: "engines", help: "Comma-separated engines", commands: &[K::Suite] },
    OptSpec { name: "seeds", help: "Comma-separated seeds", commands: &[K::Suite] },
    OptSpec { name: "lags", help: "Lag pool, e.g. 1-24,48,72,168", commands: FORECASTING },
    OptSpec { name: "k", help: "Lags kept by mRMR per component", commands: FORECASTING },
    OptSpec { name: "bins", help: "Histogram bins for mutual information", commands: FORECASTING },
    OptSpec { name: "folds", help: "Cross-validation folds", commands: FORECASTING },
    OptSpec { name: "elm-hidden", help: "ELM hidden-unit grid", commands: FORECASTING },
    OptSpec { name: "svr-c", help: "SVR C grid", commands: FORECASTING },
    OptSpec { name: "svr-gamma", help: "SVR gamma grid", commands: FORECASTING },
    OptSpec { name: "svr-epsilon", help: "SVR tube width as a fraction of target std", commands: FORECASTING },
    OptSpec { name: "max-train-rows", help: "Fit engines on the latest N rows only (0 = all)", commands: FORECASTING },
    OptSpec { name: "train-fraction", help: "Training share of the series", commands: FORECASTING },
    OptSpec { name: "max-test-steps", help: "Cap on forecast steps (0 = no cap)", commands: FORECASTING },
    OptSpec { name: "update-mode", help: "Scenario II model update: refresh or retrain", commands: FORECASTING },
    OptSpec { name: "sliding-window", help: "Scenario II re-decomposition window (0 = full history)", commands: FORECASTING },
    OptSpec { name: "window", help: "STFT window length, or boundary comparison window", commands: &[K::Spectral, K::Boundary] },
    OptSpec { name: "hop", help: "STFT hop", commands: &[K::Spectral] },
    OptSpec { name: "max-lag", help: "Largest PACF lag", commands: &[K::Pacf] },
    OptSpec { name: "lookahead", help: "Future samples known to the full decomposition", commands: &[K::Boundary] },
];

fn is_known_key(key: &str) -> bool {
    OPTIONS.iter().any(|o| o.name == key) || key == "output-dir" || key == "threads"
}

fn build_command() -> Command {
    let mut root = Command::new("emd-forecast")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Empirical mode decomposition, boundary-effect analysis and per-IMF forecasting")
        .arg_required_else_help(true)
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("Flat key = value settings file; flags override it"),
        )
        .arg(
            Arg::new("output-dir")
                .long("output-dir")
                .short('o')
                .global(true)
                .value_name("DIR")
                .help("Directory for all outputs [default: out]"),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_name("N")
                .help("Worker thread cap [default: machine parallelism]"),
        );
    for kind in CommandKind::ALL {
        let mut sub = Command::new(kind.name()).about(kind.about());
        for opt in OPTIONS.iter().filter(|o| o.commands.contains(&kind)) {
            sub = sub.arg(
                Arg::new(opt.name)
                    .long(opt.name)
                    .help(opt.help)
                    .action(ArgAction::Set),
            );
        }
        root = root.subcommand(sub);
    }
    root
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected `key = value`, got {raw:?}", i + 1))
        })?;
        let key = key.trim().replace('_', "-");
        if !is_known_key(&key) {
            return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", i + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct CliConfig {
    pub command: CommandKind,
    pub argv: Vec<String>,
    pub config_file: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    /// Explicit settings after merging the config file and flags.
    pub flags: BTreeMap<String, String>,
    pub method: DecompositionMethod,
    pub ensemble: EnsembleConfig,
    pub engine: EngineKind,
    pub preset: Option<Preset>,
    pub length: usize,
    pub seed: Option<u64>,
    pub scenarios: Vec<Scenario>,
    pub bench: BenchConfig,
    pub presets: Vec<Preset>,
    pub engines: Vec<EngineKind>,
    pub seeds: Vec<u64>,
    pub window: usize,
    pub hop: usize,
    pub max_lag: usize,
    pub lookahead: usize,
}

struct Settings<'a> {
    map: &'a BTreeMap<String, String>,
}

impl Settings<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("invalid value {v:?} for --{key}: {e}")))
            })
            .transpose()
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>().map_err(|e| {
                            CliError::Usage(format!("invalid value {s:?} for --{key}: {e}"))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    /// `0` means "no limit".
    fn limit(&self, key: &str) -> CliResult<Option<Option<usize>>> {
        Ok(self.get::<usize>(key)?.map(|v| (v > 0).then_some(v)))
    }
}

/// Parses `"1-24,48"` into sorted unique lags.
pub fn parse_lag_list(text: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Usage(format!("invalid lag list {text:?}"));
    let mut lags = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            lags.extend(a..=b);
        } else {
            lags.push(part.parse().map_err(|_| bad())?);
        }
    }
    lags.sort_unstable();
    lags.dedup();
    Ok(lags)
}

fn parse_scenarios(text: &str) -> CliResult<Vec<Scenario>> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(Scenario::ALL.to_vec());
    }
    text.split(',')
        .map(|s| s.trim().parse::<Scenario>().map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

fn explicit_flags(m: &ArgMatches) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for id in m.ids() {
        let key = id.as_str();
        if key == "config" {
            continue;
        }
        if m.value_source(key) == Some(clap::parser::ValueSource::CommandLine) {
            if let Ok(Some(v)) = m.try_get_one::<String>(key) {
                out.insert(key.to_string(), v.clone());
            }
        }
    }
    out
}

pub fn usage() -> String {
    build_command().render_help().to_string()
}

/// Parses the full argument list (program name first).
///
/// Help and version requests surface as `Err(clap::Error)` in the outer
/// result so the caller can print them and exit 0.
pub fn parse_args<I, S>(argv: I) -> Result<CliResult<CliConfig>, clap::Error>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let matches = match build_command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Err(e),
                _ => Ok(Err(CliError::Usage(e.render().to_string()))),
            };
        }
    };
    Ok(resolve(&matches, argv))
}

fn resolve(matches: &ArgMatches, argv: Vec<String>) -> CliResult<CliConfig> {
    let (name, sub) = matches
        .subcommand()
        .ok_or_else(|| CliError::Usage(usage()))?;
    let command = CommandKind::ALL
        .into_iter()
        .find(|k| k.name() == name)
        .ok_or_else(|| CliError::Usage(format!("unknown command {name:?}")))?;

    let config_file = sub
        .get_one::<String>("config")
        .or_else(|| matches.get_one::<String>("config"))
        .map(PathBuf::from);
    let mut flags = match &config_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| {
                CliError::Usage(format!("cannot read config file {}: {source}", path.display()))
            })?;
            parse_config_file(&text)?
        }
        None => BTreeMap::new(),
    };
    flags.extend(explicit_flags(matches));
    flags.extend(explicit_flags(sub));
    build_config(command, argv, config_file, flags)
}

fn build_config(
    command: CommandKind,
    argv: Vec<String>,
    config_file: Option<PathBuf>,
    flags: BTreeMap<String, String>,
) -> CliResult<CliConfig> {
    let s = Settings { map: &flags };

    let is_bench = matches!(command, K::Scenario | K::Suite);
    let suite_defaults = SuiteSettings::default();
    let base = if is_bench {
        suite_defaults.bench.clone()
    } else {
        BenchConfig::default()
    };

    let default_method = match command {
        K::Spectral | K::Pacf => DecompositionMethod::None,
        K::Decompose => DecompositionMethod::Emd,
        _ => DecompositionMethod::Ceemd,
    };
    let method = s.or("method", default_method)?;
    let seed: Option<u64> = s.get("seed")?;

    let mut sift = SiftConfig {
        boundary_policy: s.or("boundary-policy", BoundaryPolicy::default())?,
        ..SiftConfig::default()
    };
    if let Some(m) = s.limit("max-imfs")? {
        sift.max_imfs = m;
    }
    sift.max_sift_iterations = s.or("max-sift", sift.max_sift_iterations)?;
    if let Some(eps) = s.get::<f64>("epsilon")? {
        sift.epsilon = Threshold::RelativeToStd(eps);
    }
    if let Some(norm) = s.raw("stop-norm") {
        sift.stop_norm = match norm {
            "max" => StopNorm::MaxAbs,
            "mean" => StopNorm::MeanAbs,
            other => return Err(CliError::Usage(format!("invalid --stop-norm {other:?} (max, mean)"))),
        };
    }
    let ensemble = EnsembleConfig {
        num_ensembles: s.or("ne", base.forecast.ensemble.num_ensembles)?,
        noise_std_fraction: s.or("noise", base.forecast.ensemble.noise_std_fraction)?,
        master_seed: seed.unwrap_or(0),
        sift,
    };

    let engine: EngineKind = s.or("engine", EngineKind::Elm)?;
    let mut bench = base.clone();
    let fc = &mut bench.forecast;
    fc.method = method;
    fc.ensemble = ensemble.clone();
    fc.engine = engine;
    fc.seed = seed.unwrap_or(0);
    if let Some(l) = s.raw("lags") {
        fc.lag_pool = parse_lag_list(l)?;
    }
    fc.mrmr_k = s.or("k", fc.mrmr_k)?;
    fc.mi_bins = s.or("bins", fc.mi_bins)?;
    fc.folds = s.or("folds", fc.folds)?;
    if let Some(v) = s.list("elm-hidden")? {
        fc.elm_hidden = v;
    }
    if let Some(v) = s.list("svr-c")? {
        fc.svr_c = v;
    }
    if let Some(v) = s.list("svr-gamma")? {
        fc.svr_gamma = v;
    }
    fc.svr_epsilon_fraction = s.or("svr-epsilon", fc.svr_epsilon_fraction)?;
    if let Some(v) = s.limit("max-train-rows")? {
        fc.max_train_rows = v;
    }
    fc.update_mode = match s.raw("update-mode") {
        None => fc.update_mode,
        Some("refresh") => UpdateMode::Refresh,
        Some("retrain") => UpdateMode::Retrain,
        Some(other) => {
            return Err(CliError::Usage(format!("invalid --update-mode {other:?} (refresh, retrain)")))
        }
    };
    bench.train_fraction = s.or("train-fraction", bench.train_fraction)?;
    if let Some(v) = s.limit("max-test-steps")? {
        bench.max_test_steps = v;
    }
    if let Some(v) = s.limit("sliding-window")? {
        bench.sliding_window = v;
    }

    let scenarios = match s.raw("scenario") {
        Some(text) => parse_scenarios(text)?,
        None if command == K::Forecast => vec![Scenario::II],
        None => Scenario::ALL.to_vec(),
    };
    if command == K::Forecast && scenarios.len() != 1 {
        return Err(CliError::Usage("forecast takes exactly one --scenario".to_string()));
    }

    let preset: Option<Preset> = s.get("preset")?;
    let input = s.raw("input").map(PathBuf::from);
    let cfg = CliConfig {
        command,
        argv,
        config_file,
        output_dir: PathBuf::from(s.raw("output-dir").unwrap_or("out")),
        threads: s.get("threads")?,
        input,
        method,
        ensemble,
        engine,
        preset,
        length: s.or("length", suite_defaults.length)?,
        seed,
        scenarios,
        bench,
        presets: s.list("presets")?.unwrap_or_else(|| vec![Preset::Load, Preset::Wind]),
        engines: s.list("engines")?.unwrap_or_else(|| vec![EngineKind::Elm, EngineKind::Svr]),
        seeds: s.list("seeds")?.unwrap_or_default(),
        window: s.or("window", if command == K::Boundary { 48 } else { crate::spectral::DEFAULT_WINDOW })?,
        hop: s.or("hop", crate::spectral::DEFAULT_HOP)?,
        max_lag: s.or("max-lag", 48)?,
        lookahead: s.or("lookahead", 48)?,
        flags,
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn require(cond: bool, msg: impl Into<String>) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Usage(msg.into()))
    }
}

fn param(r: crate::Result<()>) -> CliResult<()> {
    r.map_err(|e| CliError::Usage(e.to_string()))
}

/// Checks every parameter the command will use before anything runs.
fn validate(c: &CliConfig) -> CliResult<()> {
    if let Some(t) = c.threads {
        require(t >= 1, "--threads must be >= 1")?;
    }
    let randomized_method = matches!(c.method, DecompositionMethod::Eemd | DecompositionMethod::Ceemd);
    let needs_source = matches!(c.command, K::Forecast | K::Scenario | K::Boundary);
    let needs_input = matches!(c.command, K::Decompose | K::Spectral | K::Pacf);
    if needs_input {
        require(c.input.is_some(), format!("{} needs --input <CSV>", c.command.name()))?;
    }
    if needs_source {
        require(
            c.input.is_some() || c.preset.is_some(),
            format!("{} needs --input <CSV> or --preset <load|wind>", c.command.name()),
        )?;
        require(
            !(c.input.is_some() && c.preset.is_some()),
            "--input and --preset are mutually exclusive",
        )?;
    }
    let needs_seed = match c.command {
        K::Decompose | K::Spectral | K::Pacf => randomized_method,
        K::Forecast | K::Scenario | K::Synth => true,
        K::Boundary => c.input.is_none(),
        K::Suite => false,
    };
    if needs_seed {
        require(
            c.seed.is_some(),
            format!("{} needs an explicit --seed (or `seed = ...` in the config file)", c.command.name()),
        )?;
    }
    if c.command == K::Synth {
        require(c.preset.is_some(), "synth needs --preset <load|wind>")?;
    }
    if matches!(c.command, K::Synth | K::Forecast | K::Scenario | K::Suite | K::Boundary) {
        require(c.length >= 2, "--length must be >= 2")?;
    }
    if c.command == K::Suite {
        require(!c.seeds.is_empty(), "suite needs --seeds, e.g. --seeds 1,2,3,4,5")?;
        require(!c.presets.is_empty(), "--presets must list at least one preset")?;
        require(!c.engines.is_empty(), "--engines must list at least one engine")?;
    }
    match c.method.as_method() {
        Some(crate::emd::Method::Emd) => param(c.ensemble.sift.validate())?,
        Some(m) => param(c.ensemble.validate(m))?,
        None => param(c.ensemble.sift.validate())?,
    }
    if matches!(c.command, K::Forecast | K::Scenario | K::Suite) {
        if c.scenarios.iter().any(|&s| s != Scenario::III) {
            param(c.bench.validate())?;
        } else {
            param(c.bench.forecast.validate())?;
        }
    }
    match c.command {
        K::Spectral => {
            require(c.window >= 2 && c.window.is_multiple_of(2), "--window must be even and >= 2")?;
            require(c.hop >= 1, "--hop must be >= 1")?;
        }
        K::Pacf => require(c.max_lag >= 1, "--max-lag must be >= 1")?,
        K::Boundary => require(c.window >= 1, "--window must be >= 1")?,
        _ => {}
    }
    Ok(())
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let cfg = match parse_args(argv) {
        Err(help) => {
            let _ = help.print();
            return EXIT_OK;
        }
        Ok(Err(e)) => {
            eprintln!("{e}");
            if !matches!(&e, CliError::Usage(msg) if msg.contains("Usage:")) {
                eprintln!("Run `emd-forecast --help` for usage.");
            }
            return e.exit_code();
        }
        Ok(Ok(cfg)) => cfg,
    };
    match dispatch(&cfg) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub(crate) fn output_path(cfg: &CliConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

pub(crate) fn display(p: &Path) -> String {
    p.display().to_string()
}
