use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use super::{display, output_path, CliConfig, CliError, CliResult, CommandKind};
use crate::bench::{
    boundary_divergence, render_reports, render_table, run_benchmark_suite, run_scenario, ScenarioReport,
    SuiteSettings,
};
use crate::emd::Method;
use crate::ensemble::{decompose, reconstruction_snr};
use crate::io::{
    create_file, save_json, write_boundary_csv, write_decomposition_csv, write_forecast_csv,
    write_pacf_csv, write_spectrogram_csv, DecompositionInfo, SelectedLags,
};
use crate::series::{load_csv, write_csv, TimeSeries};
use crate::spectral::{pacf, stft};
use crate::Error;

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    status: &'static str,
    error: Option<String>,
    exit_code: i32,
    outputs: Vec<String>,
    config: &'a CliConfig,
}

/// Collects written files for the manifest.
struct Outputs<'a> {
    cfg: &'a CliConfig,
    written: Vec<String>,
}

impl Outputs<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        output_path(self.cfg, name)
    }

    fn write_with<F>(&mut self, name: &str, f: F) -> CliResult<()>
    where
        F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> crate::Result<()>,
    {
        let path = self.path(name);
        let mut w = create_file(&path)?;
        f(&mut w)?;
        w.flush().map_err(|source| Error::Io { path, source })?;
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let path = self.path(name);
        save_json(value, &path)?;
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> CliResult<()> {
        let path = self.path(name);
        std::fs::write(&path, text).map_err(|source| Error::Io { path, source })?;
        Ok(())
    }
}

/// Runs the configured command, then records `run_manifest.json` whether or
/// not the command succeeded.
pub fn dispatch(cfg: &CliConfig) -> CliResult<()> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|source| Error::Io {
        path: cfg.output_dir.clone(),
        source,
    })?;
    let mut out = Outputs {
        cfg,
        written: Vec::new(),
    };
    let result = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))
            .and_then(|pool| pool.install(|| run_command(cfg, &mut out))),
        None => run_command(cfg, &mut out),
    };
    let manifest = RunManifest {
        tool: "emd-forecast",
        version: env!("CARGO_PKG_VERSION"),
        status: if result.is_ok() { "ok" } else { "failed" },
        error: result.as_ref().err().map(|e| e.to_string()),
        exit_code: result.as_ref().map_or_else(CliError::exit_code, |_| super::EXIT_OK),
        outputs: out.written.clone(),
        config: cfg,
    };
    save_json(&manifest, &output_path(cfg, "run_manifest.json"))?;
    result
}

fn run_command(cfg: &CliConfig, out: &mut Outputs) -> CliResult<()> {
    match cfg.command {
        CommandKind::Decompose => cmd_decompose(cfg, out),
        CommandKind::Spectral => cmd_spectral(cfg, out),
        CommandKind::Pacf => cmd_pacf(cfg, out),
        CommandKind::Forecast => cmd_forecast(cfg, out),
        CommandKind::Scenario => cmd_scenario(cfg, out),
        CommandKind::Suite => cmd_suite(cfg, out),
        CommandKind::Boundary => cmd_boundary(cfg, out),
        CommandKind::Synth => cmd_synth(cfg, out),
    }
}

fn seed(cfg: &CliConfig) -> u64 {
    cfg.seed.unwrap_or(0)
}

fn load_series(cfg: &CliConfig) -> CliResult<TimeSeries> {
    match (&cfg.input, cfg.preset) {
        (Some(path), _) => Ok(load_csv(path)?),
        (None, Some(preset)) => Ok(preset.generate(cfg.length, seed(cfg))?),
        (None, None) => Err(CliError::Usage("no --input or --preset given".to_string())),
    }
}

/// `(label, values)` for the raw series or for each decomposed component.
fn labelled_components(cfg: &CliConfig, ts: &TimeSeries) -> CliResult<Vec<(String, Vec<f64>)>> {
    let Some(method) = cfg.method.as_method() else {
        return Ok(vec![("series".to_string(), ts.values().to_vec())]);
    };
    let d = decompose(ts.values(), method, &cfg.ensemble)?;
    let k = d.imf_count();
    Ok(d.into_components()
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let label = if i == k {
                "residual".to_string()
            } else {
                format!("imf{}", i + 1)
            };
            (label, c)
        })
        .collect())
}

fn cmd_decompose(cfg: &CliConfig, out: &mut Outputs) -> CliResult<()> {
    let method: Method = cfg
        .method
        .as_method()
        .ok_or_else(|| CliError::Usage("decompose needs --method emd, eemd or ceemd".to_string()))?;
    let ts = load_series(cfg)?;
    let d = decompose(ts.values(), method, &cfg.ensemble)?;
    out.write_with("decomposition.csv", |w| write_decomposition_csv(&ts, &d, w))?;
    out.json("decomposition.json", &DecompositionInfo::of(&d))?;
    let snr = reconstruction_snr(ts.values(), &d)?;
    println!(
        "{}: {} samples, {} IMFs, reconstruction SNR {snr}",
        method.name(),
        d.len(),
        d.imf_count()
    );
    Ok(())
}

fn cmd_spectral(cfg: &CliConfig, out: &mut Outputs) -> CliResult<()> {
    let ts = load_series(cfg)?;
    for (label, values) in labelled_components(cfg, &ts)? {
        let s = stft(&values, cfg.window, cfg.hop)?;
        out.write_with(&format!("spectrogram_{label}.csv"), |w| write_spectrogram_csv(&s, w))?;
        println!("{label}: {} frames x {} bins", s.frame_count(), s.bin_count());
    }
    Ok(())
}

/// A constant component (a flat residual, say) has no PACF; only a constant
/// raw input is an error.
fn labels_components(cfg: &CliConfig) -> bool {
    cfg.method.as_method().is_some()
}

fn cmd_pacf(cfg: &CliConfig, out: &mut Outputs) -> CliResult<()> {
    let ts = load_series(cfg)?;
    for (label, values) in labelled_components(cfg, &ts)? {
        let p = match pacf(&values, cfg.max_lag) {
            Err(Error::ZeroRange) if labels_components(cfg) => {
                println!("{label}: constant, no PACF written");
                continue;
            }
            r => r?,
        };
        out.write_with(&format!("pacf_{label}.csv"), |w| write_pacf_csv(&p, w))?;
        let outside = p.values[1..]
            .iter()
            .filter(|v| v.abs() > p.confidence_band)
            .count();
        println!(
            "{label}: {outside} of {} lags outside +/-{:.4}",
            cfg.max_lag, p.confidence_band
        );
    }
    Ok(())
}

fn wants_mape(cfg: &CliConfig, ts: &TimeSeries) -> bool {
    cfg.preset
        .map_or_else(|| ts.values().iter().all(|&v| v != 0.0), |p| p.reports_mape())
}

fn cmd_forecast(cfg: &CliConfig, out: &mut Outputs) -> CliResult<()> {
    let ts = load_series(cfg)?;
    let bench = cfg.bench.for_cell(cfg.engine, seed(cfg));
    let run = run_scenario(cfg.scenarios[0], &ts, &bench, wants_mape(cfg, &ts))?;
    out.write_with("forecast.csv", |w| write_forecast_csv(&ts, &run, w))?;
    out.json("model.json", &run.model)?;
    let bins = run.model.config.mi_bins;
    let selected: Vec<SelectedLags> = run
        .model
        .components
        .iter()
        .filter_map(|c| c.selection.as_ref().map(|s| SelectedLags::new(c.label.clone(), s, bins)))
        .collect();
    out.json("selected_lags.json", &selected)?;
    out.json("report.json", &run.report)?;
    print!("{}", render_reports(std::slice::from_ref(&run.report)));
    Ok(())
}

fn cmd_scenario(cfg: &CliConfig, out: &mut Outputs) -> CliResult<()> {
    let ts = load_series(cfg)?;
    let bench = cfg.bench.for_cell(cfg.engine, seed(cfg));
    let with_mape = wants_mape(cfg, &ts);
    let reports: Vec<ScenarioReport> = cfg
        .scenarios
        .iter()
        .map(|&s| run_scenario(s, &ts, &bench, with_mape).map(|r| r.report))
        .collect::<crate::Result<_>>()?;
    let table = render_reports(&reports);
    out.json("scenario_report.json", &reports)?;
    out.text("scenario_table.txt", &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_suite(cfg: &CliConfig, out: &mut Outputs) -> CliResult<()> {
    let settings = SuiteSettings {
        length: cfg.length,
        bench: cfg.bench.clone(),
    };
    let report = run_benchmark_suite(&cfg.presets, &cfg.engines, &cfg.seeds, &settings)?;
    let table = render_table(&report);
    out.json("suite_report.json", &report)?;
    out.text("suite_table.txt", &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_boundary(cfg: &CliConfig, out: &mut Outputs) -> CliResult<()> {
    let ts = load_series(cfg)?;
    let b = boundary_divergence(ts.values(), cfg.lookahead, &cfg.ensemble.sift, cfg.window)?;
    out.write_with("boundary.csv", |w| write_boundary_csv(&b, w))?;
    out.json("boundary.json", &b)?;
    for (k, d) in b.per_imf.iter().enumerate() {
        let peak = d.iter().cloned().fold(0.0, f64::max);
        println!("imf{}: max divergence {peak:.6}", k + 1);
    }
    Ok(())
}

fn cmd_synth(cfg: &CliConfig, out: &mut Outputs) -> CliResult<()> {
    let preset = cfg
        .preset
        .ok_or_else(|| CliError::Usage("synth needs --preset".to_string()))?;
    let ts = preset.generate(cfg.length, seed(cfg))?;
    out.write_with("series.csv", |w| write_csv(&ts, w))?;
    out.json("synth_spec.json", &preset.spec(cfg.length, seed(cfg)))?;
    println!(
        "{}: {} samples written to {}",
        preset.name(),
        ts.len(),
        display(&output_path(cfg, "series.csv"))
    );
    Ok(())
}
