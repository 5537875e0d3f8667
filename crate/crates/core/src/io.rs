//! File formats: decomposition, spectrogram, PACF, lag selection, model,
//! forecast and boundary-divergence outputs. All text is UTF-8 with `\n`
//! line endings.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bench::{BoundaryDivergence, ScenarioRun};
use crate::emd::{Decomposition, EnsembleMeta, Method, SiftConfig};
use crate::features::MrmrSelection;
use crate::series::{format_timestamp, TimeSeries};
use crate::spectral::{PacfResult, Spectrogram};
use crate::{Error, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::Io {
        path: "<json>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = create_file(path)?;
    write_json(value, &mut w)?;
    w.flush().map_err(io_err(path))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// Header row `timestamp,imf1,...,imfK,residual`.
pub fn decomposition_header(imf_count: usize) -> Vec<String> {
    std::iter::once("timestamp".to_string())
        .chain((1..=imf_count).map(|k| format!("imf{k}")))
        .chain(std::iter::once("residual".to_string()))
        .collect()
}

/// One row per sample; timestamps come from `ts`.
pub fn write_decomposition_csv<W: Write>(ts: &TimeSeries, d: &Decomposition, w: W) -> Result<()> {
    if d.len() != ts.len() {
        return Err(Error::LengthMismatch {
            expected: ts.len(),
            actual: d.len(),
        });
    }
    let mut w = csv_writer(w);
    w.write_record(decomposition_header(d.imf_count()))?;
    for i in 0..d.len() {
        let mut row = vec![format_timestamp(&ts.timestamp(i))];
        row.extend(d.components().map(|c| c[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Parses a decomposition CSV back into `(timestamps, components)`, the
/// components being the IMFs followed by the residual.
pub fn read_decomposition_csv<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(r);
    let header = rdr.headers()?.clone();
    let width = header.len();
    if width < 2 || &header[0] != "timestamp" || &header[width - 1] != "residual" {
        return Err(Error::MalformedRow {
            line: 1,
            reason: "expected timestamp,imf1,...,residual".to_string(),
        });
    }
    let mut stamps = Vec::new();
    let mut comps = vec![Vec::new(); width - 1];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != width {
            return Err(Error::MalformedRow {
                line,
                reason: format!("{} fields, expected {width}", rec.len()),
            });
        }
        stamps.push(rec[0].to_string());
        for (c, field) in comps.iter_mut().zip(rec.iter().skip(1)) {
            c.push(field.parse().map_err(|_| Error::NonNumericValue {
                line,
                value: field.to_string(),
            })?);
        }
    }
    Ok((stamps, comps))
}

/// JSON sidecar describing how a decomposition was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionInfo {
    pub method: Method,
    pub num_ensembles: Option<usize>,
    pub noise_std_fraction: Option<f64>,
    pub master_seed: Option<u64>,
    pub imf_count: usize,
    pub length: usize,
    pub sift: SiftConfig,
}

impl DecompositionInfo {
    pub fn of(d: &Decomposition) -> Self {
        let meta: Option<&EnsembleMeta> = d.ensemble.as_ref();
        Self {
            method: d.method,
            num_ensembles: meta.map(|m| m.num_ensembles),
            noise_std_fraction: meta.map(|m| m.noise_std_fraction),
            master_seed: meta.map(|m| m.master_seed),
            imf_count: d.imf_count(),
            length: d.len(),
            sift: d.sift.clone(),
        }
    }
}

/// Long format `frame_start_index,frequency_cycles_per_hour,magnitude`.
pub fn write_spectrogram_csv<W: Write>(s: &Spectrogram, w: W) -> Result<()> {
    let mut w = csv_writer(w);
    w.write_record(["frame_start_index", "frequency_cycles_per_hour", "magnitude"])?;
    for (f, frame) in s.magnitudes.iter().enumerate() {
        for (k, m) in frame.iter().enumerate() {
            w.write_record([
                s.frame_start(f).to_string(),
                s.frequency(k).to_string(),
                m.to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `lag,pacf,band` for lags `1..=max_lag`.
pub fn write_pacf_csv<W: Write>(p: &PacfResult, w: W) -> Result<()> {
    let mut w = csv_writer(w);
    w.write_record(["lag", "pacf", "band"])?;
    for (lag, v) in p.values.iter().enumerate().skip(1) {
        w.write_record([lag.to_string(), v.to_string(), p.confidence_band.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedLags {
    pub component: String,
    pub lags: Vec<usize>,
    pub relevance: Vec<f64>,
    pub k: usize,
    pub bins: usize,
}

impl SelectedLags {
    pub fn new(component: impl Into<String>, sel: &MrmrSelection, bins: usize) -> Self {
        Self {
            component: component.into(),
            lags: sel.lags.clone(),
            relevance: sel.relevance.clone(),
            k: sel.lags.len(),
            bins,
        }
    }
}

/// `timestamp,actual,forecast,component_1,...,component_M` over the test steps.
pub fn write_forecast_csv<W: Write>(ts: &TimeSeries, run: &ScenarioRun, w: W) -> Result<()> {
    let m = run.component_forecasts.first().map_or(0, Vec::len);
    let mut w = csv_writer(w);
    let header: Vec<String> = ["timestamp", "actual", "forecast"]
        .iter()
        .map(|s| s.to_string())
        .chain((1..=m).map(|k| format!("component_{k}")))
        .collect();
    w.write_record(&header)?;
    for (step, (a, f)) in run.actuals.iter().zip(&run.forecasts).enumerate() {
        let mut row = vec![
            format_timestamp(&ts.timestamp(run.test_start + step)),
            a.to_string(),
            f.to_string(),
        ];
        row.extend(run.component_forecasts[step].iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Long format `imf_index,sample_offset,divergence`.
pub fn write_boundary_csv<W: Write>(b: &BoundaryDivergence, w: W) -> Result<()> {
    let mut w = csv_writer(w);
    w.write_record(["imf_index", "sample_offset", "divergence"])?;
    for (k, j, v) in b.rows() {
        w.write_record([k.to_string(), j.to_string(), v.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
