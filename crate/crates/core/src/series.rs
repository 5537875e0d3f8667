//! Hourly time series: CSV ingestion, scaling, splitting and synthetic
//! load/wind generators.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

/// Number of AR(1) samples discarded before the first emitted value.
const AR_WARMUP: usize = 100;

/// A uniformly sampled series of finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    start_time: DateTime<Utc>,
    step_seconds: i64,
    values: Vec<f64>,
    name: String,
}

impl TimeSeries {
    pub fn new(
        name: impl Into<String>,
        start_time: DateTime<Utc>,
        step: Duration,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(line) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                line: line + 1,
                value: values[line],
            });
        }
        if step <= Duration::zero() {
            return Err(Error::invalid("step", "must be positive"));
        }
        Ok(Self {
            start_time,
            step_seconds: step.num_seconds(),
            values,
            name: name.into(),
        })
    }

    /// Hourly series starting at the Unix epoch.
    pub fn hourly(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(name, DateTime::UNIX_EPOCH, Duration::hours(1), values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn start_time(&self) -> DateTime<Utc> {
        self.start_time
    }

    pub fn step(&self) -> Duration {
        Duration::seconds(self.step_seconds)
    }

    pub fn timestamp(&self, index: usize) -> DateTime<Utc> {
        self.start_time + Duration::seconds(self.step_seconds * index as i64)
    }

    /// Same timing and name, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.name.clone(), self.start_time, self.step(), values)
    }

    /// Contiguous sub-range `[start, end)` with its timestamps preserved.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::invalid(
                "range",
                format!("[{start}, {end}) outside series of length {}", self.len()),
            ));
        }
        Self::new(
            self.name.clone(),
            self.timestamp(start),
            self.step(),
            self.values[start..end].to_vec(),
        )
    }
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

/// Reads a `timestamp,value` CSV with strictly hourly timestamps.
pub fn load_csv(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".to_string());
    read_csv(file, name)
}

pub fn read_csv<R: Read>(reader: R, name: impl Into<String>) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    if header.len() != 2 || &header[0] != "timestamp" || &header[1] != "value" {
        return Err(Error::MalformedRow {
            line: 1,
            reason: "header must be `timestamp,value`".to_string(),
        });
    }

    let step = Duration::hours(1);
    let mut start: Option<DateTime<Utc>> = None;
    let mut prev: Option<DateTime<Utc>> = None;
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let t = DateTime::parse_from_rfc3339(&record[0])
            .map_err(|e| Error::MalformedRow {
                line,
                reason: format!("bad timestamp {:?}: {e}", &record[0]),
            })?
            .with_timezone(&Utc);
        let value: f64 = record[1].parse().map_err(|_| Error::NonNumericValue {
            line,
            value: record[1].to_string(),
        })?;
        if !value.is_finite() {
            return Err(Error::NonFiniteValue { line, value });
        }
        if let Some(p) = prev {
            let expected = p + step;
            if t != expected {
                return Err(Error::TimestampGap {
                    line,
                    expected: format_timestamp(&expected),
                    found: format_timestamp(&t),
                });
            }
        }
        start.get_or_insert(t);
        prev = Some(t);
        values.push(value);
    }
    let start = start.ok_or(Error::EmptySeries)?;
    TimeSeries::new(name, start, step, values)
}

pub fn write_csv<W: Write>(ts: &TimeSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "value"])?;
    for (i, v) in ts.values().iter().enumerate() {
        w.write_record([format_timestamp(&ts.timestamp(i)), v.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Affine map between an observed range and a target range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub observed_min: f64,
    pub observed_max: f64,
    pub target_low: f64,
    pub target_high: f64,
}

impl ScaleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.observed_min < self.observed_max) {
            return Err(Error::invalid("observed range", "min must be below max"));
        }
        if !(self.target_low < self.target_high) {
            return Err(Error::invalid("target range", "low must be below high"));
        }
        Ok(())
    }

    fn forward(&self, v: f64) -> f64 {
        if v == self.observed_max {
            return self.target_high;
        }
        let unit = (v - self.observed_min) / (self.observed_max - self.observed_min);
        (unit * (self.target_high - self.target_low) + self.target_low)
            .clamp(self.target_low, self.target_high)
    }

    fn inverse(&self, v: f64) -> f64 {
        let unit = (v - self.target_low) / (self.target_high - self.target_low);
        unit * (self.observed_max - self.observed_min) + self.observed_min
    }
}

pub fn normalize(
    ts: &TimeSeries,
    target_low: f64,
    target_high: f64,
) -> Result<(TimeSeries, ScaleParams)> {
    let (lo, hi) = ts
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo == hi {
        return Err(Error::ZeroRange);
    }
    let params = ScaleParams {
        observed_min: lo,
        observed_max: hi,
        target_low,
        target_high,
    };
    params.validate()?;
    let values = ts.values().iter().map(|&v| params.forward(v)).collect();
    Ok((ts.with_values(values)?, params))
}

pub fn denormalize(ts: &TimeSeries, params: &ScaleParams) -> Result<TimeSeries> {
    params.validate()?;
    ts.with_values(ts.values().iter().map(|&v| params.inverse(v)).collect())
}

/// Splits at `floor(N * train_fraction)` without reordering.
pub fn train_test_split(ts: &TimeSeries, train_fraction: f64) -> Result<(TimeSeries, TimeSeries)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(
            "train_fraction",
            format!("{train_fraction} not in (0, 1)"),
        ));
    }
    let n = ts.len();
    let split = (n as f64 * train_fraction).floor() as usize;
    if split == 0 || split >= n {
        return Err(Error::invalid(
            "train_fraction",
            format!("split of {n} samples at {split} leaves an empty part"),
        ));
    }
    Ok((ts.slice(0, split)?, ts.slice(split, n)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub period_hours: f64,
    pub phase: f64,
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub length: usize,
    pub sinusoids: Vec<Sinusoid>,
    pub ar1_coefficient: f64,
    pub noise_std: f64,
    pub trend_slope: f64,
    /// Constant offset added to every sample.
    #[serde(default)]
    pub level: f64,
    /// Clip negative samples to zero.
    #[serde(default)]
    pub clip_at_zero: bool,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::invalid("length", "must be at least 2"));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::invalid("noise_std", "must be finite and >= 0"));
        }
        if !(self.ar1_coefficient.abs() < 1.0) {
            return Err(Error::invalid("ar1_coefficient", "|phi| must be < 1"));
        }
        for s in &self.sinusoids {
            if !(s.period_hours > 0.0) || !s.amplitude.is_finite() || !s.phase.is_finite() {
                return Err(Error::invalid("sinusoids", "period must be positive and finite"));
            }
        }
        if !self.trend_slope.is_finite() || !self.level.is_finite() {
            return Err(Error::invalid("trend_slope", "must be finite"));
        }
        Ok(())
    }
}

/// Built-in synthetic presets standing in for real load and wind data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Daily and weekly cycles on a ~1000 MW base with AR(1) noise.
    Load,
    /// 12 h cycle under strong AR(1) noise, clipped at zero.
    Wind,
}

impl Preset {
    pub fn spec(self, length: usize, seed: u64) -> SynthSpec {
        match self {
            Preset::Load => SynthSpec {
                length,
                sinusoids: vec![
                    Sinusoid {
                        amplitude: 150.0,
                        period_hours: 24.0,
                        phase: 0.0,
                    },
                    Sinusoid {
                        amplitude: 80.0,
                        period_hours: 168.0,
                        phase: 1.0,
                    },
                ],
                ar1_coefficient: 0.8,
                noise_std: 15.0,
                trend_slope: 0.0,
                level: 1000.0,
                clip_at_zero: false,
                seed,
            },
            Preset::Wind => SynthSpec {
                length,
                sinusoids: vec![Sinusoid {
                    amplitude: 2.5,
                    period_hours: 12.0,
                    phase: 0.0,
                }],
                ar1_coefficient: 0.95,
                noise_std: 1.0,
                trend_slope: 0.0,
                level: 6.0,
                clip_at_zero: true,
                seed,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Load => "load",
            Preset::Wind => "wind",
        }
    }

    /// MAPE is only meaningful when actual values cannot be zero.
    pub fn reports_mape(self) -> bool {
        matches!(self, Preset::Load)
    }

    pub fn generate(self, length: usize, seed: u64) -> Result<TimeSeries> {
        let mut ts = synth_generate(&self.spec(length, seed))?;
        ts.name = self.name().to_string();
        Ok(ts)
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "load" => Ok(Preset::Load),
            "wind" => Ok(Preset::Wind),
            other => Err(Error::invalid("preset", format!("unknown preset {other:?}"))),
        }
    }
}

pub fn synth_generate(spec: &SynthSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let innovations = Normal::new(0.0, spec.noise_std)
        .map_err(|e| Error::invalid("noise_std", e.to_string()))?;

    let mut e = 0.0;
    for _ in 0..AR_WARMUP {
        e = spec.ar1_coefficient * e + innovations.sample(&mut rng);
    }

    let tau = std::f64::consts::TAU;
    let values = (0..spec.length)
        .map(|n| {
            e = spec.ar1_coefficient * e + innovations.sample(&mut rng);
            let t = n as f64;
            let periodic: f64 = spec
                .sinusoids
                .iter()
                .map(|s| s.amplitude * (tau * t / s.period_hours + s.phase).sin())
                .sum();
            let v = spec.level + spec.trend_slope * t + periodic + e;
            if spec.clip_at_zero {
                v.max(0.0)
            } else {
                v
            }
        })
        .collect();
    let start = Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap();
    TimeSeries::new("synthetic", start, Duration::hours(1), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_of(rows: &[(&str, &str)]) -> String {
        let mut s = String::from("timestamp,value\n");
        for (t, v) in rows {
            s.push_str(&format!("{t},{v}\n"));
        }
        s
    }

    #[test]
    fn reads_well_formed_rows() {
        let text = csv_of(&[
            ("2019-03-30T00:00:00Z", "1.0"),
            ("2019-03-30T01:00:00Z", "2.0"),
            ("2019-03-30T02:00:00Z", "3.0"),
        ]);
        let ts = read_csv(text.as_bytes(), "x").unwrap();
        assert_eq!(ts.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn non_numeric_value_names_its_line() {
        let text = csv_of(&[("2019-03-30T00:00:00Z", "abc")]);
        match read_csv(text.as_bytes(), "x") {
            Err(Error::NonNumericValue { line, value }) => {
                assert_eq!(line, 2);
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn timestamp_gap_is_rejected() {
        let text = csv_of(&[
            ("2019-03-30T00:00:00Z", "1"),
            ("2019-03-30T02:00:00Z", "2"),
        ]);
        assert!(matches!(
            read_csv(text.as_bytes(), "x"),
            Err(Error::TimestampGap { line: 3, .. })
        ));
    }

    #[test]
    fn disorder_and_malformed_rows_are_rejected() {
        let text = csv_of(&[
            ("2019-03-30T01:00:00Z", "1"),
            ("2019-03-30T00:00:00Z", "2"),
        ]);
        assert!(matches!(
            read_csv(text.as_bytes(), "x"),
            Err(Error::TimestampGap { .. })
        ));
        let text = "timestamp,value\n2019-03-30T00:00:00Z,1,9\n";
        assert!(matches!(
            read_csv(text.as_bytes(), "x"),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        assert!(matches!(
            load_csv("/nonexistent/file.csv"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn normalize_maps_endpoints() {
        let ts = TimeSeries::hourly("x", vec![2.0, 4.0, 6.0]).unwrap();
        let (n, p) = normalize(&ts, -1.0, 1.0).unwrap();
        assert_eq!(n.values(), &[-1.0, 0.0, 1.0]);
        let back = denormalize(&n, &p).unwrap();
        assert_eq!(back.values(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn normalize_rejects_constant_series() {
        let ts = TimeSeries::hourly("x", vec![5.0; 3]).unwrap();
        assert!(matches!(normalize(&ts, -1.0, 1.0), Err(Error::ZeroRange)));
    }

    #[test]
    fn identity_params_leave_series_unchanged() {
        let ts = TimeSeries::hourly("x", vec![2.0, 3.5, 6.0]).unwrap();
        let p = ScaleParams {
            observed_min: 2.0,
            observed_max: 6.0,
            target_low: 2.0,
            target_high: 6.0,
        };
        assert_eq!(denormalize(&ts, &p).unwrap().values(), ts.values());
    }

    #[test]
    fn split_uses_floor() {
        let ts = TimeSeries::hourly("x", (0..10).map(f64::from).collect()).unwrap();
        let (a, b) = train_test_split(&ts, 0.8).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(b.start_time(), ts.timestamp(8));
        let ts = TimeSeries::hourly("x", (0..100).map(f64::from).collect()).unwrap();
        let (a, b) = train_test_split(&ts, 0.8).unwrap();
        assert_eq!((a.len(), b.len()), (80, 20));
        assert!(train_test_split(&ts, 1.0).is_err());
        assert!(train_test_split(&ts, 0.0).is_err());
        let tiny = TimeSeries::hourly("x", vec![1.0, 2.0]).unwrap();
        assert!(train_test_split(&tiny, 0.3).is_err());
    }

    #[test]
    fn noiseless_sinusoid_matches_closed_form() {
        let spec = SynthSpec {
            length: 200,
            sinusoids: vec![Sinusoid {
                amplitude: 1.0,
                period_hours: 24.0,
                phase: 0.0,
            }],
            ar1_coefficient: 0.0,
            noise_std: 0.0,
            trend_slope: 0.0,
            level: 0.0,
            clip_at_zero: false,
            seed: 3,
        };
        let ts = synth_generate(&spec).unwrap();
        for (n, v) in ts.values().iter().enumerate() {
            let expected = (std::f64::consts::TAU * n as f64 / 24.0).sin();
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let mut spec = Preset::Load.spec(100, 1);
        spec.ar1_coefficient = 1.0;
        assert!(synth_generate(&spec).is_err());
        let mut spec = Preset::Load.spec(1, 1);
        assert!(synth_generate(&spec).is_err());
        spec.length = 10;
        spec.noise_std = -1.0;
        assert!(synth_generate(&spec).is_err());
    }

    #[test]
    fn wind_preset_is_nonnegative_and_load_positive() {
        let w = Preset::Wind.generate(2000, 4).unwrap();
        assert!(w.values().iter().all(|&v| v >= 0.0));
        assert!(w.values().contains(&0.0));
        let l = Preset::Load.generate(2000, 4).unwrap();
        assert!(l.values().iter().all(|&v| v > 0.0));
    }
}
