//! Empirical mode decomposition: sifting, IMF extraction and reconstruction.

mod extrema;
mod spline;

use serde::{Deserialize, Serialize};

pub use extrema::{extend_extrema, find_extrema, is_monotone, BoundaryPolicy, ExtremaSet, Extremum};
pub use spline::{envelope, NaturalSpline};

use crate::numeric::{max_abs, std_dev};
use crate::{Error, Result};

/// Norm applied to the mean envelope when testing the sifting stop criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopNorm {
    #[default]
    MaxAbs,
    MeanAbs,
}

/// Mean-envelope threshold, either absolute or relative to the input's std.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Absolute(f64),
    RelativeToStd(f64),
}

impl Threshold {
    pub fn resolve(self, x: &[f64]) -> f64 {
        match self {
            Threshold::Absolute(eps) => eps,
            Threshold::RelativeToStd(frac) => frac * std_dev(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiftConfig {
    pub epsilon: Threshold,
    pub stop_norm: StopNorm,
    pub max_sift_iterations: usize,
    /// `None` means `floor(log2 N)`; explicit values are capped by it.
    pub max_imfs: Option<usize>,
    pub boundary_policy: BoundaryPolicy,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self {
            epsilon: Threshold::RelativeToStd(1e-4),
            stop_norm: StopNorm::MaxAbs,
            max_sift_iterations: 10,
            max_imfs: None,
            boundary_policy: BoundaryPolicy::LinearExtrapolation,
        }
    }
}

impl SiftConfig {
    pub fn validate(&self) -> Result<()> {
        let eps = match self.epsilon {
            Threshold::Absolute(e) | Threshold::RelativeToStd(e) => e,
        };
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::invalid("epsilon", "must be finite and > 0"));
        }
        if self.max_sift_iterations == 0 {
            return Err(Error::invalid("max_sift_iterations", "must be >= 1"));
        }
        if self.max_imfs == Some(0) {
            return Err(Error::invalid("max_imfs", "must be >= 1"));
        }
        Ok(())
    }

    /// Effective IMF limit for a series of length `n`.
    pub fn imf_limit(&self, n: usize) -> usize {
        let auto = max_imf_count(n);
        self.max_imfs.map_or(auto, |m| m.min(auto))
    }
}

/// `floor(log2 n)`.
pub fn max_imf_count(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        n.ilog2() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Emd,
    Eemd,
    Ceemd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Emd => "emd",
            Method::Eemd => "eemd",
            Method::Ceemd => "ceemd",
        }
    }
}

/// Ensemble settings recorded alongside an ensemble decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub num_ensembles: usize,
    pub noise_std_fraction: f64,
    pub master_seed: u64,
}

/// Ordered IMFs plus residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub imfs: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
    pub method: Method,
    pub sift: SiftConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleMeta>,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.residual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residual.is_empty()
    }

    pub fn imf_count(&self) -> usize {
        self.imfs.len()
    }

    /// IMFs followed by the residual.
    pub fn components(&self) -> impl Iterator<Item = &[f64]> {
        self.imfs
            .iter()
            .map(Vec::as_slice)
            .chain(std::iter::once(self.residual.as_slice()))
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        let mut c = self.imfs;
        c.push(self.residual);
        c
    }
}

/// One sifting pass: `h = x - (LE + UE)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiftStep {
    pub h: Vec<f64>,
    pub mean_envelope: Vec<f64>,
}

pub fn sift_once(x: &[f64], config: &SiftConfig) -> Result<SiftStep> {
    let ext = find_extrema(x)?;
    if ext.count() == 0 {
        return Err(Error::Monotone);
    }
    let ext = extend_extrema(&ext, x, config.boundary_policy)?;
    let n = x.len();
    let upper = envelope(&ext.maxima, n)?;
    let lower = envelope(&ext.minima, n)?;
    let mean_envelope: Vec<f64> = lower
        .iter()
        .zip(&upper)
        .map(|(lo, up)| (lo + up) / 2.0)
        .collect();
    let h = x.iter().zip(&mean_envelope).map(|(v, m)| v - m).collect();
    Ok(SiftStep { h, mean_envelope })
}

fn envelope_norm(m: &[f64], norm: StopNorm) -> f64 {
    match norm {
        StopNorm::MaxAbs => max_abs(m),
        StopNorm::MeanAbs => m.iter().map(|v| v.abs()).sum::<f64>() / m.len() as f64,
    }
}

/// One IMF together with sifting diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedImf {
    pub imf: Vec<f64>,
    pub iterations_used: usize,
    /// Norm of the mean envelope in the last sift performed.
    pub final_mean_norm: f64,
}

/// Sifts until the mean envelope falls below the threshold or the iteration cap.
pub fn extract_imf(x: &[f64], config: &SiftConfig) -> Result<ExtractedImf> {
    config.validate()?;
    let eps = config.epsilon.resolve(x);
    extract_with_threshold(x, config, eps)
}

fn extract_with_threshold(x: &[f64], config: &SiftConfig, eps: f64) -> Result<ExtractedImf> {
    let mut step = sift_once(x, config)?;
    let mut iterations = 1;
    let mut norm = envelope_norm(&step.mean_envelope, config.stop_norm);
    while norm > eps && iterations < config.max_sift_iterations {
        match sift_once(&step.h, config) {
            Ok(next) => {
                norm = envelope_norm(&next.mean_envelope, config.stop_norm);
                step = next;
                iterations += 1;
            }
            // h lost its interior extrema; keep the last sifted version.
            Err(Error::Monotone) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(ExtractedImf {
        imf: step.h,
        iterations_used: iterations,
        final_mean_norm: norm,
    })
}

/// Diagnostics for each extracted IMF.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmdTrace {
    pub iterations: Vec<usize>,
    pub final_mean_norms: Vec<f64>,
    pub threshold: f64,
}

/// Plain EMD: extracts IMFs until the residual has at most one interior
/// extremum or the IMF limit is reached.
pub fn emd(x: &[f64], config: &SiftConfig) -> Result<Decomposition> {
    emd_traced(x, config).map(|(d, _)| d)
}

pub fn emd_traced(x: &[f64], config: &SiftConfig) -> Result<(Decomposition, EmdTrace)> {
    config.validate()?;
    if x.len() < 8 {
        return Err(Error::TooShort {
            required: 8,
            actual: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite sample".to_string()));
    }
    let limit = config.imf_limit(x.len());
    let eps = config.epsilon.resolve(x);
    let mut trace = EmdTrace {
        threshold: eps,
        ..EmdTrace::default()
    };
    let mut residual = x.to_vec();
    let mut imfs = Vec::new();
    while imfs.len() < limit {
        if find_extrema(&residual)?.count() <= 1 {
            break;
        }
        let extracted = extract_with_threshold(&residual, config, eps)?;
        for (r, v) in residual.iter_mut().zip(&extracted.imf) {
            *r -= v;
        }
        trace.iterations.push(extracted.iterations_used);
        trace.final_mean_norms.push(extracted.final_mean_norm);
        imfs.push(extracted.imf);
    }
    Ok((
        Decomposition {
            imfs,
            residual,
            method: Method::Emd,
            sift: config.clone(),
            ensemble: None,
        },
        trace,
    ))
}

/// Elementwise sum of all IMFs and the residual.
pub fn reconstruct(d: &Decomposition) -> Result<Vec<f64>> {
    let n = d.residual.len();
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    let mut out = d.residual.clone();
    for imf in &d.imfs {
        if imf.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: imf.len(),
            });
        }
        for (o, v) in out.iter_mut().zip(imf) {
            *o += v;
        }
    }
    Ok(out)
}
