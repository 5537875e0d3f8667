//! Prediction engines: a sigmoid extreme learning machine and an RBF ε-SVR
//! trained by SMO, plus contiguous-fold grid search.

mod elm;
mod grid;
mod svr;

use serde::{Deserialize, Serialize};

pub use elm::{elm_predict, elm_train, ElmModel};
pub use grid::{grid_search_cv, GridSearchResult};
pub use svr::{rbf_kernel, svr_predict, svr_train, SvrModel, SMO_TOLERANCE};

use crate::features::FeatureMatrix;
use crate::{Error, Result};

/// Per-feature standardisation learned from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub means: Vec<f64>,
    /// Zero-variance features keep a unit scale.
    pub stds: Vec<f64>,
}

impl Scaling {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::TooShort {
            required: 1,
            actual: 0,
        })?;
        let width = first.len();
        let n = rows.len() as f64;
        let mut means = vec![0.0; width];
        for r in rows {
            if r.len() != width {
                return Err(Error::LengthMismatch {
                    expected: width,
                    actual: r.len(),
                });
            }
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stds = vec![0.0; width];
        for r in rows {
            for ((s, v), m) in stds.iter_mut().zip(r).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds = stds
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { means, stds })
    }

    pub fn width(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.width() {
            return Err(Error::LengthMismatch {
                expected: self.width(),
                actual: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Elm,
    Svr,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Elm => "ELM",
            EngineKind::Svr => "SVR",
        }
    }
}

impl std::str::FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "elm" => Ok(EngineKind::Elm),
            "svr" | "svm" => Ok(EngineKind::Svr),
            other => Err(Error::invalid("engine", format!("unknown engine {other:?} (elm, svr)"))),
        }
    }
}

/// Hyperparameters of one grid candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "lowercase")]
pub enum EngineParams {
    Elm { hidden: usize },
    Svr { c: f64, gamma: f64, epsilon: f64 },
}

impl EngineParams {
    pub fn kind(&self) -> EngineKind {
        match self {
            EngineParams::Elm { .. } => EngineKind::Elm,
            EngineParams::Svr { .. } => EngineKind::Svr,
        }
    }
}

/// A trained engine. `Constant` covers components with no variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "lowercase")]
pub enum TrainedEngine {
    Elm(ElmModel),
    Svr(SvrModel),
    Constant { value: f64 },
}

impl TrainedEngine {
    pub fn train(fm: &FeatureMatrix, params: &EngineParams, seed: u64) -> Result<Self> {
        match *params {
            EngineParams::Elm { hidden } => elm_train(fm, hidden, seed).map(TrainedEngine::Elm),
            EngineParams::Svr { c, gamma, epsilon } => {
                svr_train(fm, c, gamma, epsilon).map(TrainedEngine::Svr)
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            TrainedEngine::Elm(m) => elm_predict(m, x),
            TrainedEngine::Svr(m) => svr_predict(m, x),
            TrainedEngine::Constant { value } => Ok(*value),
        }
    }
}

pub(crate) fn rmse_of(engine: &TrainedEngine, fm: &FeatureMatrix) -> Result<f64> {
    let mut sse = 0.0;
    for (row, y) in fm.rows.iter().zip(&fm.targets) {
        let e = engine.predict(row)? - y;
        sse += e * e;
    }
    Ok((sse / fm.len().max(1) as f64).sqrt())
}
