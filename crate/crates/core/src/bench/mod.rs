//! Error metrics, the three evaluation scenarios, the boundary-divergence
//! experiment and the benchmark suite.

mod boundary;
mod scenario;
mod suite;

use serde::{Deserialize, Serialize};

pub use boundary::{boundary_divergence, BoundaryDivergence};
pub use scenario::{evaluate_scenario, prepare_scenario, run_scenario, PreparedScenario, ScenarioRun};
pub use suite::{render_reports, render_table, run_benchmark_suite, CellOutcome, SuiteCell, SuiteReport, SuiteSettings};

use crate::numeric::derive_seed;
use crate::pipeline::{DecompositionMethod, ForecastConfig};
use crate::predict::EngineKind;
use crate::{Error, Result};

fn check_lengths(actual: &[f64], forecast: &[f64]) -> Result<()> {
    if actual.is_empty() {
        return Err(Error::EmptySeries);
    }
    if actual.len() != forecast.len() {
        return Err(Error::LengthMismatch {
            expected: actual.len(),
            actual: forecast.len(),
        });
    }
    Ok(())
}

/// Mean absolute percentage error, `100/L * sum |f - y| / y`.
///
/// The denominator is the signed actual value; any zero actual is an error.
pub fn mape(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_lengths(actual, forecast)?;
    if let Some(index) = actual.iter().position(|&y| y == 0.0) {
        return Err(Error::ZeroDenominator { index });
    }
    let total: f64 = actual
        .iter()
        .zip(forecast)
        .map(|(y, f)| (f - y).abs() / y)
        .sum();
    Ok(total / actual.len() as f64 * 100.0)
}

pub fn rmse(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_lengths(actual, forecast)?;
    let sse: f64 = actual
        .iter()
        .zip(forecast)
        .map(|(y, f)| (f - y) * (f - y))
        .sum();
    Ok((sse / actual.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Decompose the full series once; forecast from oracle component histories.
    I,
    /// Re-decompose the grown history at every test step.
    II,
    /// No decomposition.
    III,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::I, Scenario::II, Scenario::III];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::I => "I",
            Scenario::II => "II",
            Scenario::III => "III",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Scenario::I),
            "II" | "2" => Ok(Scenario::II),
            "III" | "3" => Ok(Scenario::III),
            other => Err(Error::invalid("scenario", format!("unknown scenario {other:?} (I, II, III)"))),
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Pipeline settings; `method` is the decomposition used by Scenarios I and II.
    pub forecast: ForecastConfig,
    pub train_fraction: f64,
    /// Upper bound on test steps, applied to every scenario so they share targets.
    pub max_test_steps: Option<usize>,
    /// Re-decompose only the most recent samples in Scenario II.
    pub sliding_window: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            forecast: ForecastConfig::default(),
            train_fraction: 0.8,
            max_test_steps: Some(200),
            sliding_window: None,
        }
    }
}

impl BenchConfig {
    /// Copy with the engine and seeds of one benchmark cell. The ensemble
    /// seed is derived from `seed` so it never coincides with engine streams.
    pub fn for_cell(&self, engine: EngineKind, seed: u64) -> BenchConfig {
        let mut cfg = self.clone();
        cfg.forecast.engine = engine;
        cfg.forecast.seed = seed;
        cfg.forecast.ensemble.master_seed = derive_seed(seed, u64::MAX);
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.forecast.validate()?;
        if self.forecast.method == DecompositionMethod::None {
            return Err(Error::invalid(
                "method",
                "scenarios I and II need a decomposition method",
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction", "must lie in (0, 1)"));
        }
        if self.max_test_steps == Some(0) {
            return Err(Error::invalid("max_test_steps", "must be >= 1"));
        }
        if let Some(w) = self.sliding_window {
            if w <= self.forecast.max_lag() {
                return Err(Error::invalid(
                    "sliding_window",
                    format!("{w} must exceed the largest lag {}", self.forecast.max_lag()),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub series: String,
    pub scenario: Scenario,
    pub engine: EngineKind,
    /// Percent; absent when the series can reach zero.
    pub mape: Option<f64>,
    pub rmse: f64,
    /// Wall-clock time; kept out of serialised reports so they stay reproducible.
    #[serde(skip)]
    pub runtime_seconds: f64,
    pub seed: u64,
    pub train_len: usize,
    pub test_steps: usize,
    pub component_count: usize,
    pub config: BenchConfig,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        assert_eq!(mape(&[100.0], &[110.0]).unwrap(), 10.0);
        assert_eq!(mape(&[5.0, 7.0], &[5.0, 7.0]).unwrap(), 0.0);
        assert!(matches!(
            mape(&[1.0, 0.0], &[1.0, 1.0]),
            Err(Error::ZeroDenominator { index: 1 })
        ));
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[1.5, 2.5, 3.5]).unwrap(), 0.5);
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn metric_errors() {
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mape(&[], &[]).is_err());
    }

    #[test]
    fn negative_actuals_follow_the_signed_denominator() {
        assert_eq!(mape(&[-100.0], &[-90.0]).unwrap(), -10.0);
    }

    #[test]
    fn scenario_names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        assert!("IV".parse::<Scenario>().is_err());
    }
}
