use std::time::Instant;

use rayon::prelude::*;

use super::{mape, rmse, BenchConfig, Scenario, ScenarioReport};
use crate::pipeline::{
    components_of, fit_components, forecast_components, refit_components, DecompositionMethod,
    ForecastConfig, ForecastModel, UpdateMode,
};
use crate::series::TimeSeries;
use crate::{Error, Result};

/// Component histories a scenario forecasts from.
#[derive(Debug, Clone, PartialEq)]
enum Histories {
    /// Full-series components; step `s` sees the first `split + s` samples.
    Oracle(Vec<Vec<f64>>),
    /// One re-decomposition per test step.
    Rolling(Vec<Vec<Vec<f64>>>),
    Raw,
}

/// Everything a scenario needs that does not depend on the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedScenario {
    pub scenario: Scenario,
    pub series: String,
    pub values: Vec<f64>,
    pub split: usize,
    pub test_steps: usize,
    /// Component series used for training, each of length `split`.
    pub train_components: Vec<Vec<f64>>,
    histories: Histories,
}

impl PreparedScenario {
    pub fn actuals(&self) -> &[f64] {
        &self.values[self.split..self.split + self.test_steps]
    }

    fn histories_at(&self, step: usize) -> Vec<&[f64]> {
        let end = self.split + step;
        match &self.histories {
            Histories::Oracle(c) => c.iter().map(|c| &c[..end]).collect(),
            Histories::Rolling(steps) => steps[step].iter().map(Vec::as_slice).collect(),
            Histories::Raw => vec![&self.values[..end]],
        }
    }
}

/// Output of one scenario: the report plus the forecasts behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub test_start: usize,
    pub actuals: Vec<f64>,
    pub forecasts: Vec<f64>,
    /// Per-step component forecasts, summing to `forecasts`.
    pub component_forecasts: Vec<Vec<f64>>,
    pub model: ForecastModel,
}

fn split_point(n: usize, config: &BenchConfig) -> Result<(usize, usize)> {
    let split = (n as f64 * config.train_fraction).floor() as usize;
    if split == 0 || split >= n {
        return Err(Error::invalid(
            "train_fraction",
            format!("split of {n} samples at {split} leaves an empty part"),
        ));
    }
    let steps = config.max_test_steps.map_or(n - split, |cap| cap.min(n - split));
    Ok((split, steps))
}

/// Decomposition settings with the IMF count pinned to `imfs`.
fn capped(config: &ForecastConfig, imfs: usize) -> ForecastConfig {
    let mut c = config.clone();
    let sift = &mut c.ensemble.sift;
    sift.max_imfs = Some(sift.max_imfs.map_or(imfs, |m| m.min(imfs)).max(1));
    c
}

/// Pads with zero IMFs (before the residual) up to `count` components.
fn align_components(mut comps: Vec<Vec<f64>>, count: usize) -> Result<Vec<Vec<f64>>> {
    if comps.len() > count {
        return Err(Error::Degenerate(format!(
            "re-decomposition produced {} components, model has {count}",
            comps.len()
        )));
    }
    let n = comps[0].len();
    let residual = comps.pop().expect("at least the residual");
    comps.resize(count - 1, vec![0.0; n]);
    comps.push(residual);
    Ok(comps)
}

/// Runs the engine-independent part of a scenario: the split and all
/// decompositions.
pub fn prepare_scenario(
    scenario: Scenario,
    ts: &TimeSeries,
    config: &BenchConfig,
) -> Result<PreparedScenario> {
    config.validate()?;
    let x = ts.values();
    let (split, test_steps) = split_point(x.len(), config)?;
    let fc = &config.forecast;
    let (train_components, histories) = match scenario {
        Scenario::I => {
            let full = components_of(x, fc)?;
            let train = full.iter().map(|c| c[..split].to_vec()).collect();
            (train, Histories::Oracle(full))
        }
        Scenario::II => {
            let train = components_of(&x[..split], fc)?;
            let count = train.len();
            let rolling_cfg = capped(fc, count - 1);
            let keep_full = fc.update_mode == UpdateMode::Retrain;
            let tail = fc.max_lag();
            let steps = (0..test_steps)
                .into_par_iter()
                .map(|s| {
                    let end = split + s;
                    let start = config.sliding_window.map_or(0, |w| end.saturating_sub(w));
                    let comps = align_components(components_of(&x[start..end], &rolling_cfg)?, count)?;
                    Ok(if keep_full {
                        comps
                    } else {
                        comps.into_iter().map(|c| c[c.len().saturating_sub(tail)..].to_vec()).collect()
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (train, Histories::Rolling(steps))
        }
        Scenario::III => (vec![x[..split].to_vec()], Histories::Raw),
    };
    Ok(PreparedScenario {
        scenario,
        series: ts.name().to_string(),
        values: x.to_vec(),
        split,
        test_steps,
        train_components,
        histories,
    })
}

/// Trains on the prepared components and forecasts every test step.
pub fn evaluate_scenario(
    prepared: &PreparedScenario,
    config: &BenchConfig,
    with_mape: bool,
) -> Result<ScenarioRun> {
    let started = Instant::now();
    let mut fc = config.forecast.clone();
    if prepared.scenario == Scenario::III {
        fc.method = DecompositionMethod::None;
    }
    let model = fit_components(&prepared.train_components, &fc)?;
    let retrain = prepared.scenario == Scenario::II && fc.update_mode == UpdateMode::Retrain;

    let mut component_forecasts = Vec::with_capacity(prepared.test_steps);
    for step in 0..prepared.test_steps {
        let histories = prepared.histories_at(step);
        let parts = if retrain && step > 0 {
            let owned: Vec<Vec<f64>> = histories.iter().map(|h| h.to_vec()).collect();
            forecast_components(&refit_components(&model, &owned)?, &histories)?
        } else {
            forecast_components(&model, &histories)?
        };
        component_forecasts.push(parts);
    }
    let forecasts: Vec<f64> = component_forecasts.iter().map(|p| p.iter().sum()).collect();
    let actuals = prepared.actuals().to_vec();
    let report = ScenarioReport {
        series: prepared.series.clone(),
        scenario: prepared.scenario,
        engine: fc.engine,
        mape: if with_mape {
            Some(mape(&actuals, &forecasts)?)
        } else {
            None
        },
        rmse: rmse(&actuals, &forecasts)?,
        runtime_seconds: started.elapsed().as_secs_f64(),
        seed: fc.seed,
        train_len: prepared.split,
        test_steps: prepared.test_steps,
        component_count: model.component_count(),
        config: config.clone(),
    };
    Ok(ScenarioRun {
        report,
        test_start: prepared.split,
        actuals,
        forecasts,
        component_forecasts,
        model,
    })
}

/// Prepares and evaluates one scenario; the report's runtime covers both.
pub fn run_scenario(
    scenario: Scenario,
    ts: &TimeSeries,
    config: &BenchConfig,
    with_mape: bool,
) -> Result<ScenarioRun> {
    let started = Instant::now();
    let prepared = prepare_scenario(scenario, ts, config)?;
    let mut run = evaluate_scenario(&prepared, config, with_mape)?;
    run.report.runtime_seconds = started.elapsed().as_secs_f64();
    Ok(run)
}
