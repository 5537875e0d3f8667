//! Decompose, fit one engine per component on mRMR-selected lags, and forecast
//! one step ahead as the sum of the component forecasts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emd::Method;
use crate::ensemble::{decompose, EnsembleConfig};
use crate::features::{
    build_lag_matrix, default_lag_pool, lag_vector, mrmr_select, FeatureMatrix, MrmrSelection,
};
use crate::numeric::{derive_seed, mean, std_dev};
use crate::predict::{grid_search_cv, EngineKind, EngineParams, GridSearchResult, TrainedEngine};
use crate::{Error, Result};

/// Rows needed beyond the largest lag to train an engine.
pub const MIN_TRAINING_ROWS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecompositionMethod {
    None,
    Emd,
    Eemd,
    Ceemd,
}

impl DecompositionMethod {
    pub fn as_method(self) -> Option<Method> {
        match self {
            DecompositionMethod::None => None,
            DecompositionMethod::Emd => Some(Method::Emd),
            DecompositionMethod::Eemd => Some(Method::Eemd),
            DecompositionMethod::Ceemd => Some(Method::Ceemd),
        }
    }
}

impl std::str::FromStr for DecompositionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "emd" => Ok(Self::Emd),
            "eemd" => Ok(Self::Eemd),
            "ceemd" => Ok(Self::Ceemd),
            other => Err(Error::invalid(
                "method",
                format!("unknown method {other:?} (none, emd, eemd, ceemd)"),
            )),
        }
    }
}

/// How a fitted model reacts to a newly re-decomposed history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// Feed the refreshed component histories to the unchanged engines.
    #[default]
    Refresh,
    /// Refit every engine (same lags and hyperparameters) on the new components.
    Retrain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub method: DecompositionMethod,
    pub ensemble: EnsembleConfig,
    pub engine: EngineKind,
    pub lag_pool: Vec<usize>,
    pub mrmr_k: usize,
    pub mi_bins: usize,
    pub elm_hidden: Vec<usize>,
    pub svr_c: Vec<f64>,
    pub svr_gamma: Vec<f64>,
    /// ε-tube width as a fraction of each component's target std.
    pub svr_epsilon_fraction: f64,
    pub folds: usize,
    /// Fit engines on at most this many of the most recent lag-matrix rows.
    pub max_train_rows: Option<usize>,
    pub seed: u64,
    pub update_mode: UpdateMode,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            method: DecompositionMethod::Ceemd,
            ensemble: EnsembleConfig::default(),
            engine: EngineKind::Elm,
            lag_pool: default_lag_pool(),
            mrmr_k: 8,
            mi_bins: 16,
            elm_hidden: vec![10, 25, 50, 100, 200],
            svr_c: vec![0.1, 1.0, 10.0, 100.0],
            svr_gamma: vec![0.01, 0.1, 1.0, 10.0],
            svr_epsilon_fraction: 0.01,
            folds: 5,
            max_train_rows: None,
            seed: 0,
            update_mode: UpdateMode::Refresh,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lag_pool.is_empty() || self.lag_pool.contains(&0) {
            return Err(Error::invalid("lag_pool", "needs at least one positive lag"));
        }
        if self.mrmr_k == 0 {
            return Err(Error::invalid("mrmr_k", "must be >= 1"));
        }
        if self.mi_bins < 2 {
            return Err(Error::invalid("mi_bins", "must be >= 2"));
        }
        if self.folds < 2 {
            return Err(Error::invalid("folds", "must be >= 2"));
        }
        if let Some(rows) = self.max_train_rows {
            if rows < MIN_TRAINING_ROWS {
                return Err(Error::invalid(
                    "max_train_rows",
                    format!("{rows} is below the minimum of {MIN_TRAINING_ROWS}"),
                ));
            }
        }
        match self.engine {
            EngineKind::Elm if self.elm_hidden.is_empty() || self.elm_hidden.contains(&0) => {
                return Err(Error::invalid("elm_hidden", "needs positive hidden counts"));
            }
            EngineKind::Svr if self.svr_c.is_empty() || self.svr_gamma.is_empty() => {
                return Err(Error::invalid("svr grid", "C and gamma grids must be non-empty"));
            }
            _ => {}
        }
        if let Some(m) = self.method.as_method() {
            if m != Method::Emd {
                self.ensemble.validate(m)?;
            } else {
                self.ensemble.sift.validate()?;
            }
        }
        Ok(())
    }

    pub fn max_lag(&self) -> usize {
        self.lag_pool.iter().copied().max().unwrap_or(0)
    }

    /// Grid candidates for a component whose targets have the given std.
    pub fn grid(&self, target_std: f64) -> Vec<EngineParams> {
        match self.engine {
            EngineKind::Elm => self
                .elm_hidden
                .iter()
                .map(|&hidden| EngineParams::Elm { hidden })
                .collect(),
            EngineKind::Svr => {
                let epsilon = self.svr_epsilon_fraction * target_std;
                self.svr_c
                    .iter()
                    .flat_map(|&c| {
                        self.svr_gamma
                            .iter()
                            .map(move |&gamma| EngineParams::Svr { c, gamma, epsilon })
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentModel {
    pub label: String,
    /// Lags fed to the engine, in mRMR pick order.
    pub lags: Vec<usize>,
    pub selection: Option<MrmrSelection>,
    pub search: Option<GridSearchResult>,
    pub params: Option<EngineParams>,
    pub engine: TrainedEngine,
    /// The engine sees `(value - offset) / scale`.
    pub offset: f64,
    pub scale: f64,
}

impl ComponentModel {
    fn standardise(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| (x - self.offset) / self.scale).collect()
    }

    /// One-step forecast from the component's own history.
    pub fn forecast(&self, history: &[f64]) -> Result<f64> {
        let x = lag_vector(history, &self.lags)?;
        Ok(self.offset + self.scale * self.engine.predict(&self.standardise(&x))?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    pub components: Vec<ComponentModel>,
    pub method: DecompositionMethod,
    /// Number of IMFs (components minus the residual); 0 without decomposition.
    pub imf_count: usize,
    pub training_len: usize,
    pub config: ForecastConfig,
}

impl ForecastModel {
    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn max_lag(&self) -> usize {
        self.components
            .iter()
            .flat_map(|c| c.lags.iter().copied())
            .max()
            .unwrap_or(0)
    }
}

fn component_labels(count: usize, decomposed: bool) -> Vec<String> {
    if !decomposed {
        return vec!["series".to_string()];
    }
    (0..count)
        .map(|i| {
            if i + 1 == count {
                "residual".to_string()
            } else {
                format!("imf{}", i + 1)
            }
        })
        .collect()
}

/// Splits `x` into forecasting components: the IMFs plus residual, or `x`
/// itself when no decomposition is configured.
pub fn components_of(x: &[f64], config: &ForecastConfig) -> Result<Vec<Vec<f64>>> {
    match config.method.as_method() {
        None => Ok(vec![x.to_vec()]),
        Some(m) => Ok(decompose(x, m, &config.ensemble)?.into_components()),
    }
}

pub fn fit_forecaster(train: &[f64], config: &ForecastConfig) -> Result<ForecastModel> {
    config.validate()?;
    let required = config.max_lag() + MIN_TRAINING_ROWS;
    if train.len() < required {
        return Err(Error::TooShort {
            required,
            actual: train.len(),
        });
    }
    let components = components_of(train, config)?;
    fit_components(&components, config)
}

/// Fits one engine per supplied component series.
pub fn fit_components(components: &[Vec<f64>], config: &ForecastConfig) -> Result<ForecastModel> {
    config.validate()?;
    let n = components.first().map_or(0, Vec::len);
    if components.iter().any(|c| c.len() != n) {
        return Err(Error::invalid("components", "component lengths differ"));
    }
    let required = config.max_lag() + MIN_TRAINING_ROWS;
    if n < required {
        return Err(Error::TooShort {
            required,
            actual: n,
        });
    }
    let decomposed = config.method != DecompositionMethod::None;
    let labels = component_labels(components.len(), decomposed);
    let fitted: Vec<ComponentModel> = components
        .par_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (c, label))| fit_component(c, label, config, derive_seed(config.seed, i as u64)))
        .collect::<Result<_>>()?;
    Ok(ForecastModel {
        imf_count: if decomposed { components.len() - 1 } else { 0 },
        components: fitted,
        method: config.method,
        training_len: n,
        config: config.clone(),
    })
}

fn constant_component(label: String, value: f64, lag: usize) -> ComponentModel {
    ComponentModel {
        label,
        lags: vec![lag],
        selection: None,
        search: None,
        params: None,
        engine: TrainedEngine::Constant { value },
        offset: 0.0,
        scale: 1.0,
    }
}

fn fit_component(
    series: &[f64],
    label: String,
    config: &ForecastConfig,
    seed: u64,
) -> Result<ComponentModel> {
    let min_lag = config.lag_pool.iter().copied().min().unwrap_or(1);
    if series.iter().all(|&v| v == series[0]) {
        return Ok(constant_component(label, series[0], min_lag));
    }
    let offset = mean(series);
    let scale = std_dev(series);
    let z: Vec<f64> = series.iter().map(|v| (v - offset) / scale).collect();
    let fm = recent_rows(build_lag_matrix(&z, &config.lag_pool, label.clone())?, config.max_train_rows);
    let k = config.mrmr_k.min(fm.width());
    let selection = mrmr_select(&fm, k, config.mi_bins)?;
    let fm = fm.select_lags(&selection.lags)?;
    let grid = config.grid(std_dev(&fm.targets));
    let search = grid_search_cv(&fm, &grid, config.folds, seed)?;

    // Best candidate first; fall back down the ranking if the full fit fails.
    let mut ranked: Vec<(usize, f64)> = search
        .cv_scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|s| (i, s)))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut last_err = None;
    for (i, _) in ranked {
        match TrainedEngine::train(&fm, &grid[i], seed) {
            Ok(engine) => {
                return Ok(ComponentModel {
                    label,
                    lags: selection.lags.clone(),
                    params: Some(grid[i]),
                    selection: Some(selection),
                    search: Some(search),
                    engine,
                    offset,
                    scale,
                })
            }
            Err(Error::Degenerate(_)) => {
                let tail = &series[series.len() - fm.len()..];
                return Ok(constant_component(label, mean(tail), min_lag));
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Degenerate("no trainable grid candidate".to_string())))
}

fn recent_rows(fm: FeatureMatrix, max_rows: Option<usize>) -> FeatureMatrix {
    match max_rows {
        Some(r) if r < fm.len() => fm.subset(fm.len() - r..fm.len()),
        _ => fm,
    }
}

/// Retrains every engine with its stored lags and hyperparameters on new
/// component series.
pub fn refit_components(model: &ForecastModel, components: &[Vec<f64>]) -> Result<ForecastModel> {
    if components.len() != model.components.len() {
        return Err(Error::LengthMismatch {
            expected: model.components.len(),
            actual: components.len(),
        });
    }
    let refitted: Vec<ComponentModel> = model
        .components
        .par_iter()
        .zip(components.par_iter())
        .enumerate()
        .map(|(i, (cm, series))| {
            let seed = derive_seed(model.config.seed, i as u64);
            let Some(params) = cm.params else {
                return Ok(cm.clone());
            };
            if series.iter().all(|&v| v == series[0]) {
                return Ok(constant_component(cm.label.clone(), series[0], cm.lags[0]));
            }
            let fm = recent_rows(
                build_lag_matrix(&cm.standardise(series), &cm.lags, cm.label.clone())?,
                model.config.max_train_rows,
            )
            .select_lags(&cm.lags)?;
            let params = match params {
                EngineParams::Svr { c, gamma, .. } => EngineParams::Svr {
                    c,
                    gamma,
                    epsilon: model.config.svr_epsilon_fraction * std_dev(&fm.targets),
                },
                p => p,
            };
            let engine = match TrainedEngine::train(&fm, &params, seed) {
                Ok(e) => e,
                Err(Error::Degenerate(_)) => cm.engine.clone(),
                Err(e) => return Err(e),
            };
            Ok(ComponentModel {
                engine,
                params: Some(params),
                ..cm.clone()
            })
        })
        .collect::<Result<_>>()?;
    Ok(ForecastModel {
        components: refitted,
        training_len: components.first().map_or(0, Vec::len),
        ..model.clone()
    })
}

/// One-step-ahead forecast of each component from its history.
pub fn forecast_components<H: AsRef<[f64]>>(model: &ForecastModel, histories: &[H]) -> Result<Vec<f64>> {
    if histories.len() != model.components.len() {
        return Err(Error::LengthMismatch {
            expected: model.components.len(),
            actual: histories.len(),
        });
    }
    model
        .components
        .iter()
        .zip(histories)
        .map(|(cm, h)| cm.forecast(h.as_ref()))
        .collect()
}

/// Sum of the component forecasts, accumulated in component order.
pub fn forecast_one<H: AsRef<[f64]>>(model: &ForecastModel, histories: &[H]) -> Result<f64> {
    Ok(forecast_components(model, histories)?.iter().sum())
}

/// Repeated one-step forecasts. After every step but the last, `update`
/// receives the step index, the forecast just made, and the histories to
/// refresh with the realised value.
pub fn forecast_series<F>(
    model: &ForecastModel,
    mut histories: Vec<Vec<f64>>,
    horizon_steps: usize,
    mut update: F,
) -> Result<Vec<f64>>
where
    F: FnMut(usize, f64, &mut Vec<Vec<f64>>) -> Result<()>,
{
    if horizon_steps == 0 {
        return Err(Error::invalid("horizon_steps", "must be >= 1"));
    }
    let mut out = Vec::with_capacity(horizon_steps);
    for step in 0..horizon_steps {
        let f = forecast_one(model, &histories)?;
        out.push(f);
        if step + 1 < horizon_steps {
            update(step, f, &mut histories)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn quick_config(method: DecompositionMethod, engine: EngineKind) -> ForecastConfig {
        ForecastConfig {
            method,
            engine,
            lag_pool: (1..=12).collect(),
            mrmr_k: 4,
            elm_hidden: vec![10, 30],
            svr_c: vec![1.0, 10.0],
            svr_gamma: vec![0.1, 1.0],
            ensemble: EnsembleConfig {
                num_ensembles: 4,
                ..EnsembleConfig::default()
            },
            ..ForecastConfig::default()
        }
    }

    #[test]
    fn constant_series_without_decomposition() {
        let x = vec![7.5; 120];
        for engine in [EngineKind::Elm, EngineKind::Svr] {
            let m = fit_forecaster(&x, &quick_config(DecompositionMethod::None, engine)).unwrap();
            assert_eq!(m.component_count(), 1);
            assert_eq!(forecast_one(&m, std::slice::from_ref(&x)).unwrap(), 7.5);
        }
    }

    #[test]
    fn too_short_training_series() {
        let x = vec![1.0; 40];
        assert!(matches!(
            fit_forecaster(&x, &quick_config(DecompositionMethod::None, EngineKind::Elm)),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn emd_on_a_daily_sinusoid_fits_the_tail() {
        let amp = 3.0;
        let x: Vec<f64> = (0..480).map(|n| amp * (TAU * n as f64 / 24.0).sin()).collect();
        let cfg = quick_config(DecompositionMethod::Emd, EngineKind::Elm);
        let m = fit_forecaster(&x, &cfg).unwrap();
        let comps = components_of(&x, &cfg).unwrap();
        assert_eq!(m.component_count(), comps.len());
        assert_eq!(m.imf_count + 1, m.component_count());
        let mut sse = 0.0;
        let tail = 400..480;
        for t in tail.clone() {
            let h: Vec<&[f64]> = comps.iter().map(|c| &c[..t]).collect();
            let e = forecast_one(&m, &h).unwrap() - x[t];
            sse += e * e;
        }
        let rmse = (sse / tail.len() as f64).sqrt();
        assert!(rmse <= 0.02 * amp, "{rmse}");
    }

    #[test]
    fn forecast_is_sum_of_components() {
        let x: Vec<f64> = (0..400)
            .map(|n| (TAU * n as f64 / 24.0).sin() + 0.4 * (TAU * n as f64 / 7.0).cos())
            .collect();
        let cfg = quick_config(DecompositionMethod::Emd, EngineKind::Elm);
        let m = fit_forecaster(&x, &cfg).unwrap();
        let comps = components_of(&x, &cfg).unwrap();
        let parts = forecast_components(&m, &comps).unwrap();
        let mut manual = 0.0;
        for (cm, c) in m.components.iter().zip(&comps) {
            manual += cm.forecast(c).unwrap();
        }
        assert_eq!(parts.iter().sum::<f64>(), manual);
        assert_eq!(forecast_one(&m, &comps).unwrap(), manual);
    }

    #[test]
    fn two_tone_held_out_step() {
        let x: Vec<f64> = (0..601)
            .map(|n| (TAU * n as f64 / 24.0).sin() + 0.5 * (TAU * n as f64 / 9.0).sin())
            .collect();
        let cfg = quick_config(DecompositionMethod::Emd, EngineKind::Svr);
        let full = components_of(&x, &cfg).unwrap();
        let train: Vec<Vec<f64>> = full.iter().map(|c| c[..500].to_vec()).collect();
        let m = fit_components(&train, &cfg).unwrap();
        let range = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - x.iter().cloned().fold(f64::INFINITY, f64::min);
        let h: Vec<&[f64]> = full.iter().map(|c| &c[..550]).collect();
        let f = forecast_one(&m, &h).unwrap();
        assert!((f - x[550]).abs() <= 0.05 * range, "{f} vs {}", x[550]);
    }

    #[test]
    fn forecast_series_steps_and_replays() {
        let x = vec![2.0; 100];
        let m = fit_forecaster(&x, &quick_config(DecompositionMethod::None, EngineKind::Elm)).unwrap();
        let run = || {
            forecast_series(&m, vec![x.clone()], 3, |_, _, h| {
                h[0].push(2.0);
                Ok(())
            })
            .unwrap()
        };
        assert_eq!(run(), vec![2.0; 3]);
        assert_eq!(run(), run());
        let one = forecast_series(&m, vec![x.clone()], 1, |_, _, _| panic!("no update")).unwrap();
        assert_eq!(one, vec![forecast_one(&m, std::slice::from_ref(&x)).unwrap()]);
        let failing = forecast_series(&m, vec![x.clone()], 2, |_, _, _| Err(Error::EmptySeries));
        assert!(failing.is_err());
    }

    #[test]
    fn insufficient_history_is_reported() {
        let x: Vec<f64> = (0..200).map(|n| (n as f64 * 0.3).sin()).collect();
        let m = fit_forecaster(&x, &quick_config(DecompositionMethod::None, EngineKind::Elm)).unwrap();
        assert!(forecast_one(&m, &[x[..2].to_vec()]).is_err());
        assert!(forecast_one(&m, &[x.clone(), x.clone()]).is_err());
    }

    #[test]
    fn refit_keeps_lags_and_params() {
        let x: Vec<f64> = (0..300).map(|n| (n as f64 * 0.3).sin() + 0.01 * n as f64).collect();
        let cfg = quick_config(DecompositionMethod::None, EngineKind::Elm);
        let m = fit_forecaster(&x[..250], &cfg).unwrap();
        let r = refit_components(&m, std::slice::from_ref(&x)).unwrap();
        assert_eq!(r.components[0].lags, m.components[0].lags);
        assert_eq!(r.components[0].params, m.components[0].params);
        assert_eq!(r.training_len, 300);
    }

    #[test]
    fn training_rows_can_be_capped() {
        let x: Vec<f64> = (0..400).map(|n| (n as f64 * 0.3).sin() + 0.01 * n as f64).collect();
        let mut cfg = quick_config(DecompositionMethod::None, EngineKind::Elm);
        cfg.max_train_rows = Some(100);
        let m = fit_forecaster(&x, &cfg).unwrap();
        assert!(forecast_one(&m, std::slice::from_ref(&x)).unwrap().is_finite());
        cfg.max_train_rows = Some(10);
        assert!(fit_forecaster(&x, &cfg).is_err());
    }
}
