use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_scenario, prepare_scenario, BenchConfig, Scenario, ScenarioReport};
use crate::predict::EngineKind;
use crate::series::Preset;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSettings {
    /// Length of each generated preset series.
    pub length: usize,
    /// Template for every cell; engine and seeds are set per cell.
    pub bench: BenchConfig,
}

/// Sized to run the full two-preset, two-engine, five-seed suite on a single
/// core in minutes: 20 ensemble members, engines fit on the latest 600 rows,
/// and a 2 x 3 SVR grid.
impl Default for SuiteSettings {
    fn default() -> Self {
        let mut bench = BenchConfig::default();
        bench.forecast.ensemble.num_ensembles = 20;
        bench.forecast.max_train_rows = Some(600);
        bench.forecast.svr_c = vec![1.0, 10.0];
        bench.forecast.svr_gamma = vec![0.01, 0.1, 1.0];
        Self {
            length: 2000,
            bench,
        }
    }
}

/// One preset x engine x scenario x seed cell; exactly one of `report` and
/// `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCell {
    pub preset: Preset,
    pub engine: EngineKind,
    pub scenario: Scenario,
    pub seed: u64,
    pub report: Option<ScenarioReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellOutcome {
    Ok,
    Failed,
}

impl SuiteCell {
    pub fn outcome(&self) -> CellOutcome {
        if self.report.is_some() {
            CellOutcome::Ok
        } else {
            CellOutcome::Failed
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub settings: SuiteSettings,
    pub cells: Vec<SuiteCell>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

impl SuiteReport {
    fn reports(
        &self,
        preset: Preset,
        engine: EngineKind,
        scenario: Scenario,
    ) -> impl Iterator<Item = &ScenarioReport> {
        self.cells
            .iter()
            .filter(move |c| c.preset == preset && c.engine == engine && c.scenario == scenario)
            .filter_map(|c| c.report.as_ref())
    }

    /// Median test RMSE over the successful seeds of one cell group.
    pub fn median_rmse(&self, preset: Preset, engine: EngineKind, scenario: Scenario) -> Option<f64> {
        median(self.reports(preset, engine, scenario).map(|r| r.rmse).collect())
    }

    pub fn median_mape(&self, preset: Preset, engine: EngineKind, scenario: Scenario) -> Option<f64> {
        median(self.reports(preset, engine, scenario).filter_map(|r| r.mape).collect())
    }

    pub fn total_runtime(&self, preset: Preset, engine: EngineKind, scenario: Scenario) -> f64 {
        self.reports(preset, engine, scenario).map(|r| r.runtime_seconds).sum()
    }

    pub fn failures(&self) -> impl Iterator<Item = &SuiteCell> {
        self.cells.iter().filter(|c| c.outcome() == CellOutcome::Failed)
    }
}

/// Cells for one preset and seed. Decompositions are engine independent and
/// are computed once per scenario.
fn run_group(preset: Preset, seed: u64, engines: &[EngineKind], settings: &SuiteSettings) -> Vec<SuiteCell> {
    let cell = |engine, scenario, result: std::result::Result<ScenarioReport, String>| SuiteCell {
        preset,
        engine,
        scenario,
        seed,
        error: result.as_ref().err().cloned(),
        report: result.ok(),
    };
    let series = preset.generate(settings.length, seed).map_err(|e| e.to_string());
    let mut cells = Vec::new();
    for scenario in Scenario::ALL {
        let shared = settings.bench.for_cell(engines[0], seed);
        let started = Instant::now();
        let prepared = series
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|ts| prepare_scenario(scenario, ts, &shared).map_err(|e| e.to_string()));
        let prep_seconds = started.elapsed().as_secs_f64();
        for &engine in engines {
            let result = prepared.as_ref().map_err(Clone::clone).and_then(|p| {
                let cfg = settings.bench.for_cell(engine, seed);
                let mut run =
                    evaluate_scenario(p, &cfg, preset.reports_mape()).map_err(|e| e.to_string())?;
                run.report.runtime_seconds += prep_seconds;
                Ok(run.report)
            });
            cells.push(cell(engine, scenario, result));
        }
    }
    cells
}

/// Full cross product of presets, engines, scenarios and seeds.
///
/// A failing cell is recorded with its error; the rest of the suite runs on.
/// Cells are ordered by preset, engine, scenario, then seed, following the
/// order of the input lists.
pub fn run_benchmark_suite(
    presets: &[Preset],
    engines: &[EngineKind],
    seeds: &[u64],
    settings: &SuiteSettings,
) -> Result<SuiteReport> {
    if presets.is_empty() || engines.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("suite", "presets, engines and seeds must be non-empty"));
    }
    settings.bench.validate()?;
    let groups: Vec<(usize, usize)> = (0..presets.len())
        .flat_map(|p| (0..seeds.len()).map(move |s| (p, s)))
        .collect();
    let mut indexed: Vec<((usize, usize, usize, usize), SuiteCell)> = groups
        .par_iter()
        .map(|&(p, s)| {
            run_group(presets[p], seeds[s], engines, settings)
                .into_iter()
                .map(|c| {
                    let e = engines.iter().position(|&e| e == c.engine).unwrap_or(0);
                    ((p, e, c.scenario as usize, s), c)
                })
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();
    indexed.sort_by_key(|(k, _)| *k);
    Ok(SuiteReport {
        settings: settings.clone(),
        cells: indexed.into_iter().map(|(_, c)| c).collect(),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

/// Plain-text table per preset: engine, scenario, median MAPE (load only),
/// median RMSE and summed runtime.
pub fn render_table(report: &SuiteReport) -> String {
    let mut presets: Vec<Preset> = Vec::new();
    let mut engines: Vec<EngineKind> = Vec::new();
    let mut seeds: Vec<u64> = Vec::new();
    for c in &report.cells {
        if !presets.contains(&c.preset) {
            presets.push(c.preset);
        }
        if !engines.contains(&c.engine) {
            engines.push(c.engine);
        }
        if !seeds.contains(&c.seed) {
            seeds.push(c.seed);
        }
    }
    let mut out = String::new();
    for preset in presets {
        let with_mape = preset.reports_mape();
        let _ = writeln!(out, "{} (median over {} seeds)", preset.name(), seeds.len());
        if with_mape {
            let _ = writeln!(
                out,
                "{:<18} {:<9} {:>10} {:>12} {:>12}",
                "Prediction Engine", "Scenario", "MAPE", "RMSE", "Runtime (s)"
            );
        } else {
            let _ = writeln!(
                out,
                "{:<18} {:<9} {:>12} {:>12}",
                "Prediction Engine", "Scenario", "RMSE", "Runtime (s)"
            );
        }
        for &engine in &engines {
            for scenario in Scenario::ALL {
                let rmse = fmt_opt(report.median_rmse(preset, engine, scenario));
                let runtime = format!("{:.2}", report.total_runtime(preset, engine, scenario));
                if with_mape {
                    let mape = fmt_opt(report.median_mape(preset, engine, scenario));
                    let _ = writeln!(
                        out,
                        "{:<18} {:<9} {:>10} {:>12} {:>12}",
                        engine.name(),
                        scenario.name(),
                        mape,
                        rmse,
                        runtime
                    );
                } else {
                    let _ = writeln!(
                        out,
                        "{:<18} {:<9} {:>12} {:>12}",
                        engine.name(),
                        scenario.name(),
                        rmse,
                        runtime
                    );
                }
            }
        }
        out.push('\n');
    }
    for c in report.failures() {
        let _ = writeln!(
            out,
            "failed: {} {} scenario {} seed {}: {}",
            c.preset.name(),
            c.engine.name(),
            c.scenario,
            c.seed,
            c.error.as_deref().unwrap_or("")
        );
    }
    out
}

/// One line per report, in the order given.
pub fn render_reports(reports: &[ScenarioReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:<18} {:<9} {:>10} {:>12} {:>12}",
        "Series", "Prediction Engine", "Scenario", "MAPE", "RMSE", "Runtime (s)"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<12} {:<18} {:<9} {:>10} {:>12} {:>12.2}",
            r.series,
            r.engine.name(),
            r.scenario.name(),
            fmt_opt(r.mape),
            format!("{:.4}", r.rmse),
            r.runtime_seconds
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{DecompositionMethod, ForecastConfig};

    fn tiny() -> SuiteSettings {
        SuiteSettings {
            length: 400,
            bench: BenchConfig {
                forecast: ForecastConfig {
                    method: DecompositionMethod::Emd,
                    lag_pool: (1..=12).collect(),
                    mrmr_k: 3,
                    elm_hidden: vec![10],
                    ..ForecastConfig::default()
                },
                max_test_steps: Some(5),
                ..BenchConfig::default()
            },
        }
    }

    #[test]
    fn one_of_each_gives_three_reports() {
        let r = run_benchmark_suite(&[Preset::Load], &[EngineKind::Elm], &[1], &tiny()).unwrap();
        assert_eq!(r.cells.len(), 3);
        let scenarios: Vec<Scenario> = r.cells.iter().map(|c| c.scenario).collect();
        assert_eq!(scenarios, Scenario::ALL.to_vec());
        assert!(r.failures().next().is_none());
    }

    #[test]
    fn table_columns_follow_the_preset() {
        let r = run_benchmark_suite(&[Preset::Load, Preset::Wind], &[EngineKind::Elm], &[2], &tiny())
            .unwrap();
        let table = render_table(&r);
        let (load, wind) = table.split_at(table.find("wind (").unwrap());
        assert!(load.contains("MAPE") && load.contains("RMSE"));
        assert!(!wind.contains("MAPE") && wind.contains("RMSE"));
        for c in &r.cells {
            let rep = c.report.as_ref().unwrap();
            assert_eq!(rep.mape.is_some(), c.preset == Preset::Load);
        }
    }

    #[test]
    fn repeated_runs_serialise_identically() {
        let run = || {
            let r = run_benchmark_suite(&[Preset::Wind], &[EngineKind::Elm], &[3, 4], &tiny()).unwrap();
            serde_json::to_string(&r).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn failing_cells_are_recorded() {
        let mut s = tiny();
        s.length = 60;
        let r = run_benchmark_suite(&[Preset::Load], &[EngineKind::Elm], &[1], &s).unwrap();
        assert_eq!(r.cells.len(), 3);
        assert_eq!(r.failures().count(), 3);
        assert!(render_table(&r).contains("failed:"));
    }

    #[test]
    fn empty_lists_are_rejected() {
        assert!(run_benchmark_suite(&[], &[EngineKind::Elm], &[1], &tiny()).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }
}
