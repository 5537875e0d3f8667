use serde::{Deserialize, Serialize};

use super::{rmse_of, EngineParams, TrainedEngine};
use crate::features::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_params: EngineParams,
    /// Mean validation RMSE per candidate in grid order; `None` if a
    /// candidate failed to train on some fold.
    pub cv_scores: Vec<Option<f64>>,
    pub folds: usize,
}

impl GridSearchResult {
    pub fn best_score(&self) -> Option<f64> {
        self.cv_scores
            .iter()
            .flatten()
            .cloned()
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
    }
}

/// Row range `[start, end)` of validation fold `k`.
pub fn fold_bounds(rows: usize, folds: usize, k: usize) -> (usize, usize) {
    (k * rows / folds, (k + 1) * rows / folds)
}

/// K-fold cross-validation over contiguous time blocks.
///
/// Ties go to the earliest candidate in grid order.
pub fn grid_search_cv(
    fm: &FeatureMatrix,
    grid: &[EngineParams],
    folds: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "no candidates"));
    }
    if folds < 2 {
        return Err(Error::invalid("folds", "must be >= 2"));
    }
    if fm.len() < folds {
        return Err(Error::invalid(
            "folds",
            format!("{folds} folds but only {} rows", fm.len()),
        ));
    }
    let n = fm.len();
    let splits: Vec<(FeatureMatrix, FeatureMatrix)> = (0..folds)
        .map(|k| {
            let (lo, hi) = fold_bounds(n, folds, k);
            (fm.subset((0..lo).chain(hi..n)), fm.subset(lo..hi))
        })
        .collect();

    let cv_scores: Vec<Option<f64>> = grid
        .iter()
        .map(|params| {
            let mut total = 0.0;
            for (train, valid) in &splits {
                let engine = TrainedEngine::train(train, params, seed).ok()?;
                total += rmse_of(&engine, valid).ok()?;
            }
            Some(total / folds as f64)
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, s) in cv_scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((i, s));
            }
        }
    }
    let (idx, _) = best.ok_or_else(|| {
        Error::Degenerate("every grid candidate failed to train".to_string())
    })?;
    Ok(GridSearchResult {
        best_params: grid[idx],
        cv_scores,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_data() -> FeatureMatrix {
        let xs: Vec<f64> = (0..200).map(|i| -1.0 + 2.0 * i as f64 / 199.0).collect();
        FeatureMatrix {
            rows: xs.iter().map(|&x| vec![x]).collect(),
            targets: xs.iter().map(|x| 2.0 * x).collect(),
            lag_labels: vec![1],
            source: "y=2x".into(),
        }
    }

    #[test]
    fn folds_are_contiguous_and_cover_all_rows() {
        let mut covered = vec![];
        for k in 0..5 {
            let (lo, hi) = fold_bounds(23, 5, k);
            covered.extend(lo..hi);
        }
        assert_eq!(covered, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn single_candidate_is_returned() {
        let fm = linear_data();
        let grid = [EngineParams::Elm { hidden: 10 }];
        let r = grid_search_cv(&fm, &grid, 5, 1).unwrap();
        assert_eq!(r.best_params, grid[0]);
        assert_eq!(r.cv_scores.len(), 1);
        assert!(r.cv_scores[0].unwrap().is_finite());
        assert_eq!(r.folds, 5);
    }

    #[test]
    fn more_hidden_units_win_on_a_line() {
        let fm = linear_data();
        let grid = [EngineParams::Elm { hidden: 1 }, EngineParams::Elm { hidden: 50 }];
        let r = grid_search_cv(&fm, &grid, 5, 1).unwrap();
        assert_eq!(r.best_params, grid[1]);
        assert!(r.cv_scores[1].unwrap() < r.cv_scores[0].unwrap());
    }

    #[test]
    fn ties_pick_the_first_candidate() {
        let fm = linear_data();
        let grid = [EngineParams::Elm { hidden: 8 }, EngineParams::Elm { hidden: 8 }];
        let r = grid_search_cv(&fm, &grid, 4, 2).unwrap();
        assert_eq!(r.cv_scores[0], r.cv_scores[1]);
        assert_eq!(r.best_params, grid[0]);
    }

    #[test]
    fn argument_errors() {
        let fm = linear_data();
        let grid = [EngineParams::Elm { hidden: 8 }];
        assert!(grid_search_cv(&fm, &grid, fm.len() + 1, 1).is_err());
        assert!(grid_search_cv(&fm, &[], 5, 1).is_err());
        assert!(grid_search_cv(&fm, &grid, 1, 1).is_err());
    }
}
