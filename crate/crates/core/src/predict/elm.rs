use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Scaling;
use crate::features::FeatureMatrix;
use crate::{Error, Result};

/// Relative singular-value cutoff for the minimum-norm solve.
const SVD_CUTOFF: f64 = 1e-10;

/// Single-hidden-layer network with random sigmoid features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmModel {
    /// Row-major `hidden_count x features`.
    pub input_weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub hidden_count: usize,
    pub features: usize,
    pub seed: u64,
    pub feature_scaling: Scaling,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl ElmModel {
    fn hidden_layer(&self, scaled: &[f64], out: &mut [f64]) {
        for (j, h) in out.iter_mut().enumerate() {
            let w = &self.input_weights[j * self.features..(j + 1) * self.features];
            let z: f64 = w.iter().zip(scaled).map(|(a, b)| a * b).sum::<f64>() + self.biases[j];
            *h = sigmoid(z);
        }
    }
}

pub fn elm_train(fm: &FeatureMatrix, hidden_count: usize, seed: u64) -> Result<ElmModel> {
    if hidden_count == 0 {
        return Err(Error::invalid("hidden_count", "must be >= 1"));
    }
    if fm.is_empty() {
        return Err(Error::TooShort {
            required: 1,
            actual: 0,
        });
    }
    if fm.rows.iter().all(|r| r == &fm.rows[0]) {
        return Err(Error::Degenerate(
            "all features are constant; scaling undefined".to_string(),
        ));
    }
    let features = fm.width();
    let scaling = Scaling::fit(&fm.rows)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input_weights: Vec<f64> = (0..hidden_count * features)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let biases: Vec<f64> = (0..hidden_count).map(|_| rng.random_range(-1.0..=1.0)).collect();

    let mut model = ElmModel {
        input_weights,
        biases,
        output_weights: vec![0.0; hidden_count],
        hidden_count,
        features,
        seed,
        feature_scaling: scaling,
    };

    let rows = fm.len();
    let mut h = DMatrix::<f64>::zeros(rows, hidden_count);
    let mut buf = vec![0.0; hidden_count];
    for (i, row) in fm.rows.iter().enumerate() {
        let scaled = model.feature_scaling.apply(row)?;
        model.hidden_layer(&scaled, &mut buf);
        for (j, v) in buf.iter().enumerate() {
            h[(i, j)] = *v;
        }
    }
    let y = DVector::from_column_slice(&fm.targets);
    model.output_weights = min_norm_least_squares(h, &y).as_slice().to_vec();
    if model.output_weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite ELM output weights".to_string()));
    }
    Ok(model)
}

/// `pinv(a) * y` with singular values below `SVD_CUTOFF * sigma_max` dropped.
fn min_norm_least_squares(a: DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let cols = a.ncols();
    let svd = a.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = SVD_CUTOFF * sigma_max;
    let uty = u.transpose() * y;
    let mut scaled = DVector::<f64>::zeros(svd.singular_values.len());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            scaled[k] = uty[k] / s;
        }
    }
    let beta = v_t.transpose() * scaled;
    debug_assert_eq!(beta.len(), cols);
    beta
}

pub fn elm_predict(model: &ElmModel, x: &[f64]) -> Result<f64> {
    let scaled = model.feature_scaling.apply(x)?;
    let mut h = vec![0.0; model.hidden_count];
    model.hidden_layer(&scaled, &mut h);
    Ok(h.iter().zip(&model.output_weights).map(|(a, b)| a * b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::{rmse_of, TrainedEngine};

    fn linear_data() -> FeatureMatrix {
        let xs: Vec<f64> = (0..200).map(|i| -1.0 + 2.0 * i as f64 / 199.0).collect();
        FeatureMatrix {
            rows: xs.iter().map(|&x| vec![x]).collect(),
            targets: xs.iter().map(|x| 2.0 * x).collect(),
            lag_labels: vec![1],
            source: "y=2x".into(),
        }
    }

    fn std_of(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
    }

    #[test]
    fn zero_targets_give_zero_weights() {
        let mut fm = linear_data();
        fm.targets.iter_mut().for_each(|t| *t = 0.0);
        let m = elm_train(&fm, 20, 1).unwrap();
        assert!(m.output_weights.iter().all(|&b| b == 0.0));
        assert_eq!(elm_predict(&m, &[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn fits_a_line() {
        let fm = linear_data();
        let m = elm_train(&fm, 50, 7).unwrap();
        let rmse = rmse_of(&TrainedEngine::Elm(m.clone()), &fm).unwrap();
        assert!(rmse <= 0.01 * std_of(&fm.targets), "{rmse}");
        for (row, y) in fm.rows.iter().zip(&fm.targets).step_by(17) {
            let p = elm_predict(&m, row).unwrap();
            assert!((p - y).abs() <= 0.05 * y.abs().max(0.1), "{p} vs {y}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let fm = linear_data();
        assert_eq!(elm_train(&fm, 30, 3).unwrap(), elm_train(&fm, 30, 3).unwrap());
        assert_ne!(elm_train(&fm, 30, 3).unwrap(), elm_train(&fm, 30, 4).unwrap());
    }

    #[test]
    fn zero_output_weights_predict_zero() {
        let fm = linear_data();
        let mut m = elm_train(&fm, 10, 1).unwrap();
        m.output_weights.iter_mut().for_each(|b| *b = 0.0);
        assert_eq!(elm_predict(&m, &[0.9]).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let fm = linear_data();
        assert!(elm_train(&fm, 0, 1).is_err());
        let m = elm_train(&fm, 5, 1).unwrap();
        assert!(elm_predict(&m, &[1.0, 2.0]).is_err());
        let constant = FeatureMatrix {
            rows: vec![vec![1.0, 2.0]; 10],
            targets: (0..10).map(f64::from).collect(),
            lag_labels: vec![1, 2],
            source: "c".into(),
        };
        assert!(matches!(elm_train(&constant, 5, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn output_weights_minimise_training_sse() {
        let fm = linear_data();
        let m = elm_train(&fm, 25, 9).unwrap();
        let sse = |model: &ElmModel| -> f64 {
            fm.rows
                .iter()
                .zip(&fm.targets)
                .map(|(r, y)| (elm_predict(model, r).unwrap() - y).powi(2))
                .sum()
        };
        let base = sse(&m);
        let norm = m.output_weights.iter().map(|b| b * b).sum::<f64>().sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let delta: Vec<f64> = (0..m.hidden_count).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dn = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            let mut p = m.clone();
            for (b, d) in p.output_weights.iter_mut().zip(&delta) {
                *b += d / dn * 0.01 * norm;
            }
            assert!(base <= sse(&p) * (1.0 + 1e-12));
        }
    }
}
