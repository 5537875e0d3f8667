//! ε-SVR with an RBF kernel, solved in the dual by sequential minimal
//! optimisation with second-order working-set selection.
//!
//! The dual is written over `2l` variables `[α; α*]` with labels `+1`/`-1`:
//!
//! ```text
//! min ½ βᵀQβ + pᵀβ   s.t.  Σ yᵢβᵢ = 0,  0 ≤ βᵢ ≤ C
//! Qᵢⱼ = yᵢyⱼ k(xᵢ, xⱼ),   p = [ε − z; ε + z]
//! ```

use serde::{Deserialize, Serialize};

use super::Scaling;
use crate::features::FeatureMatrix;
use crate::{Error, Result};

/// Maximal KKT violation tolerated at convergence.
pub const SMO_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    /// Standardised feature vectors with nonzero dual coefficient.
    pub support_vectors: Vec<Vec<f64>>,
    /// Training-row index of each support vector.
    pub support_indices: Vec<usize>,
    /// `α − α*` per support vector.
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub epsilon_tube: f64,
    pub feature_scaling: Scaling,
}

pub fn rbf_kernel(u: &[f64], v: &[f64], gamma: f64) -> f64 {
    let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

pub fn svr_train(fm: &FeatureMatrix, c: f64, gamma: f64, epsilon_tube: f64) -> Result<SvrModel> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid("C", "must be finite and > 0"));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid("gamma", "must be finite and > 0"));
    }
    if !(epsilon_tube >= 0.0) || !epsilon_tube.is_finite() {
        return Err(Error::invalid("epsilon_tube", "must be finite and >= 0"));
    }
    let l = fm.len();
    if l == 0 {
        return Err(Error::TooShort {
            required: 1,
            actual: 0,
        });
    }
    let scaling = Scaling::fit(&fm.rows)?;
    let xs: Vec<Vec<f64>> = fm
        .rows
        .iter()
        .map(|r| scaling.apply(r))
        .collect::<Result<_>>()?;

    let mut kernel = vec![0.0; l * l];
    for i in 0..l {
        kernel[i * l + i] = 1.0;
        for j in 0..i {
            let k = rbf_kernel(&xs[i], &xs[j], gamma);
            kernel[i * l + j] = k;
            kernel[j * l + i] = k;
        }
    }

    let solution = Smo::new(&kernel, l, &fm.targets, c, epsilon_tube).solve(100 * l)?;

    let mut model = SvrModel {
        support_vectors: Vec::new(),
        support_indices: Vec::new(),
        dual_coefficients: Vec::new(),
        bias: -solution.rho,
        gamma,
        c,
        epsilon_tube,
        feature_scaling: scaling,
    };
    for (i, x) in xs.iter().enumerate() {
        let coef = solution.alpha[i] - solution.alpha[i + l];
        if coef != 0.0 {
            model.support_vectors.push(x.clone());
            model.support_indices.push(i);
            model.dual_coefficients.push(coef);
        }
    }
    Ok(model)
}

pub fn svr_predict(model: &SvrModel, x: &[f64]) -> Result<f64> {
    let scaled = model.feature_scaling.apply(x)?;
    Ok(model
        .support_vectors
        .iter()
        .zip(&model.dual_coefficients)
        .map(|(sv, coef)| coef * rbf_kernel(sv, &scaled, model.gamma))
        .sum::<f64>()
        + model.bias)
}

struct Smo<'a> {
    kernel: &'a [f64],
    l: usize,
    c: f64,
    /// Label of variable `t` in `0..2l`.
    y: Vec<f64>,
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

struct SmoSolution {
    alpha: Vec<f64>,
    rho: f64,
}

impl<'a> Smo<'a> {
    fn new(kernel: &'a [f64], l: usize, targets: &[f64], c: f64, eps: f64) -> Self {
        let mut y = vec![1.0; 2 * l];
        let mut grad = vec![0.0; 2 * l];
        for i in 0..l {
            y[i + l] = -1.0;
            grad[i] = eps - targets[i];
            grad[i + l] = eps + targets[i];
        }
        Self {
            kernel,
            l,
            c,
            y,
            alpha: vec![0.0; 2 * l],
            grad,
        }
    }

    fn q(&self, i: usize, j: usize) -> f64 {
        self.y[i] * self.y[j] * self.kernel[(i % self.l) * self.l + j % self.l]
    }

    fn at_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.c
    }

    fn at_lower(&self, t: usize) -> bool {
        self.alpha[t] <= 0.0
    }

    /// Returns `None` at optimality, otherwise the pair to update and the gap.
    fn select(&self) -> (Option<(usize, usize)>, f64) {
        let n = 2 * self.l;
        let mut gmax = f64::NEG_INFINITY;
        let mut i_best = None;
        for t in 0..n {
            if self.y[t] > 0.0 {
                if !self.at_upper(t) && -self.grad[t] >= gmax {
                    gmax = -self.grad[t];
                    i_best = Some(t);
                }
            } else if !self.at_lower(t) && self.grad[t] >= gmax {
                gmax = self.grad[t];
                i_best = Some(t);
            }
        }
        let Some(i) = i_best else {
            return (None, 0.0);
        };

        let qd_i = self.q(i, i);
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_best = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            let (eligible, grad_diff, score) = if self.y[t] > 0.0 {
                (!self.at_lower(t), gmax + self.grad[t], self.grad[t])
            } else {
                (!self.at_upper(t), gmax - self.grad[t], -self.grad[t])
            };
            if !eligible {
                continue;
            }
            gmax2 = gmax2.max(score);
            if grad_diff > 0.0 {
                let quad = qd_i + self.q(t, t) - 2.0 * self.y[i] * self.y[t] * self.q(i, t);
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    j_best = Some(t);
                }
            }
        }
        let gap = gmax + gmax2;
        match j_best {
            Some(j) if gap >= SMO_TOLERANCE => (Some((i, j)), gap),
            _ => (None, gap),
        }
    }

    fn update(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let q_ij = self.q(i, j);
        let (qd_i, qd_j) = (self.q(i, i), self.q(j, j));
        let (mut ai, mut aj) = (old_i, old_j);
        if self.y[i] != self.y[j] {
            let quad = qd_i + qd_j + 2.0 * q_ij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = qd_i + qd_j - 2.0 * q_ij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        let l = self.l;
        let (ri, rj) = ((i % l) * l, (j % l) * l);
        let (yi, yj) = (self.y[i], self.y[j]);
        for t in 0..2 * l {
            let yt = self.y[t];
            let col = t % l;
            self.grad[t] += yt * (yi * self.kernel[ri + col] * di + yj * self.kernel[rj + col] * dj);
        }
    }

    fn rho(&self) -> f64 {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut free_sum = 0.0;
        let mut free = 0usize;
        for t in 0..2 * self.l {
            let yg = self.y[t] * self.grad[t];
            if self.at_upper(t) {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.at_lower(t) {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                free_sum += yg;
            }
        }
        if free > 0 {
            free_sum / free as f64
        } else {
            (ub + lb) / 2.0
        }
    }

    fn solve(mut self, max_iterations: usize) -> Result<SmoSolution> {
        let mut iterations = 0;
        loop {
            let (pair, gap) = self.select();
            let Some((i, j)) = pair else { break };
            if iterations >= max_iterations {
                return Err(Error::NotConverged { iterations, gap });
            }
            self.update(i, j);
            iterations += 1;
        }
        let rho = self.rho();
        Ok(SmoSolution {
            alpha: self.alpha,
            rho,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_data() -> FeatureMatrix {
        let xs: Vec<f64> = (0..300).map(|i| i as f64 / 299.0).collect();
        FeatureMatrix {
            rows: xs.iter().map(|&x| vec![x]).collect(),
            targets: xs
                .iter()
                .map(|x| (std::f64::consts::TAU * x).sin())
                .collect(),
            lag_labels: vec![1],
            source: "sine".into(),
        }
    }

    /// Largest violation of the ε-insensitive KKT conditions over all
    /// training points, recomputed from the stored model.
    fn max_kkt_violation(model: &SvrModel, fm: &FeatureMatrix) -> f64 {
        let mut coef = vec![0.0; fm.len()];
        for (&i, &a) in model.support_indices.iter().zip(&model.dual_coefficients) {
            coef[i] = a;
        }
        let c = model.c;
        let eps = model.epsilon_tube;
        fm.rows
            .iter()
            .zip(&fm.targets)
            .zip(&coef)
            .map(|((row, y), &a)| {
                let r = y - svr_predict(model, row).unwrap();
                if a == 0.0 {
                    (r.abs() - eps).max(0.0)
                } else if a > 0.0 && a < c {
                    (r - eps).abs()
                } else if a >= c {
                    (eps - r).max(0.0)
                } else if a > -c {
                    (r + eps).abs()
                } else {
                    (r + eps).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_targets_fit_inside_the_tube() {
        let mut fm = sine_data();
        fm.targets.iter_mut().for_each(|t| *t = 3.5);
        let m = svr_train(&fm, 10.0, 1.0, 0.1).unwrap();
        assert!(m.support_vectors.is_empty());
        assert!((m.bias - 3.5).abs() < 1e-12);
        assert!((svr_predict(&m, &[0.42]).unwrap() - 3.5).abs() < 1e-12);
    }

    #[test]
    fn fits_a_sine_and_satisfies_kkt() {
        let fm = sine_data();
        let m = svr_train(&fm, 10.0, 50.0, 0.01).unwrap();
        let rmse = (fm
            .rows
            .iter()
            .zip(&fm.targets)
            .map(|(r, y)| (svr_predict(&m, r).unwrap() - y).powi(2))
            .sum::<f64>()
            / fm.len() as f64)
            .sqrt();
        assert!(rmse <= 0.05, "{rmse}");
        let viol = max_kkt_violation(&m, &fm);
        assert!(viol <= SMO_TOLERANCE, "{viol}");
        let sum: f64 = m.dual_coefficients.iter().sum();
        assert!(sum.abs() <= 1e-6 * m.c);
        assert!(m.dual_coefficients.iter().all(|a| a.abs() <= m.c));
    }

    #[test]
    fn prediction_at_support_vector_is_within_tube() {
        let fm = sine_data();
        let m = svr_train(&fm, 10.0, 50.0, 0.01).unwrap();
        for &i in m.support_indices.iter().step_by(7) {
            let p = svr_predict(&m, &fm.rows[i]).unwrap();
            let err = (p - fm.targets[i]).abs();
            // Bounded SVs may sit outside the tube; free ones lie on its edge.
            let coef = m.dual_coefficients[m.support_indices.iter().position(|&k| k == i).unwrap()];
            if coef.abs() < m.c {
                assert!(err <= m.epsilon_tube + SMO_TOLERANCE, "{err}");
            }
        }
    }

    #[test]
    fn far_query_returns_bias() {
        let fm = sine_data();
        let m = svr_train(&fm, 10.0, 1e4, 0.01).unwrap();
        let p = svr_predict(&m, &[50.0]).unwrap();
        assert!((p - m.bias).abs() < 1e-6);
        let empty = SvrModel {
            support_vectors: vec![],
            support_indices: vec![],
            dual_coefficients: vec![],
            bias: 1.25,
            ..m
        };
        assert_eq!(svr_predict(&empty, &[0.3]).unwrap(), 1.25);
        assert!(svr_predict(&empty, &[0.3, 1.0]).is_err());
    }

    #[test]
    fn parameter_errors() {
        let fm = sine_data();
        assert!(svr_train(&fm, 0.0, 1.0, 0.1).is_err());
        assert!(svr_train(&fm, 1.0, 0.0, 0.1).is_err());
        assert!(svr_train(&fm, 1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let fm = sine_data();
        assert_eq!(
            svr_train(&fm, 1.0, 5.0, 0.05).unwrap(),
            svr_train(&fm, 1.0, 5.0, 0.05).unwrap()
        );
    }
}
