//! Lagged feature matrices and mRMR lag selection.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default candidate lags (hours): the last day plus 2-, 3- and 7-day lags.
pub fn default_lag_pool() -> Vec<usize> {
    let mut lags: Vec<usize> = (1..=24).collect();
    lags.extend([48, 72, 168]);
    lags
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// Lag (in samples) of each column.
    pub lag_labels: Vec<usize>,
    pub source: String,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.lag_labels.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Keeps only the given lag columns, in the order given.
    pub fn select_lags(&self, lags: &[usize]) -> Result<FeatureMatrix> {
        let cols: Vec<usize> = lags
            .iter()
            .map(|l| {
                self.lag_labels
                    .iter()
                    .position(|x| x == l)
                    .ok_or_else(|| Error::invalid("lags", format!("lag {l} not in matrix")))
            })
            .collect::<Result<_>>()?;
        Ok(FeatureMatrix {
            rows: self
                .rows
                .iter()
                .map(|r| cols.iter().map(|&c| r[c]).collect())
                .collect(),
            targets: self.targets.clone(),
            lag_labels: lags.to_vec(),
            source: self.source.clone(),
        })
    }

    /// Rows `[start, end)` as a new matrix.
    pub fn subset(&self, indices: impl Iterator<Item = usize>) -> FeatureMatrix {
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for i in indices {
            rows.push(self.rows[i].clone());
            targets.push(self.targets[i]);
        }
        FeatureMatrix {
            rows,
            targets,
            lag_labels: self.lag_labels.clone(),
            source: self.source.clone(),
        }
    }
}

/// One row per target index `t >= max(lags)`, columns `x[t - lag]` in
/// ascending lag order.
pub fn build_lag_matrix(x: &[f64], lags: &[usize], source: impl Into<String>) -> Result<FeatureMatrix> {
    let mut lags = lags.to_vec();
    lags.sort_unstable();
    lags.dedup();
    let max_lag = *lags
        .last()
        .ok_or_else(|| Error::invalid("lags", "lag set is empty"))?;
    if lags[0] == 0 {
        return Err(Error::invalid("lags", "lags must be positive"));
    }
    if max_lag >= x.len() {
        return Err(Error::invalid(
            "lags",
            format!("lag {max_lag} not below series length {}", x.len()),
        ));
    }
    let rows = (max_lag..x.len())
        .map(|t| lags.iter().map(|&l| x[t - l]).collect())
        .collect();
    Ok(FeatureMatrix {
        rows,
        targets: x[max_lag..].to_vec(),
        lag_labels: lags,
        source: source.into(),
    })
}

/// The feature vector for predicting the sample right after `history`.
pub fn lag_vector(history: &[f64], lags: &[usize]) -> Result<Vec<f64>> {
    let n = history.len();
    lags.iter()
        .map(|&l| {
            if l == 0 || l > n {
                Err(Error::TooShort {
                    required: l,
                    actual: n,
                })
            } else {
                Ok(history[n - l])
            }
        })
        .collect()
}

fn bin_indices(x: &[f64], bins: usize) -> Vec<usize> {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0; x.len()];
    }
    x.iter()
        .map(|&v| (((v - lo) / range * bins as f64) as usize).min(bins - 1))
        .collect()
}

/// Plug-in mutual information (nats) over equal-width bins spanning each
/// variable's observed range.
pub fn mutual_information(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: a.len(),
        });
    }
    if bins < 2 {
        return Err(Error::invalid("bins", "must be >= 2"));
    }
    Ok(mi_from_bins(&bin_indices(a, bins), &bin_indices(b, bins), bins))
}

fn mi_from_bins(a: &[usize], b: &[usize], bins: usize) -> f64 {
    let n = a.len() as f64;
    let mut joint = vec![0usize; bins * bins];
    let mut pa = vec![0usize; bins];
    let mut pb = vec![0usize; bins];
    for (&i, &j) in a.iter().zip(b) {
        joint[i * bins + j] += 1;
        pa[i] += 1;
        pb[j] += 1;
    }
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c == 0 {
                continue;
            }
            let pij = c as f64 / n;
            mi += pij * (c as f64 * n / (pa[i] as f64 * pb[j] as f64)).ln();
        }
    }
    mi.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrmrSelection {
    /// Selected lags in pick order.
    pub lags: Vec<usize>,
    /// Relevance `MI(feature; target)` of each selected lag.
    pub relevance: Vec<f64>,
    /// Greedy score at the moment each lag was picked.
    pub scores: Vec<f64>,
}

/// Greedy mRMR (difference form): maximise `MI(f; y) - mean_{s in S} MI(f; s)`.
///
/// Ties go to the smaller lag.
pub fn mrmr_select(fm: &FeatureMatrix, k: usize, bins: usize) -> Result<MrmrSelection> {
    let width = fm.width();
    if k == 0 || k > width {
        return Err(Error::invalid("k", format!("{k} not in 1..={width}")));
    }
    if bins < 2 {
        return Err(Error::invalid("bins", "must be >= 2"));
    }
    if fm.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: fm.len(),
        });
    }
    let binned: Vec<Vec<usize>> = (0..width).map(|j| bin_indices(&fm.column(j), bins)).collect();
    let target = bin_indices(&fm.targets, bins);
    let relevance: Vec<f64> = binned.iter().map(|c| mi_from_bins(c, &target, bins)).collect();

    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut redundancy = vec![0.0; width];
    let mut scores = Vec::with_capacity(k);
    while selected.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..width {
            if selected.contains(&j) {
                continue;
            }
            let score = if selected.is_empty() {
                relevance[j]
            } else {
                relevance[j] - redundancy[j] / selected.len() as f64
            };
            let better = match best {
                None => true,
                Some((b, s)) => score > s || (score == s && fm.lag_labels[j] < fm.lag_labels[b]),
            };
            if better {
                best = Some((j, score));
            }
        }
        let (pick, score) = best.expect("k <= width leaves a candidate");
        selected.push(pick);
        scores.push(score);
        for j in 0..width {
            if !selected.contains(&j) {
                redundancy[j] += mi_from_bins(&binned[j], &binned[pick], bins);
            }
        }
    }
    Ok(MrmrSelection {
        lags: selected.iter().map(|&j| fm.lag_labels[j]).collect(),
        relevance: selected.iter().map(|&j| relevance[j]).collect(),
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lag_matrix_by_hand() {
        let fm = build_lag_matrix(&[1.0, 2.0, 3.0, 4.0], &[2, 1], "x").unwrap();
        assert_eq!(fm.rows, vec![vec![2.0, 1.0], vec![3.0, 2.0]]);
        assert_eq!(fm.targets, vec![3.0, 4.0]);
        assert_eq!(fm.lag_labels, vec![1, 2]);
    }

    #[test]
    fn lag_matrix_errors() {
        assert!(build_lag_matrix(&[1.0, 2.0, 3.0, 4.0], &[5], "x").is_err());
        assert!(build_lag_matrix(&[1.0, 2.0, 3.0, 4.0], &[4], "x").is_err());
        assert!(build_lag_matrix(&[1.0, 2.0], &[], "x").is_err());
    }

    #[test]
    fn unit_lag_is_persistence() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.4).cos()).collect();
        let fm = build_lag_matrix(&x, &[1], "x").unwrap();
        for (t, row) in fm.rows.iter().enumerate() {
            assert_eq!(row[0], x[t]);
            assert_eq!(fm.targets[t], x[t + 1]);
        }
    }

    #[test]
    fn lag_vector_reads_the_tail() {
        let h = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(lag_vector(&h, &[1, 3]).unwrap(), vec![4.0, 2.0]);
        assert!(lag_vector(&h, &[5]).is_err());
    }

    fn entropy_of_bins(x: &[f64], bins: usize) -> f64 {
        let idx = bin_indices(x, bins);
        let mut counts = vec![0usize; bins];
        for i in idx {
            counts[i] += 1;
        }
        let n = x.len() as f64;
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    }

    #[test]
    fn self_information_is_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..1000).map(|_| rng.random::<f64>().powi(2)).collect();
        let mi = mutual_information(&a, &a, 16).unwrap();
        assert!((mi - entropy_of_bins(&a, 16)).abs() < 1e-12);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((mutual_information(&a, &neg, 16).unwrap() - mi).abs() < 1e-12);
    }

    #[test]
    fn independent_uniforms_have_small_mi() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        assert!(mutual_information(&a, &b, 8).unwrap() <= 0.02);
    }

    #[test]
    fn constant_sequence_has_zero_mi() {
        let a = vec![3.0; 50];
        let b: Vec<f64> = (0..50).map(f64::from).collect();
        assert_eq!(mutual_information(&a, &b, 8).unwrap(), 0.0);
    }

    #[test]
    fn mi_argument_errors() {
        assert!(mutual_information(&[1.0], &[1.0], 4).is_err());
        assert!(mutual_information(&[1.0, 2.0], &[1.0], 4).is_err());
        assert!(mutual_information(&[1.0, 2.0], &[1.0, 2.0], 1).is_err());
    }

    fn noisy_matrix(seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 400;
        let x: Vec<f64> = (0..n)
            .map(|t| (t as f64 * 0.26).sin() + 0.3 * rng.random::<f64>())
            .collect();
        build_lag_matrix(&x, &[1, 2, 3, 5, 8, 12], "x").unwrap()
    }

    #[test]
    fn first_pick_is_max_relevance() {
        let fm = noisy_matrix(3);
        let sel = mrmr_select(&fm, 1, 16).unwrap();
        let best = (0..fm.width())
            .map(|j| mutual_information(&fm.column(j), &fm.targets, 16).unwrap())
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
        assert_eq!(sel.lags, vec![fm.lag_labels[best.0]]);
    }

    #[test]
    fn exact_copy_of_target_is_picked_first() {
        let mut fm = noisy_matrix(4);
        for (r, t) in fm.rows.iter_mut().zip(&fm.targets) {
            r[3] = *t;
        }
        let sel = mrmr_select(&fm, 2, 16).unwrap();
        assert_eq!(sel.lags[0], fm.lag_labels[3]);
    }

    /// Recomputes every candidate's score from scratch at each greedy step.
    fn brute_force_mrmr(fm: &FeatureMatrix, k: usize, bins: usize) -> Vec<usize> {
        let cols: Vec<Vec<f64>> = (0..fm.width()).map(|j| fm.column(j)).collect();
        let mut chosen: Vec<usize> = Vec::new();
        while chosen.len() < k {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..fm.width() {
                if chosen.contains(&j) {
                    continue;
                }
                let rel = mutual_information(&cols[j], &fm.targets, bins).unwrap();
                let red = if chosen.is_empty() {
                    0.0
                } else {
                    chosen
                        .iter()
                        .map(|&s| mutual_information(&cols[j], &cols[s], bins).unwrap())
                        .sum::<f64>()
                        / chosen.len() as f64
                };
                let score = rel - red;
                let take = match best {
                    None => true,
                    Some((b, s)) => {
                        score > s + 1e-12
                            || ((score - s).abs() <= 1e-12 && fm.lag_labels[j] < fm.lag_labels[b])
                    }
                };
                if take {
                    best = Some((j, score));
                }
            }
            chosen.push(best.unwrap().0);
        }
        chosen.iter().map(|&j| fm.lag_labels[j]).collect()
    }

    #[test]
    fn duplicated_column_matches_brute_force() {
        let mut fm = noisy_matrix(5);
        // Column 4 duplicates column 0 (lag 1) under a different label.
        for r in fm.rows.iter_mut() {
            r[4] = r[0];
        }
        let sel = mrmr_select(&fm, 4, 16).unwrap();
        assert_eq!(sel.lags, brute_force_mrmr(&fm, 4, 16));
        // Once lag 1 is in, its copy pays the full self-information penalty.
        let copy_label = fm.lag_labels[4];
        let pos_first = sel.lags.iter().position(|&l| l == 1);
        if let Some(p) = pos_first {
            assert!(sel.lags[..=p].iter().all(|&l| l != copy_label));
        }
    }

    #[test]
    fn k_out_of_range() {
        let fm = noisy_matrix(6);
        assert!(mrmr_select(&fm, 0, 16).is_err());
        assert!(mrmr_select(&fm, 7, 16).is_err());
    }
}
