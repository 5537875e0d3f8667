use serde::{Deserialize, Serialize};

use crate::emd::{emd, SiftConfig};
use crate::{Error, Result};

/// Per-IMF `|imf_truncated - imf_full|` over the last `window` samples the
/// truncated series has.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDivergence {
    /// `per_imf[k][j]` compares IMF `k + 1` at sample `window_start + j`.
    pub per_imf: Vec<Vec<f64>>,
    pub window_start: usize,
    pub window_end: usize,
    pub lookahead: usize,
}

impl BoundaryDivergence {
    /// Long-format rows `(imf_index, sample_offset, divergence)`, IMFs 1-based.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.per_imf
            .iter()
            .enumerate()
            .flat_map(|(k, d)| d.iter().enumerate().map(move |(j, &v)| (k + 1, j, v)))
    }
}

/// Compares EMD of `x` without its last `lookahead` samples against EMD of
/// all of `x`.
pub fn boundary_divergence(
    x: &[f64],
    lookahead: usize,
    config: &SiftConfig,
    window: usize,
) -> Result<BoundaryDivergence> {
    if window == 0 {
        return Err(Error::invalid("window", "must be >= 1"));
    }
    if x.len() <= lookahead + window {
        return Err(Error::TooShort {
            required: lookahead + window + 1,
            actual: x.len(),
        });
    }
    let end = x.len() - lookahead;
    let truncated = emd(&x[..end], config)?;
    let full = emd(x, config)?;
    let start = end - window;
    let per_imf = truncated
        .imfs
        .iter()
        .zip(&full.imfs)
        .map(|(t, f)| (start..end).map(|i| (t[i] - f[i]).abs()).collect())
        .collect();
    Ok(BoundaryDivergence {
        per_imf,
        window_start: start,
        window_end: end,
        lookahead,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn signal(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (TAU * i as f64 / 12.0).sin() + 0.5 * (TAU * i as f64 / 50.0).sin())
            .collect()
    }

    #[test]
    fn zero_lookahead_is_identically_zero() {
        let d = boundary_divergence(&signal(300), 0, &SiftConfig::default(), 48).unwrap();
        assert!(!d.per_imf.is_empty());
        assert!(d.rows().all(|(_, _, v)| v.abs() <= 1e-12));
        assert_eq!((d.window_start, d.window_end), (252, 300));
    }

    #[test]
    fn rows_are_long_format() {
        let d = boundary_divergence(&signal(300), 24, &SiftConfig::default(), 10).unwrap();
        let rows: Vec<_> = d.rows().collect();
        assert_eq!(rows.len(), d.per_imf.len() * 10);
        assert_eq!((rows[0].0, rows[0].1), (1, 0));
        assert!(rows.iter().all(|r| r.2 >= 0.0));
    }

    #[test]
    fn slow_sinusoid_diverges_most_at_the_edge() {
        let x: Vec<f64> = (0..600).map(|i| (TAU * i as f64 / 200.0).sin()).collect();
        let d = boundary_divergence(&x, 30, &SiftConfig::default(), 20).unwrap();
        let imf1 = &d.per_imf[0];
        assert!(imf1[10] <= imf1[19], "{} vs {}", imf1[10], imf1[19]);
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(boundary_divergence(&signal(50), 10, &SiftConfig::default(), 40).is_err());
        assert!(boundary_divergence(&signal(50), 10, &SiftConfig::default(), 0).is_err());
    }
}
