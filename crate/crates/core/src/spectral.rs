//! Time-frequency and correlation diagnostics for individual components:
//! Hann-windowed STFT magnitudes and the sample partial autocorrelation.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_WINDOW: usize = 256;
pub const DEFAULT_HOP: usize = 64;

/// One-sided STFT magnitudes, `magnitudes[frame][bin]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub magnitudes: Vec<Vec<f64>>,
    pub frame_hop: usize,
    pub window_length: usize,
    /// Cycles per sample (cycles/hour for hourly data).
    pub bin_width: f64,
}

impl Spectrogram {
    pub fn frame_count(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn bin_count(&self) -> usize {
        self.window_length / 2 + 1
    }

    pub fn frame_start(&self, frame: usize) -> usize {
        frame * self.frame_hop
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width
    }

    /// Index of the strongest bin in each frame (lowest index on ties).
    pub fn dominant_bins(&self) -> Vec<usize> {
        self.magnitudes
            .iter()
            .map(|frame| {
                frame
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (k, &m)| if m > acc.1 { (k, m) } else { acc })
                    .0
            })
            .collect()
    }
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (std::f64::consts::TAU * n as f64 / len as f64).cos())
        .collect()
}

pub fn stft(x: &[f64], window_length: usize, hop: usize) -> Result<Spectrogram> {
    if window_length == 0 || !window_length.is_multiple_of(2) {
        return Err(Error::invalid("window_length", "must be positive and even"));
    }
    if hop == 0 {
        return Err(Error::invalid("hop", "must be >= 1"));
    }
    if window_length > x.len() {
        return Err(Error::TooShort {
            required: window_length,
            actual: x.len(),
        });
    }
    let window = hann(window_length);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window_length);
    let frames = (x.len() - window_length) / hop + 1;
    let bins = window_length / 2 + 1;
    let mut buf = vec![Complex::new(0.0, 0.0); window_length];
    let magnitudes = (0..frames)
        .map(|f| {
            let start = f * hop;
            for (b, (v, w)) in buf
                .iter_mut()
                .zip(x[start..start + window_length].iter().zip(&window))
            {
                *b = Complex::new(v * w, 0.0);
            }
            fft.process(&mut buf);
            buf[..bins].iter().map(|c| c.norm()).collect()
        })
        .collect();
    Ok(Spectrogram {
        magnitudes,
        frame_hop: hop,
        window_length,
        bin_width: 1.0 / window_length as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacfResult {
    /// Partial autocorrelation at lags `0..=max_lag`.
    pub values: Vec<f64>,
    /// Half-width of the approximate 95% white-noise band, `1.96/sqrt(N)`.
    pub confidence_band: f64,
}

/// Biased sample autocovariances (divisor N) at lags `0..=max_lag`.
pub fn autocovariance(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    (0..=max_lag)
        .map(|k| {
            centred[..n - k]
                .iter()
                .zip(&centred[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Sample PACF by the Durbin-Levinson recursion.
pub fn pacf(x: &[f64], max_lag: usize) -> Result<PacfResult> {
    let n = x.len();
    if n < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: n,
        });
    }
    if 2 * max_lag >= n {
        return Err(Error::invalid(
            "max_lag",
            format!("{max_lag} must be below N/2 = {}", n as f64 / 2.0),
        ));
    }
    let gamma = autocovariance(x, max_lag);
    if !(gamma[0] > 0.0) {
        return Err(Error::ZeroRange);
    }
    let rho: Vec<f64> = gamma.iter().map(|g| g / gamma[0]).collect();

    let mut values = vec![1.0];
    let mut phi: Vec<f64> = Vec::with_capacity(max_lag);
    let mut v = 1.0;
    for k in 1..=max_lag {
        let num = rho[k] - (1..k).map(|j| phi[j - 1] * rho[k - j]).sum::<f64>();
        let kappa = if v > 0.0 { num / v } else { 0.0 };
        let prev = phi.clone();
        for j in 1..k {
            phi[j - 1] = prev[j - 1] - kappa * prev[k - j - 1];
        }
        phi.push(kappa);
        v *= 1.0 - kappa * kappa;
        values.push(kappa);
    }
    Ok(PacfResult {
        values,
        confidence_band: 1.96 / (n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::white_noise;

    #[test]
    fn constant_input_stays_in_the_window_main_lobe() {
        // A Hann-windowed constant is the window's own spectrum: DC plus
        // half of it in bin 1, nothing beyond.
        let s = stft(&[1.0; 300], 64, 16).unwrap();
        for frame in &s.magnitudes {
            assert_eq!(frame.len(), 33);
            assert!((frame[0] - 32.0).abs() < 1e-9);
            assert!((frame[1] - 16.0).abs() < 1e-9);
            for m in &frame[2..] {
                assert!(*m <= 1e-10 * frame[0]);
            }
        }
    }

    #[test]
    fn zero_input_gives_zero_magnitudes() {
        let s = stft(&[0.0; 128], 32, 8).unwrap();
        assert!(s.magnitudes.iter().flatten().all(|&m| m == 0.0));
    }

    #[test]
    fn frame_count_drops_partial_frame() {
        let s = stft(&[0.5; 100], 32, 30).unwrap();
        assert_eq!(s.frame_count(), 3);
        assert_eq!(s.frame_start(2), 60);
        assert_eq!(s.frequency(4), 4.0 / 32.0);
    }

    #[test]
    fn stft_argument_errors() {
        assert!(stft(&[1.0; 10], 16, 4).is_err());
        assert!(stft(&[1.0; 100], 15, 4).is_err());
        assert!(stft(&[1.0; 100], 16, 0).is_err());
    }

    #[test]
    fn sign_flip_invariance() {
        let x = white_noise(500, 1.0, 17);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(stft(&x, 64, 32).unwrap(), stft(&neg, 64, 32).unwrap());
    }

    #[test]
    fn pacf_zero_lag() {
        let r = pacf(&white_noise(100, 1.0, 1), 0).unwrap();
        assert_eq!(r.values, vec![1.0]);
    }

    #[test]
    fn pacf_errors() {
        assert!(matches!(pacf(&[2.0; 50], 5), Err(Error::ZeroRange)));
        assert!(pacf(&white_noise(20, 1.0, 1), 10).is_err());
    }

    /// Per-lag regression oracle: the last coefficient of the order-k
    /// Yule-Walker solution.
    #[test]
    fn durbin_levinson_matches_yule_walker_solve() {
        let x = white_noise(400, 1.0, 23);
        let mut ar = vec![0.0; 400];
        for t in 2..400 {
            ar[t] = 0.5 * ar[t - 1] - 0.3 * ar[t - 2] + x[t];
        }
        let r = pacf(&ar, 8).unwrap();
        let gamma = autocovariance(&ar, 8);
        for k in 1..=8 {
            let m = nalgebra::DMatrix::from_fn(k, k, |i, j| gamma[i.abs_diff(j)]);
            let b = nalgebra::DVector::from_fn(k, |i, _| gamma[i + 1]);
            let phi = m.lu().solve(&b).unwrap();
            assert!((phi[k - 1] - r.values[k]).abs() < 1e-10);
        }
    }
}
