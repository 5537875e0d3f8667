//! Noise-assisted decompositions (EEMD and complementary-pair CEEMD) and the
//! reconstruction signal-to-noise ratio used to compare them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emd::{emd, reconstruct, Decomposition, EnsembleMeta, Method, SiftConfig};
use crate::numeric::{derive_seed, std_dev, CompensatedSum};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub num_ensembles: usize,
    /// Noise standard deviation as a fraction of the input's standard deviation.
    pub noise_std_fraction: f64,
    pub master_seed: u64,
    pub sift: SiftConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            num_ensembles: 100,
            noise_std_fraction: 0.2,
            master_seed: 0,
            sift: SiftConfig::default(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self, method: Method) -> Result<()> {
        if self.num_ensembles == 0 {
            return Err(Error::invalid("num_ensembles", "must be >= 1"));
        }
        if method == Method::Ceemd && !self.num_ensembles.is_multiple_of(2) {
            return Err(Error::invalid(
                "num_ensembles",
                format!("CEEMD needs an even count, got {}", self.num_ensembles),
            ));
        }
        if !(self.noise_std_fraction >= 0.0) || !self.noise_std_fraction.is_finite() {
            return Err(Error::invalid("noise_std_fraction", "must be finite and >= 0"));
        }
        self.sift.validate()
    }

    fn meta(&self) -> EnsembleMeta {
        EnsembleMeta {
            num_ensembles: self.num_ensembles,
            noise_std_fraction: self.noise_std_fraction,
            master_seed: self.master_seed,
        }
    }
}

/// I.i.d. Gaussian samples with the given standard deviation.
pub fn white_noise(n: usize, std: f64, stream_seed: u64) -> Vec<f64> {
    if std == 0.0 {
        return vec![0.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            std * z
        })
        .collect()
}

/// Noise injected into ensemble member `member` (signs alternate for CEEMD).
pub fn member_noise(n: usize, method: Method, config: &EnsembleConfig, noise_std: f64, member: usize) -> Vec<f64> {
    match method {
        Method::Ceemd => {
            let pair = (member / 2) as u64;
            let noise = white_noise(n, noise_std, derive_seed(config.master_seed, pair));
            if member.is_multiple_of(2) {
                noise
            } else {
                noise.into_iter().map(|v| -v).collect()
            }
        }
        _ => white_noise(n, noise_std, derive_seed(config.master_seed, member as u64)),
    }
}

pub fn eemd(x: &[f64], config: &EnsembleConfig) -> Result<Decomposition> {
    ensemble_decompose(x, config, Method::Eemd)
}

/// EEMD with noise added in `(+e, -e)` pairs sharing one draw.
pub fn ceemd(x: &[f64], config: &EnsembleConfig) -> Result<Decomposition> {
    ensemble_decompose(x, config, Method::Ceemd)
}

fn ensemble_decompose(x: &[f64], config: &EnsembleConfig, method: Method) -> Result<Decomposition> {
    config.validate(method)?;
    let n = x.len();
    let noise_std = config.noise_std_fraction * std_dev(x);

    let members: Vec<Decomposition> = (0..config.num_ensembles)
        .into_par_iter()
        .map(|member| {
            let noise = member_noise(n, method, config, noise_std, member);
            let noisy: Vec<f64> = x.iter().zip(&noise).map(|(a, b)| a + b).collect();
            emd(&noisy, &config.sift)
        })
        .collect::<Result<_>>()?;

    // Members with fewer modes contribute zeros to the missing ones.
    let modes = members.iter().map(Decomposition::imf_count).max().unwrap_or(0);
    let average = |select: &dyn Fn(&Decomposition) -> Option<&[f64]>| -> Vec<f64> {
        let mut acc = vec![CompensatedSum::new(); n];
        for d in &members {
            if let Some(c) = select(d) {
                for (a, v) in acc.iter_mut().zip(c) {
                    a.add(*v);
                }
            }
        }
        let ne = members.len() as f64;
        acc.iter().map(|a| a.total() / ne).collect()
    };

    let imfs = (0..modes)
        .map(|k| average(&|d: &Decomposition| d.imfs.get(k).map(Vec::as_slice)))
        .collect();
    let residual = average(&|d: &Decomposition| Some(d.residual.as_slice()));

    Ok(Decomposition {
        imfs,
        residual,
        method,
        sift: config.sift.clone(),
        ensemble: Some(config.meta()),
    })
}

/// Decomposes with the given method; `Method::Emd` ignores the ensemble fields.
pub fn decompose(x: &[f64], method: Method, config: &EnsembleConfig) -> Result<Decomposition> {
    match method {
        Method::Emd => emd(x, &config.sift),
        Method::Eemd => eemd(x, config),
        Method::Ceemd => ceemd(x, config),
    }
}

/// Reconstruction fidelity in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Snr {
    /// Zero reconstruction error.
    Exact,
    Db(f64),
}

impl Snr {
    pub fn db(self) -> f64 {
        match self {
            Snr::Exact => f64::INFINITY,
            Snr::Db(v) => v,
        }
    }
}

impl std::fmt::Display for Snr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Snr::Exact => write!(f, "exact"),
            Snr::Db(v) => write!(f, "{v:.3} dB"),
        }
    }
}

/// `10 log10(sum x^2 / sum (x - x_hat)^2)` with `x_hat` the reconstruction.
pub fn reconstruction_snr(x: &[f64], d: &Decomposition) -> Result<Snr> {
    let x_hat = reconstruct(d)?;
    snr(x, &x_hat)
}

pub fn snr(x: &[f64], x_hat: &[f64]) -> Result<Snr> {
    if x.len() != x_hat.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: x_hat.len(),
        });
    }
    let signal: f64 = x.iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Err(Error::Degenerate("all-zero signal has no SNR".to_string()));
    }
    let noise: f64 = x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    if noise == 0.0 {
        return Ok(Snr::Exact);
    }
    Ok(Snr::Db(10.0 * (signal / noise).log10()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                (t * 0.55).sin() + 0.7 * (t * 0.061).sin() + 0.002 * t
            })
            .collect()
    }

    #[test]
    fn zero_std_noise_is_zero() {
        assert!(white_noise(50, 0.0, 9).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noise_is_reproducible_per_seed() {
        assert_eq!(white_noise(100, 1.0, 5), white_noise(100, 1.0, 5));
        assert_ne!(white_noise(100, 1.0, 5), white_noise(100, 1.0, 6));
    }

    #[test]
    fn noise_moments() {
        let w = white_noise(100_000, 1.0, 11);
        let m = w.iter().sum::<f64>() / w.len() as f64;
        let s = (w.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / w.len() as f64).sqrt();
        assert!(m.abs() < 0.02, "{m}");
        assert!((s - 1.0).abs() < 0.02, "{s}");
    }

    #[test]
    fn noiseless_single_member_equals_emd() {
        let x = signal(300);
        let cfg = EnsembleConfig {
            num_ensembles: 1,
            noise_std_fraction: 0.0,
            ..EnsembleConfig::default()
        };
        let plain = emd(&x, &cfg.sift).unwrap();
        let e = eemd(&x, &cfg).unwrap();
        assert_eq!(e.imfs, plain.imfs);
        assert_eq!(e.residual, plain.residual);
    }

    #[test]
    fn ceemd_rejects_odd_count() {
        let cfg = EnsembleConfig {
            num_ensembles: 3,
            ..EnsembleConfig::default()
        };
        assert!(ceemd(&signal(64), &cfg).is_err());
        assert!(eemd(&signal(64), &cfg).is_ok());
    }

    #[test]
    fn ceemd_pairs_cancel_exactly() {
        let cfg = EnsembleConfig {
            num_ensembles: 8,
            master_seed: 3,
            ..EnsembleConfig::default()
        };
        let n = 64;
        let mut total = vec![0.0; n];
        for m in 0..cfg.num_ensembles {
            for (t, v) in total.iter_mut().zip(member_noise(n, Method::Ceemd, &cfg, 0.7, m)) {
                *t += v;
            }
        }
        assert!(total.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ensembles_are_deterministic() {
        let x = signal(256);
        let cfg = EnsembleConfig {
            num_ensembles: 6,
            master_seed: 42,
            ..EnsembleConfig::default()
        };
        assert_eq!(eemd(&x, &cfg).unwrap(), eemd(&x, &cfg).unwrap());
        assert_eq!(ceemd(&x, &cfg).unwrap(), ceemd(&x, &cfg).unwrap());
    }

    #[test]
    fn snr_hand_values() {
        let x = [1.0; 4];
        let d = |r: Vec<f64>| Decomposition {
            imfs: vec![],
            residual: r,
            method: Method::Emd,
            sift: SiftConfig::default(),
            ensemble: None,
        };
        assert_eq!(reconstruction_snr(&x, &d(x.to_vec())).unwrap(), Snr::Exact);
        let off = reconstruction_snr(&x, &d(vec![1.1; 4])).unwrap().db();
        assert!((off - 20.0).abs() < 1e-9, "{off}");
        let zero = reconstruction_snr(&x, &d(vec![0.0; 4])).unwrap().db();
        assert!(zero.abs() < 1e-12);
        assert!(reconstruction_snr(&[0.0; 4], &d(vec![0.0; 4])).is_err());
    }
}
