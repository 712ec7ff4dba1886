//! Reproducible additive white Gaussian noise.
//!
//! Each (frame, channel) pair is its own ChaCha stream and each row starts at
//! a fixed word offset, so every sample depends only on
//! (seed, frame, channel, y, x) and not on how work is split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seqio::{Sequence, CHANNELS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Standard deviation on the 8-bit scale.
    pub sigma: f64,
    pub seed: u64,
    /// Clamp to [0, 255] after adding.
    pub clip: bool,
}

impl NoiseModel {
    pub fn new(sigma: f64, seed: u64) -> Self {
        Self {
            sigma,
            seed,
            clip: true,
        }
    }

    pub fn unclipped(sigma: f64, seed: u64) -> Self {
        Self {
            sigma,
            seed,
            clip: false,
        }
    }
}

fn row_rng(seed: u64, frame: usize, channel: usize, y: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((frame * CHANNELS + channel) as u64);
    // Rows sit 2^32 words apart; a row draws at most a few words per sample.
    rng.set_word_pos((y as u128) << 32);
    rng
}

pub fn add_awgn(seq: &Sequence, model: NoiseModel) -> Result<Sequence> {
    if !model.sigma.is_finite() || model.sigma < 0.0 {
        return Err(Error::Config(format!("sigma must be >= 0, got {}", model.sigma)));
    }
    let (h, w) = (seq.height(), seq.width());
    let mut out = seq.clone();
    if model.sigma == 0.0 {
        return Ok(out);
    }
    out.data_mut().par_chunks_mut(w).enumerate().for_each(|(row, line)| {
        let y = row % h;
        let c = (row / h) % CHANNELS;
        let t = row / (h * CHANNELS);
        let mut rng = row_rng(model.seed, t, c, y);
        for v in line.iter_mut() {
            let n: f64 = rng.sample(StandardNormal);
            let mut s = f64::from(*v) + model.sigma * n;
            if model.clip {
                s = s.clamp(0.0, 255.0);
            }
            *v = s as f32;
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_identity() {
        let s = Sequence::new(1, 8, 8, (0..192).map(|i| i as f32).collect()).unwrap();
        assert_eq!(add_awgn(&s, NoiseModel::new(0.0, 3)).unwrap(), s);
    }

    #[test]
    fn same_seed_same_noise() {
        let s = Sequence::filled(2, 16, 16, 128.0).unwrap();
        let a = add_awgn(&s, NoiseModel::new(20.0, 7)).unwrap();
        let b = add_awgn(&s, NoiseModel::new(20.0, 7)).unwrap();
        let c = add_awgn(&s, NoiseModel::new(20.0, 8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn planes_and_rows_are_distinct() {
        let s = Sequence::filled(2, 8, 8, 128.0).unwrap();
        let n = add_awgn(&s, NoiseModel::unclipped(10.0, 1)).unwrap();
        assert_ne!(n.plane(0, 0), n.plane(0, 1));
        assert_ne!(n.plane(0, 0), n.plane(1, 0));
        assert_ne!(&n.plane(0, 0)[..8], &n.plane(0, 0)[8..16]);
    }

    #[test]
    fn clipping() {
        let s = Sequence::filled(1, 8, 8, 250.0).unwrap();
        let n = add_awgn(&s, NoiseModel::new(50.0, 2)).unwrap();
        assert!(n.data().iter().all(|&v| (0.0..=255.0).contains(&v)));
        assert!(n.data().contains(&255.0));
    }

    #[test]
    fn negative_sigma_rejected() {
        let s = Sequence::filled(1, 8, 8, 0.0).unwrap();
        assert!(add_awgn(&s, NoiseModel::new(-1.0, 0)).is_err());
    }
}
