//! Deterministic synthetic test clips.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::seqio::{Sequence, CHANNELS};

struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: f64,
    mix: [f64; CHANNELS],
}

struct Disc {
    cx: f64,
    cy: f64,
    vx: f64,
    vy: f64,
    r: f64,
    level: [f64; CHANNELS],
}

/// Moving colour gradient with seeded sinusoidal texture and a few moving
/// discs. The gradient overshoots [0, 255] so the clip has saturated dark and
/// bright regions. Values are rounded to integers.
pub fn desk_clip(frames: usize, height: usize, width: usize, seed: u64) -> Result<Sequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Periods of roughly 7 to 40 pixels at random orientations.
    let waves: Vec<Wave> = (0..6)
        .map(|_| {
            let k: f64 = rng.random_range(0.15..0.9);
            let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
            Wave {
                fx: k * theta.cos(),
                fy: k * theta.sin(),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
                amp: rng.random_range(5.0..12.0),
                mix: [
                    rng.random_range(0.5..1.0),
                    rng.random_range(0.5..1.0),
                    rng.random_range(0.5..1.0),
                ],
            }
        })
        .collect();
    let discs: Vec<Disc> = (0..3)
        .map(|_| Disc {
            cx: rng.random_range(0.2..0.8) * width as f64,
            cy: rng.random_range(0.2..0.8) * height as f64,
            vx: rng.random_range(-2.0..2.0),
            vy: rng.random_range(-2.0..2.0),
            r: rng.random_range(0.08..0.18) * height.min(width) as f64,
            level: [
                rng.random_range(-60.0..60.0),
                rng.random_range(-60.0..60.0),
                rng.random_range(-60.0..60.0),
            ],
        })
        .collect();
    let tint = [1.0, 0.85, 0.7];
    let span = (height + width) as f64;

    let plane = height * width;
    let mut data = vec![0.0f32; frames * CHANNELS * plane];
    for t in 0..frames {
        let shift = 2.0 * t as f64;
        for c in 0..CHANNELS {
            let out = &mut data[(t * CHANNELS + c) * plane..(t * CHANNELS + c + 1) * plane];
            for y in 0..height {
                for x in 0..width {
                    let (xf, yf) = (x as f64 + shift, y as f64 + 0.5 * shift);
                    let mut v = -40.0 + 335.0 * tint[c] * (xf + yf) / span;
                    for wv in &waves {
                        v += wv.amp * wv.mix[c] * (wv.fx * xf + wv.fy * yf + wv.phase).sin();
                    }
                    for d in &discs {
                        let dx = x as f64 - (d.cx + d.vx * t as f64);
                        let dy = y as f64 - (d.cy + d.vy * t as f64);
                        if dx * dx + dy * dy <= d.r * d.r {
                            v += d.level[c];
                        }
                    }
                    out[y * width + x] = v.clamp(0.0, 255.0).round() as f32;
                }
            }
        }
    }
    Sequence::new(frames, height, width, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_saturated() {
        let a = desk_clip(3, 32, 32, 5).unwrap();
        assert_eq!(a, desk_clip(3, 32, 32, 5).unwrap());
        assert_ne!(a, desk_clip(3, 32, 32, 6).unwrap());
        assert!(a.data().contains(&0.0));
        assert!(a.data().contains(&255.0));
        assert_ne!(a.frame(0), a.frame(1));
    }
}
