use tempfile::tempdir;

use wiener4d::engine::{self, Denoiser, EngineConfig, Mode, NoiseSpec};
use wiener4d::mocomp::{build_buffer_mc, warp_frame, WarpSpec};
use wiener4d::nets::{self, CoringLayout};
use wiener4d::seqio::{save_flow, FlowField};
use wiener4d::{add_awgn, psnr, synth, Error, NoiseModel, Sequence, WindowShape};

fn desk() -> Sequence {
    synth::desk_clip(10, 128, 128, 1).unwrap()
}

fn max_dev(seq: &Sequence, v: f32) -> f32 {
    seq.data().iter().map(|x| (x - v).abs()).fold(0.0, f32::max)
}

fn rms_dev(seq: &Sequence, v: f32) -> f64 {
    let ss: f64 = seq.data().iter().map(|&x| f64::from(x - v).powi(2)).sum();
    (ss / seq.data().len() as f64).sqrt()
}

fn mean(seq: &Sequence) -> f64 {
    seq.data().iter().map(|&x| f64::from(x)).sum::<f64>() / seq.data().len() as f64
}

/// Fraction of noise energy a pure-noise bin keeps under
/// H = max(Pyy - Pnn, 0) / Pyy when Pyy / Pnn ~ Exp(1):
/// the integral of (e - 1)² / e · exp(-e) over e > 1, by the midpoint rule.
fn coring_residual_fraction() -> f64 {
    let (n, hi) = (400_000, 40.0);
    let de = (hi - 1.0) / n as f64;
    (0..n)
        .map(|i| {
            let e = 1.0 + (i as f64 + 0.5) * de;
            (e - 1.0).powi(2) / e * (-e).exp() * de
        })
        .sum()
}

#[test]
fn residual_fraction_oracle() {
    // 2/e - 2/e + E1(1)
    assert!((coring_residual_fraction() - 0.219_383_934).abs() < 1e-6);
}

#[test]
fn flat_clip_stays_flat() {
    let clean = Sequence::filled(10, 64, 64, 128.0).unwrap();
    let noisy = add_awgn(&clean, NoiseModel::new(20.0, 3)).unwrap();
    let out = engine::denoise_sequence(&noisy, &EngineConfig::with_sigma(20.0), None, None).unwrap();
    let bound = 20.0 * coring_residual_fraction().sqrt();
    let rms = rms_dev(&out, 128.0);
    assert!(rms <= bound, "rms deviation {rms} above {bound}");
    assert!((mean(&out) - 128.0).abs() < 0.5);
}

#[test]
fn gain_over_noisy_input() {
    let clean = desk();
    let noisy = add_awgn(&clean, NoiseModel::new(20.0, 2)).unwrap();
    let out = engine::denoise_sequence(&noisy, &EngineConfig::with_sigma(20.0), None, None).unwrap();
    let (p_in, p_out) = (psnr(&clean, &noisy).unwrap().mean, psnr(&clean, &out).unwrap().mean);
    assert!(p_out >= p_in + 5.0, "{p_in} -> {p_out}");
}

#[test]
fn baseline_is_below_4d_on_luma() {
    let clean = desk();
    let noisy = add_awgn(&clean, NoiseModel::new(20.0, 2)).unwrap();
    let cfg = EngineConfig::with_sigma(20.0);
    let full = engine::denoise_sequence(&noisy, &cfg, None, None).unwrap();
    let base = engine::denoise_baseline3d(&noisy, &cfg).unwrap();
    // The baseline only produces luma, so both are compared on luma.
    let luma = clean.to_luma();
    let p_full = psnr(&luma, &full.to_luma()).unwrap().mean;
    let p_base = psnr(&luma, &base).unwrap().mean;
    assert!(p_base < p_full, "baseline {p_base} vs 4-D {p_full}");
}

#[test]
fn baseline_flat_luma() {
    let clean = Sequence::filled(6, 64, 64, 90.0).unwrap();
    let noisy = add_awgn(&clean, NoiseModel::new(10.0, 4)).unwrap();
    let out = engine::denoise_baseline3d(&noisy, &EngineConfig::with_sigma(10.0)).unwrap();
    let luma_sigma = 10.0 * (0.299f64.powi(2) + 0.587f64.powi(2) + 0.114f64.powi(2)).sqrt();
    let bound = luma_sigma * coring_residual_fraction().sqrt();
    let rms = rms_dev(&out, 90.0);
    assert!(rms <= bound, "rms deviation {rms} above {bound}");
    assert!((mean(&out) - 90.0).abs() < 0.5);
}

#[test]
fn multiscale_bounds() {
    let clean = desk();
    let noisy = add_awgn(&clean, NoiseModel::new(10.0, 5)).unwrap();
    let scales = vec![16, 32, 64];
    let singles: Vec<Sequence> = scales
        .iter()
        .map(|&b| {
            let cfg = EngineConfig {
                block: b,
                ..EngineConfig::with_sigma(10.0)
            };
            engine::denoise_sequence(&noisy, &cfg, None, None).unwrap()
        })
        .collect();
    let cfg = EngineConfig {
        scales: scales.clone(),
        ..EngineConfig::with_sigma(10.0)
    };
    let ms = engine::denoise_sequence(&noisy, &cfg, None, None).unwrap();
    let p_ms = psnr(&clean, &ms).unwrap().mean;
    let worst = singles
        .iter()
        .map(|s| psnr(&clean, s).unwrap().mean)
        .fold(f64::INFINITY, f64::min);
    assert!(p_ms >= worst, "multi-scale {p_ms} below worst single {worst}");

    let first = engine::denoise_multiscale(&noisy, &cfg, &[1.0, 0.0, 0.0], None, None).unwrap();
    assert_eq!(first.sequence, singles[0]);
}

#[test]
fn multiscale_of_identical_outputs() {
    let flat = Sequence::filled(3, 64, 64, 42.0).unwrap();
    let cfg = EngineConfig {
        scales: vec![8, 16],
        ..EngineConfig::with_sigma(5.0)
    };
    let out = engine::denoise_sequence(&flat, &cfg, None, None).unwrap();
    assert!(max_dev(&out, 42.0) < 1e-4);
}

#[test]
fn multiscale_weight_mismatch() {
    let seq = Sequence::filled(1, 16, 16, 1.0).unwrap();
    let cfg = EngineConfig {
        scales: vec![8, 16],
        ..EngineConfig::with_sigma(5.0)
    };
    let err = engine::denoise_multiscale(&seq, &cfg, &[1.0], None, None).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn constant_noise_map_matches_scalar_sigma() {
    let clean = synth::desk_clip(4, 48, 48, 2).unwrap();
    let noisy = add_awgn(&clean, NoiseModel::new(20.0, 6)).unwrap();
    let cfg = EngineConfig {
        block: 8,
        ..EngineConfig::with_sigma(20.0)
    };
    let den = Denoiser::new(cfg, None).unwrap();
    let scalar = den.run(&noisy, None).unwrap().sequence;
    let maps = vec![vec![20.0f32; 48 * 48]; 4];
    let mapped = den.run_with_noise_maps(&noisy, None, &maps).unwrap().sequence;
    let err = scalar
        .data()
        .iter()
        .zip(mapped.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    assert!(err < 1e-3, "{err}");
}

#[test]
fn zero_noise_net_is_identity() {
    let clip = synth::desk_clip(3, 32, 32, 3).unwrap();
    let bundle = nets::zero_noise_bundle().unwrap();
    let cfg = EngineConfig {
        block: 8,
        noise: NoiseSpec::Blind,
        ..Default::default()
    };
    let out = engine::denoise_sequence(&clip, &cfg, Some(&bundle), None).unwrap();
    let err = out
        .data()
        .iter()
        .zip(clip.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    assert!(err < 1e-3, "{err}");
    assert!(engine::blind_sigma(&clip, 0, &bundle)
        .unwrap()
        .iter()
        .all(|&v| v == 0.0));
}

#[test]
fn missing_bundle_or_clean() {
    let seq = Sequence::filled(2, 16, 16, 1.0).unwrap();
    let blind = EngineConfig {
        block: 8,
        noise: NoiseSpec::Blind,
        ..Default::default()
    };
    assert!(matches!(
        engine::denoise_sequence(&seq, &blind, None, None),
        Err(Error::Config(_))
    ));
    let refined = EngineConfig {
        block: 8,
        mode: Mode::Refined,
        ..Default::default()
    };
    assert!(matches!(
        engine::denoise_sequence(&seq, &refined, None, None),
        Err(Error::Config(_))
    ));
    let gt = EngineConfig {
        block: 8,
        dc: wiener4d::DcMode::GroundTruth,
        ..Default::default()
    };
    assert!(matches!(
        engine::denoise_sequence(&seq, &gt, None, None),
        Err(Error::Config(_))
    ));
    let trained = EngineConfig {
        block: 8,
        window: WindowShape::Trained,
        ..Default::default()
    };
    assert!(engine::denoise_sequence(&seq, &trained, None, None).is_err());
}

#[test]
fn ground_truth_dc_runs() {
    let clean = synth::desk_clip(3, 32, 32, 4).unwrap();
    let noisy = add_awgn(&clean, NoiseModel::new(20.0, 1)).unwrap();
    let cfg = EngineConfig {
        block: 8,
        dc: wiener4d::DcMode::GroundTruth,
        ..EngineConfig::with_sigma(20.0)
    };
    let out = engine::denoise_sequence(&noisy, &cfg, None, Some(&clean)).unwrap();
    assert!(psnr(&clean, &out).unwrap().mean > psnr(&clean, &noisy).unwrap().mean);
}

#[test]
fn identical_frames_ignore_replication() {
    let one = synth::desk_clip(1, 32, 32, 8).unwrap();
    let frames: Vec<f32> = (0..4).flat_map(|_| one.data().iter().copied()).collect();
    let seq = Sequence::new(4, 32, 32, frames).unwrap();
    let noisy_frame = add_awgn(&one, NoiseModel::new(15.0, 2)).unwrap();
    let noisy = Sequence::new(
        4,
        32,
        32,
        (0..4).flat_map(|_| noisy_frame.data().iter().copied()).collect(),
    )
    .unwrap();
    assert_eq!(seq.frames(), 4);
    let cfg = EngineConfig {
        block: 8,
        ..EngineConfig::with_sigma(15.0)
    };
    let out = engine::denoise_sequence(&noisy, &cfg, None, None).unwrap();
    for t in 1..4 {
        assert_eq!(out.frame(t), out.frame(0));
    }
}

/// Frame `t` of a clip translating right by one pixel per frame.
fn translating(frames: usize, h: usize, w: usize) -> Sequence {
    let base = synth::desk_clip(1, h, w + frames, 9).unwrap();
    let mut data = Vec::with_capacity(frames * 3 * h * w);
    for t in 0..frames {
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    data.push(base.at(0, c, y, x + frames - t));
                }
            }
        }
    }
    Sequence::new(frames, h, w, data).unwrap()
}

fn write_translation_flows(dir: &std::path::Path, frames: usize, h: usize, w: usize) {
    for t in 0..frames {
        for k in 0..frames {
            // Content moves right one pixel per frame, so pixel x of frame t
            // sits at x + (k - t) in frame k.
            let u = k as f32 - t as f32;
            save_flow(&FlowField::uniform(h, w, u, 0.0), dir.join(format!("t{t}_n{k}.flo"))).unwrap();
        }
    }
}

#[test]
fn translation_flows_align_taps() {
    let (f, h, w) = (5, 24, 32);
    let seq = translating(f, h, w);
    let dir = tempdir().unwrap();
    write_translation_flows(dir.path(), f, h, w);
    let spec = WarpSpec::new(dir.path());
    let buf = build_buffer_mc(&seq, 2, 5, &spec).unwrap();
    let centre = seq.frame(2);
    for k in 0..5 {
        let tap = buf.tap(k);
        for c in 0..3 {
            for y in 0..h {
                // Interior: columns every tap can reach without clamping.
                for x in 2..w - 2 {
                    let i = (c * h + y) * w + x;
                    assert_eq!(tap[i], centre[i], "tap {k} c {c} y {y} x {x}");
                }
            }
        }
    }
}

#[test]
fn motion_compensated_zero_noise_identity() {
    let (f, h, w) = (5, 32, 32);
    let seq = translating(f, h, w);
    let dir = tempdir().unwrap();
    write_translation_flows(dir.path(), f, h, w);
    let cfg = EngineConfig {
        block: 8,
        flows: Some(dir.path().to_path_buf()),
        ..EngineConfig::with_sigma(0.0)
    };
    let out = engine::denoise_sequence(&seq, &cfg, None, None).unwrap();
    let err = out
        .data()
        .iter()
        .zip(seq.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    assert!(err < 1e-3, "{err}");
}

#[test]
fn static_zero_flow_matches_plain_buffer() {
    let seq = Sequence::new(3, 16, 16, (0..3 * 3 * 256).map(|i| (i % 97) as f32).collect()).unwrap();
    let dir = tempdir().unwrap();
    for t in 0..3 {
        for k in 0..3 {
            save_flow(
                &FlowField::uniform(16, 16, 0.0, 0.0),
                dir.path().join(format!("t{t}_n{k}.flo")),
            )
            .unwrap();
        }
    }
    let mc = build_buffer_mc(&seq, 1, 3, &WarpSpec::new(dir.path())).unwrap();
    let plain = engine::FrameBuffer::new(&seq, 1, 3).unwrap();
    for k in 0..3 {
        assert_eq!(mc.tap(k), plain.tap(k));
    }
}

#[test]
fn missing_flow_file() {
    let seq = Sequence::filled(5, 16, 16, 1.0).unwrap();
    let dir = tempdir().unwrap();
    let err = build_buffer_mc(&seq, 3, 5, &WarpSpec::new(dir.path())).unwrap_err();
    assert!(matches!(err, Error::MissingFlow(_)), "{err:?}");
    assert!(err.to_string().contains("t3_n1.flo"), "{err}");
}

#[test]
fn warp_is_linear() {
    let (h, w) = (12, 14);
    let f: Vec<f32> = (0..3 * h * w).map(|i| ((i * 13) % 29) as f32).collect();
    let g: Vec<f32> = (0..3 * h * w).map(|i| ((i * 7) % 31) as f32 - 10.0).collect();
    let vectors = (0..h * w)
        .map(|i| [((i % 5) as f32 - 2.0) * 0.37, ((i % 3) as f32 - 1.0) * 0.61])
        .collect();
    let flow = FlowField::new(h, w, vectors).unwrap();
    let (a, b) = (0.7f32, -1.3f32);
    let mix: Vec<f32> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
    let lhs = warp_frame(&mix, h, w, &flow).unwrap();
    let (wf, wg) = (
        warp_frame(&f, h, w, &flow).unwrap(),
        warp_frame(&g, h, w, &flow).unwrap(),
    );
    for i in 0..lhs.len() {
        assert!((lhs[i] - (a * wf[i] + b * wg[i])).abs() < 1e-4);
    }
}

#[test]
fn refined_random_net_runs_and_clamp_bounds_gains() {
    let clip = synth::desk_clip(3, 32, 32, 5).unwrap();
    let noisy = add_awgn(&clip, NoiseModel::new(20.0, 2)).unwrap();
    let bundle = nets::random_coring_bundle(CoringLayout::default(), 3).unwrap();
    let cfg = EngineConfig {
        block: 8,
        stride_div: 2,
        mode: Mode::Refined,
        clamp_refined: true,
        ..EngineConfig::with_sigma(20.0)
    };
    let out = engine::denoise_sequence(&noisy, &cfg, Some(&bundle), None).unwrap();
    assert!(out.data().iter().all(|v| v.is_finite()));
}

#[test]
fn tapered_borders_keep_identity_and_unity() {
    let clip = synth::desk_clip(3, 40, 48, 6).unwrap();
    let flat = Sequence::filled(3, 40, 48, 77.0).unwrap();
    for window in [WindowShape::Cosine, WindowShape::Gaussian] {
        let cfg = EngineConfig {
            block: 16,
            window,
            flat_borders: false,
            ..EngineConfig::with_sigma(0.0)
        };
        let out = engine::denoise_sequence(&clip, &cfg, None, None).unwrap();
        let err = out
            .data()
            .iter()
            .zip(clip.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(err < 1e-3, "{window} {err}");
        let noisy_cfg = EngineConfig {
            noise: NoiseSpec::Sigma(20.0),
            ..cfg
        };
        let out = engine::denoise_sequence(&flat, &noisy_cfg, None, None).unwrap();
        assert!(max_dev(&out, 77.0) < 1e-4);
    }
}

#[test]
fn flat_borders_beat_tapered_near_edges() {
    let clean = desk();
    let noisy = add_awgn(&clean, NoiseModel::new(20.0, 2)).unwrap();
    let run = |flat_borders| {
        let cfg = EngineConfig {
            window: WindowShape::Cosine,
            flat_borders,
            ..EngineConfig::with_sigma(20.0)
        };
        psnr(&clean, &engine::denoise_sequence(&noisy, &cfg, None, None).unwrap())
            .unwrap()
            .mean
    };
    let (flat, tapered) = (run(true), run(false));
    assert!(flat > tapered + 3.0, "flat {flat} tapered {tapered}");
}
