use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

use wiener4d::seqio::{read_sequence, write_sequence, RawDtype, SeqFormat};
use wiener4d::{synth, Sequence};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wiener4d"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_clip(path: &Path, seq: &Sequence) {
    write_sequence(seq, path, SeqFormat::Raw(RawDtype::U8)).unwrap();
}

#[test]
fn add_noise_is_reproducible() {
    let dir = tempdir().unwrap();
    let clean = dir.path().join("clean.v4ds");
    write_clip(&clean, &synth::desk_clip(2, 32, 32, 1).unwrap());
    let (a, b) = (dir.path().join("a.v4ds"), dir.path().join("b.v4ds"));
    for out in [&a, &b] {
        let o = bin(&[
            "add-noise",
            "--in",
            s(&clean),
            "--out",
            s(out),
            "--sigma",
            "20",
            "--seed",
            "7",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn denoise_reports_timing_and_writes_output() {
    let dir = tempdir().unwrap();
    let clean = dir.path().join("clean.v4ds");
    let noisy = dir.path().join("noisy.v4ds");
    let out = dir.path().join("out.v4ds");
    write_clip(&clean, &synth::desk_clip(3, 48, 48, 1).unwrap());
    assert!(
        bin(&["add-noise", "--in", s(&clean), "--out", s(&noisy), "--sigma", "20"])
            .status
            .success()
    );
    let o = bin(&[
        "denoise",
        "--in",
        s(&noisy),
        "--out",
        s(&out),
        "--sigma",
        "20",
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("frame ")).count(), 3);
    assert!(stdout.contains("total_s="));
    let seq = read_sequence(&out, SeqFormat::Raw(RawDtype::F32)).unwrap();
    assert_eq!((seq.frames(), seq.height(), seq.width()), (3, 48, 48));

    let m = bin(&["metrics", "--ref", s(&clean), "--test", s(&clean)]);
    assert!(m.status.success());
    let csv = String::from_utf8_lossy(&m.stdout);
    assert_eq!(csv.lines().next(), Some("frame,psnr_db,ssim"));
    assert!(csv.lines().any(|l| l == "mean,99.0000,1.000000"), "{csv}");
}

#[test]
fn exit_codes() {
    let dir = tempdir().unwrap();
    let a = dir.path().join("a.v4ds");
    let b = dir.path().join("b.v4ds");
    write_clip(&a, &Sequence::filled(1, 16, 16, 3.0).unwrap());
    write_clip(&b, &Sequence::filled(1, 16, 24, 3.0).unwrap());
    let out = dir.path().join("o.v4ds");

    let blind = bin(&["denoise", "--in", s(&a), "--out", s(&out), "--blind"]);
    assert_eq!(blind.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&blind.stderr).lines().count(), 1);
    let gt = bin(&["denoise", "--in", s(&a), "--out", s(&out), "--sigma", "5", "--dc", "gt"]);
    assert_eq!(gt.status.code(), Some(2));
    let bad_div = bin(&[
        "denoise",
        "--in",
        s(&a),
        "--out",
        s(&out),
        "--sigma",
        "5",
        "--stride-div",
        "9",
    ]);
    assert_eq!(bad_div.status.code(), Some(2));
    let missing = bin(&["denoise", "--in", "/nonexistent.v4ds", "--out", s(&out), "--sigma", "5"]);
    assert_eq!(missing.status.code(), Some(3));
    let mismatch = bin(&["metrics", "--ref", s(&a), "--test", s(&b)]);
    assert_eq!(mismatch.status.code(), Some(4));
    std::fs::write(&out, b"garbage").unwrap();
    let corrupt = bin(&["denoise", "--in", s(&out), "--out", s(&a), "--sigma", "5"]);
    assert_eq!(corrupt.status.code(), Some(4));
}

#[test]
fn sweep_csv_schema() {
    let o = bin(&[
        "sweep", "--axis", "stride", "--values", "2,3", "--sigma", "20", "--block", "8",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "axis,value,psnr_db,ssim,time_s");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("stride,2,"));
    assert_eq!(lines[2].split(',').count(), 5);
}

#[test]
fn bundle_and_refined_mode() {
    let dir = tempdir().unwrap();
    let bundle = dir.path().join("id.w4dw");
    let o = bin(&[
        "make-bundle",
        "--out",
        s(&bundle),
        "--coring",
        "identity",
        "--noise",
        "zero",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let clip = dir.path().join("c.v4ds");
    write_clip(&clip, &synth::desk_clip(2, 32, 32, 4).unwrap());
    let (classic, refined) = (dir.path().join("a.v4ds"), dir.path().join("b.v4ds"));
    let common = [
        "--in",
        s(&clip),
        "--sigma",
        "10",
        "--block",
        "8",
        "--weights",
        s(&bundle),
    ];
    assert!(bin(&[&["denoise", "--out", s(&classic)][..], &common].concat())
        .status
        .success());
    assert!(
        bin(&[&["denoise", "--out", s(&refined), "--mode", "refined"][..], &common].concat())
            .status
            .success()
    );
    let a = read_sequence(&classic, SeqFormat::Raw(RawDtype::F32)).unwrap();
    let b = read_sequence(&refined, SeqFormat::Raw(RawDtype::F32)).unwrap();
    let err = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f32, f32::max);
    assert!(err < 1e-3, "{err}");
}

#[test]
fn synth_png_output() {
    let dir = tempdir().unwrap();
    let frames = dir.path().join("frames");
    assert!(bin(&[
        "synth",
        "--out",
        s(&frames),
        "--frames",
        "2",
        "--height",
        "16",
        "--width",
        "16"
    ])
    .status
    .success());
    assert_eq!(std::fs::read_dir(&frames).unwrap().count(), 2);
    let seq = read_sequence(&frames, SeqFormat::PngDir).unwrap();
    assert_eq!(seq, synth::desk_clip(2, 16, 16, 0).unwrap());
}
