//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 format.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::engine::{self, EngineConfig, Mode, NoiseSpec};
use crate::error::{Error, ErrorKind, Result};
use crate::metrics::{psnr, ssim};
use crate::nets::{self, CoringLayout};
use crate::noise::{add_awgn, NoiseModel};
use crate::seqio::{
    load_weights, read_sequence, save_weights, write_sequence, RawDtype, SeqFormat, Sequence, WeightBundle,
};
use crate::spectral::DcMode;
use crate::synth::desk_clip;
use crate::windows::{block_count, WindowShape};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_FORMAT: i32 = 4;

/// Header of the sweep CSV.
pub const SWEEP_HEADER: &str = "axis,value,psnr_db,ssim,time_s";
/// Header of the metrics CSV.
pub const METRICS_HEADER: &str = "frame,psnr_db,ssim";

#[derive(Debug, Parser)]
#[command(name = "wiener4d", version, about = "4-D Wiener video denoiser")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Denoise a sequence.
    Denoise(DenoiseArgs),
    /// Add seeded Gaussian noise to a sequence.
    AddNoise(AddNoiseArgs),
    /// Per-frame PSNR and SSIM as CSV.
    Metrics(MetricsArgs),
    /// Ablation sweep over one engine parameter, CSV on stdout.
    Sweep(SweepArgs),
    /// Write the deterministic synthetic desk clip.
    Synth(SynthArgs),
    /// Write a constructed weight bundle (identity, zero or random nets).
    MakeBundle(MakeBundleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dtype {
    U8,
    F32,
}

impl From<Dtype> for RawDtype {
    fn from(d: Dtype) -> Self {
        match d {
            Dtype::U8 => RawDtype::U8,
            Dtype::F32 => RawDtype::F32,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    /// Block edge B (power of two).
    #[arg(long, default_value_t = 16)]
    pub block: usize,
    /// Stride divisor d in [2, 8]; stride = B / d.
    #[arg(long, default_value_t = 3)]
    pub stride_div: usize,
    /// Temporal taps (odd).
    #[arg(long, default_value_t = 5)]
    pub taps: usize,
    /// cosine, gaussian or trained.
    #[arg(long, default_value = "gaussian")]
    pub window: WindowShape,
    /// Gaussian window decay.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Taper windows toward the frame edge like everywhere else.
    #[arg(long)]
    pub tapered_borders: bool,
    /// mean, median or gt.
    #[arg(long, default_value = "median")]
    pub dc: DcMode,
    /// classic or refined.
    #[arg(long, default_value = "classic")]
    pub mode: Mode,
    /// Clamp refined gains to [0, 1].
    #[arg(long)]
    pub clamp_refined: bool,
    /// Comma-separated block sizes for multi-scale averaging.
    #[arg(long, value_delimiter = ',')]
    pub scales: Vec<usize>,
    /// Comma-separated per-scale weights summing to 1.
    #[arg(long, value_delimiter = ',')]
    pub scale_weights: Option<Vec<f64>>,
    /// Directory of t{t}_n{k}.flo flow files.
    #[arg(long)]
    pub flows: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub threads: Option<usize>,
    /// W4DW weight bundle.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

impl EngineArgs {
    fn config(&self, noise: NoiseSpec) -> EngineConfig {
        EngineConfig {
            block: self.block,
            stride_div: self.stride_div,
            taps: self.taps,
            window: self.window,
            alpha: self.alpha,
            flat_borders: !self.tapered_borders,
            dc: self.dc,
            noise,
            mode: self.mode,
            clamp_refined: self.clamp_refined,
            scales: self.scales.clone(),
            scale_weights: self.scale_weights.clone(),
            flows: self.flows.clone(),
            threads: self.threads,
        }
    }

    fn bundle(&self) -> Result<Option<WeightBundle>> {
        self.weights.as_ref().map(load_weights).transpose()
    }
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Noise STD on the 8-bit scale.
    #[arg(long, conflicts_with = "blind", required_unless_present = "blind")]
    pub sigma: Option<f64>,
    /// Estimate the noise with the bundled noise net.
    #[arg(long)]
    pub blind: bool,
    /// Clean reference, needed for --dc gt.
    #[arg(long)]
    pub clean: Option<PathBuf>,
    /// Grayscale 3-D baseline instead of the 4-D filter.
    #[arg(long)]
    pub baseline3d: bool,
    /// Element type when writing a raw file.
    #[arg(long, value_enum, default_value = "f32")]
    pub out_dtype: Dtype,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct AddNoiseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep values outside [0, 255].
    #[arg(long)]
    pub no_clip: bool,
    #[arg(long, value_enum, default_value = "f32")]
    pub out_dtype: Dtype,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    Stride,
    Blocksize,
    Dc,
    Window,
    ScaleWeights,
}

impl SweepAxis {
    fn name(self) -> &'static str {
        match self {
            SweepAxis::Stride => "stride",
            SweepAxis::Blocksize => "blocksize",
            SweepAxis::Dc => "dc",
            SweepAxis::Window => "window",
            SweepAxis::ScaleWeights => "scale-weights",
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Values for the axis; scale-weights entries are colon-separated
    /// weight lists, e.g. `0.5:0.5`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    /// Clean sequence; the synthetic desk clip when omitted.
    #[arg(long)]
    pub clean: Option<PathBuf>,
    #[arg(long, default_value_t = 20.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub no_clip: bool,
    /// Runs per value; the reported time is the fastest.
    #[arg(long, default_value_t = 1)]
    pub repetitions: usize,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub frames: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "u8")]
    pub out_dtype: Dtype,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BundleKind {
    Identity,
    Zero,
    Random,
}

#[derive(Debug, Args)]
pub struct MakeBundleArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Coring net flavour.
    #[arg(long, value_enum, default_value = "identity")]
    pub coring: BundleKind,
    /// Noise net flavour; omitted from the bundle when unset.
    #[arg(long, value_enum)]
    pub noise: Option<BundleKind>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Usage => EXIT_USAGE,
        ErrorKind::Io => EXIT_IO,
        ErrorKind::Format => EXIT_FORMAT,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind())
        }
    }
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Denoise(a) => cmd_denoise(&a),
        Command::AddNoise(a) => cmd_add_noise(&a),
        Command::Metrics(a) => cmd_metrics(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::MakeBundle(a) => cmd_make_bundle(&a),
    }
}

fn read(path: &Path) -> Result<Sequence> {
    read_sequence(path, SeqFormat::guess(path, RawDtype::F32))
}

fn write(seq: &Sequence, path: &Path, dtype: Dtype) -> Result<()> {
    write_sequence(seq, path, SeqFormat::guess(path, dtype.into()))
}

fn emit(csv: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, csv).map_err(|e| Error::io(p, e)),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

pub fn cmd_denoise(a: &DenoiseArgs) -> Result<()> {
    if a.blind && a.engine.weights.is_none() {
        return Err(Error::Config("--blind needs --weights".into()));
    }
    if a.engine.dc == DcMode::GroundTruth && a.clean.is_none() {
        return Err(Error::Config("--dc gt needs --clean".into()));
    }
    if a.engine.mode == Mode::Refined && a.engine.weights.is_none() {
        return Err(Error::Config("--mode refined needs --weights".into()));
    }
    if a.engine.window == WindowShape::Trained && a.engine.weights.is_none() {
        return Err(Error::Config("--window trained needs --weights".into()));
    }
    if !a.engine.scales.is_empty() && a.engine.scales.len() < 2 {
        return Err(Error::Config("--scales needs at least two block sizes".into()));
    }
    let noise = match a.sigma {
        Some(s) => NoiseSpec::Sigma(s),
        None => NoiseSpec::Blind,
    };
    let cfg = a.engine.config(noise);
    cfg.validate()?;
    let bundle = a.engine.bundle()?;
    let seq = read(&a.input)?;
    let clean = a.clean.as_deref().map(read).transpose()?;

    if a.baseline3d {
        let start = Instant::now();
        let out = engine::denoise_baseline3d(&seq, &cfg)?;
        let total = start.elapsed();
        write(&out, &a.out, a.out_dtype)?;
        println!("baseline3d frames={} total_s={:.6}", seq.frames(), total.as_secs_f64());
        return Ok(());
    }

    let res = engine::run(&seq, &cfg, bundle.as_ref(), clean.as_ref())?;
    write(&res.sequence, &a.out, a.out_dtype)?;
    for (t, d) in res.frame_times.iter().enumerate() {
        println!("frame {t} time_s={:.6}", d.as_secs_f64());
    }
    println!(
        "frames={} blocks_per_frame={} total_s={:.6}",
        seq.frames(),
        res.blocks_per_frame,
        res.total.as_secs_f64()
    );
    Ok(())
}

pub fn cmd_add_noise(a: &AddNoiseArgs) -> Result<()> {
    let seq = read(&a.input)?;
    let model = NoiseModel {
        sigma: a.sigma,
        seed: a.seed,
        clip: !a.no_clip,
    };
    write(&add_awgn(&seq, model)?, &a.out, a.out_dtype)
}

pub fn metrics_csv(reference: &Sequence, test: &Sequence) -> Result<String> {
    let p = psnr(reference, test)?;
    let s = ssim(reference, test)?;
    let mut csv = format!("{METRICS_HEADER}\n");
    for (t, (pv, sv)) in p.per_frame.iter().zip(&s.per_frame).enumerate() {
        let _ = writeln!(csv, "{t},{pv:.4},{sv:.6}");
    }
    let _ = writeln!(csv, "mean,{:.4},{:.6}", p.mean, s.mean);
    Ok(csv)
}

pub fn cmd_metrics(a: &MetricsArgs) -> Result<()> {
    let r = read(&a.reference)?;
    let t = read(&a.test)?;
    emit(&metrics_csv(&r, &t)?, a.out.as_deref())
}

/// One sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: &'static str,
    pub value: String,
    pub psnr_db: f64,
    pub ssim: f64,
    pub time_s: f64,
    pub blocks_per_frame: usize,
}

/// Axis, values and fixed settings for an ablation sweep.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub axis: SweepAxis,
    pub values: Vec<String>,
    pub base: EngineConfig,
    pub sigma: f64,
    pub seed: u64,
    pub clip: bool,
    pub repetitions: usize,
}

impl SweepPlan {
    fn config_for(&self, value: &str) -> Result<EngineConfig> {
        let bad = |e: std::num::ParseIntError| Error::Config(format!("bad {} value {value:?}: {e}", self.axis.name()));
        let mut cfg = self.base.clone();
        cfg.noise = NoiseSpec::Sigma(self.sigma);
        match self.axis {
            SweepAxis::Stride => cfg.stride_div = value.parse().map_err(bad)?,
            SweepAxis::Blocksize => cfg.block = value.parse().map_err(bad)?,
            SweepAxis::Dc => cfg.dc = value.parse()?,
            SweepAxis::Window => cfg.window = value.parse()?,
            SweepAxis::ScaleWeights => {
                let w = value
                    .split(':')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Config(format!("bad scale weights {value:?}: {e}")))?;
                cfg.scale_weights = Some(w);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs the sweep on `clean` with seeded noise.
pub fn run_sweep(plan: &SweepPlan, clean: &Sequence, bundle: Option<&WeightBundle>) -> Result<Vec<SweepRow>> {
    if plan.values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let model = NoiseModel {
        sigma: plan.sigma,
        seed: plan.seed,
        clip: plan.clip,
    };
    let noisy = add_awgn(clean, model)?;
    let mut rows = Vec::with_capacity(plan.values.len());
    for value in &plan.values {
        let cfg = plan.config_for(value)?;
        let gt = (cfg.dc == DcMode::GroundTruth).then_some(clean);
        let mut best = f64::INFINITY;
        let mut out = None;
        for _ in 0..plan.repetitions.max(1) {
            let start = Instant::now();
            let res = engine::run(&noisy, &cfg, bundle, gt)?;
            best = best.min(start.elapsed().as_secs_f64());
            out = Some(res);
        }
        let res = out.expect("at least one repetition");
        let blocks = if cfg.is_multiscale() {
            res.blocks_per_frame
        } else {
            block_count(clean.height(), clean.width(), cfg.block, cfg.stride())
        };
        rows.push(SweepRow {
            axis: plan.axis.name(),
            value: value.clone(),
            psnr_db: psnr(clean, &res.sequence)?.mean,
            ssim: ssim(clean, &res.sequence)?.mean,
            time_s: best,
            blocks_per_frame: blocks,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut csv = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{:.4},{:.6},{:.6}",
            r.axis, r.value, r.psnr_db, r.ssim, r.time_s
        );
    }
    csv
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let clean = match &a.clean {
        Some(p) => read(p)?,
        None => desk_clip(10, 128, 128, a.seed)?,
    };
    let plan = SweepPlan {
        axis: a.axis,
        values: a.values.clone(),
        base: a.engine.config(NoiseSpec::Sigma(a.sigma)),
        sigma: a.sigma,
        seed: a.seed,
        clip: !a.no_clip,
        repetitions: a.repetitions,
    };
    let bundle = a.engine.bundle()?;
    let rows = run_sweep(&plan, &clean, bundle.as_ref())?;
    emit(&sweep_csv(&rows), a.out.as_deref())
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    write(&desk_clip(a.frames, a.height, a.width, a.seed)?, &a.out, a.out_dtype)
}

pub fn cmd_make_bundle(a: &MakeBundleArgs) -> Result<()> {
    let layout = CoringLayout::default();
    let mut bundle = match a.coring {
        BundleKind::Identity => nets::identity_coring_bundle(layout)?,
        BundleKind::Zero => nets::zero_coring_bundle(layout)?,
        BundleKind::Random => nets::random_coring_bundle(layout, a.seed)?,
    };
    if let Some(kind) = a.noise {
        let noise = match kind {
            BundleKind::Identity | BundleKind::Zero => nets::zero_noise_bundle()?,
            BundleKind::Random => nets::random_noise_bundle(a.seed)?,
        };
        bundle.merge(&noise)?;
    }
    save_weights(&bundle, &a.out)
}
