//! 4-D (time × channel × 2-D space) Wiener video denoising with optional
//! net-refined coring, blind noise estimation, multi-scale averaging and
//! motion compensation.

pub mod cli;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod mocomp;
pub mod nets;
pub mod noise;
pub mod seqio;
pub mod spectral;
pub mod synth;
pub mod tensor;
pub mod windows;

pub use engine::{denoise_baseline3d, denoise_multiscale, denoise_sequence, Denoiser, EngineConfig, Mode, NoiseSpec};
pub use error::{Error, ErrorKind, Result};
pub use metrics::{psnr, ssim, Score};
pub use noise::{add_awgn, NoiseModel};
pub use seqio::{read_sequence, write_sequence, SeqFormat, Sequence, WeightBundle};
pub use spectral::DcMode;
pub use windows::WindowShape;
