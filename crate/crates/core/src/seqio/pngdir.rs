use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Rgb};

use super::{quantize_u8, Sequence, CHANNELS};
use crate::error::{Error, Result};

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub(super) fn read(dir: &Path) -> Result<Sequence> {
    let files = png_files(dir)?;
    if files.is_empty() {
        return Err(Error::EmptySequence(dir.to_path_buf()));
    }
    let mut dims: Option<(usize, usize)> = None;
    let mut data = Vec::new();
    for (index, file) in files.iter().enumerate() {
        let img = image::open(file)?.to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        match dims {
            None => dims = Some((w, h)),
            Some((want_w, want_h)) if (want_w, want_h) != (w, h) => {
                return Err(Error::FrameSizeMismatch {
                    index,
                    want_w,
                    want_h,
                    got_w: w,
                    got_h: h,
                })
            }
            Some(_) => {}
        }
        let start = data.len();
        data.resize(start + CHANNELS * w * h, 0.0f32);
        let frame = &mut data[start..];
        for (i, px) in img.pixels().enumerate() {
            for c in 0..CHANNELS {
                frame[c * w * h + i] = f32::from(px.0[c]);
            }
        }
    }
    let (w, h) = dims.unwrap();
    Sequence::new(files.len(), h, w, data)
}

pub(super) fn write(seq: &Sequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (h, w) = (seq.height(), seq.width());
    for t in 0..seq.frames() {
        let frame = seq.frame(t);
        let img = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
            let i = y as usize * w + x as usize;
            Rgb([
                quantize_u8(frame[i]),
                quantize_u8(frame[h * w + i]),
                quantize_u8(frame[2 * h * w + i]),
            ])
        });
        let path = dir.join(format!("frame_{t:05}.png"));
        img.save(&path)?;
    }
    Ok(())
}
