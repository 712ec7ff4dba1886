//! Middlebury `.flo` optical-flow files.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const FLOW_SENTINEL: f32 = 202021.25;

/// Per-pixel displacement `(u, v)`: the pixel at `(x, y)` in the target frame
/// corresponds to `(x + u, y + v)` in the neighbour.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    vectors: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn new(height: usize, width: usize, vectors: Vec<[f32; 2]>) -> Result<Self> {
        if vectors.len() != height * width {
            return Err(Error::DimMismatch(format!(
                "{} flow vectors for a {width}x{height} field",
                vectors.len()
            )));
        }
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite flow vector".into()));
        }
        Ok(Self { height, width, vectors })
    }

    pub fn uniform(height: usize, width: usize, u: f32, v: f32) -> Self {
        Self {
            height,
            width,
            vectors: vec![[u, v]; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn vectors(&self) -> &[[f32; 2]] {
        &self.vectors
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> [f32; 2] {
        self.vectors[y * self.width + x]
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 12 {
        return Err(Error::Truncated {
            what: "flow header",
            expected: 12,
            found: bytes.len(),
        });
    }
    let sentinel = f32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if sentinel != FLOW_SENTINEL {
        return Err(Error::BadMagic { expected: "202021.25" });
    }
    let width = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if width <= 0 || height <= 0 {
        return Err(Error::Format(format!("invalid flow dims {width}x{height}")));
    }
    let (w, h) = (width as usize, height as usize);
    let expected = w * h * 8;
    let payload = &bytes[12..];
    if payload.len() < expected {
        return Err(Error::Truncated {
            what: "flow payload",
            expected,
            found: payload.len(),
        });
    }
    let vectors = payload[..expected]
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes(c[0..4].try_into().unwrap()),
                f32::from_le_bytes(c[4..8].try_into().unwrap()),
            ]
        })
        .collect();
    FlowField::new(h, w, vectors)
}

pub(crate) fn encode(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + flow.vectors.len() * 8);
    out.extend_from_slice(&FLOW_SENTINEL.to_le_bytes());
    out.extend_from_slice(&(flow.width as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height as i32).to_le_bytes());
    for [u, v] in &flow.vectors {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn load_flow(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFlow(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn save_flow(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(flow)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(w: i32, h: i32, vals: &[f32]) -> Vec<u8> {
        let mut b = FLOW_SENTINEL.to_le_bytes().to_vec();
        b.extend_from_slice(&w.to_le_bytes());
        b.extend_from_slice(&h.to_le_bytes());
        for v in vals {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn parses_two_by_one() {
        let flow = decode(&file(2, 1, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!((flow.width(), flow.height()), (2, 1));
        assert_eq!(flow.vectors(), &[[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn zero_sentinel_rejected() {
        let mut b = file(2, 1, &[0.0; 4]);
        b[0..4].copy_from_slice(&0.0f32.to_le_bytes());
        assert!(matches!(decode(&b), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn all_zero_field() {
        let flow = decode(&file(4, 4, &[0.0; 32])).unwrap();
        assert!(flow.vectors().iter().all(|v| *v == [0.0, 0.0]));
    }

    #[test]
    fn truncated_payload() {
        assert!(matches!(decode(&file(4, 4, &[0.0; 31])), Err(Error::Truncated { .. })));
    }

    #[test]
    fn roundtrip() {
        let flow = FlowField::new(2, 3, (0..6).map(|i| [i as f32, -0.5 * i as f32]).collect()).unwrap();
        assert_eq!(decode(&encode(&flow)).unwrap(), flow);
    }
}
