//! Box-filter spatial downsampling.

use crate::error::{Error, Result};
use crate::video::Frame;

/// Integer downsampling factor applied to both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScaleFactor(u8);

impl ScaleFactor {
    pub const IDENTITY: ScaleFactor = ScaleFactor(1);

    pub fn new(factor: u8) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidArgument(
                "scale factor must be at least 1".into(),
            ));
        }
        Ok(ScaleFactor(factor))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Output size along one axis: `ceil(len / factor)`.
    pub fn reduced(self, len: u32) -> u32 {
        len.div_ceil(self.0 as u32)
    }
}

impl Default for ScaleFactor {
    fn default() -> Self {
        ScaleFactor(8)
    }
}

impl std::fmt::Display for ScaleFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Averages each `s`x`s` block per channel, rounding half up.
///
/// Sizes that are not multiples of `s` are padded by replicating the last
/// row/column. All arithmetic is integer.
pub fn downsample(frame: &Frame, scale: ScaleFactor) -> Frame {
    let s = scale.get() as u32;
    if s == 1 {
        return frame.clone();
    }
    let (w, h) = (frame.width(), frame.height());
    let (ow, oh) = (scale.reduced(w), scale.reduced(h));
    let n = s * s;
    let src = frame.as_bytes();
    let mut out = Vec::with_capacity(ow as usize * oh as usize * 3);
    for by in 0..oh {
        for bx in 0..ow {
            let mut acc = [0u32; 3];
            for dy in 0..s {
                let y = (by * s + dy).min(h - 1) as usize;
                for dx in 0..s {
                    let x = (bx * s + dx).min(w - 1) as usize;
                    let i = (y * w as usize + x) * 3;
                    acc[0] += src[i] as u32;
                    acc[1] += src[i + 1] as u32;
                    acc[2] += src[i + 2] as u32;
                }
            }
            out.extend(acc.iter().map(|&a| ((2 * a + n) / (2 * n)) as u8));
        }
    }
    Frame::new(ow, oh, out).expect("output buffer sized from its dimensions")
}
