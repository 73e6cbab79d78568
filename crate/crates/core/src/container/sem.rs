//! SEM interchange file: decoded soft edge maps plus palette, uncompressed.
//!
//! ```text
//! "SEM1" | width:u16 | height:u16 | k:u8 | effective_count:u8 | palette
//! | frame_count:u32 | per frame: frame_index:u32 | is_key:u8 | W*H labels
//! ```

use super::codec::{DecodedSev, IndexedMap};
use crate::entropy::{decode_k, encode_k};
use crate::error::{Error, Result};
use crate::soft_edge::{Codebook, SoftEdgeMap};

pub const SEM_MAGIC: &[u8; 4] = b"SEM1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemFile {
    pub width: u32,
    pub height: u32,
    pub codebook: Codebook,
    pub frames: Vec<IndexedMap>,
}

impl SemFile {
    pub fn from_decoded(dec: &DecodedSev) -> Self {
        let (width, height) = dec.header.map_dimensions();
        SemFile {
            width,
            height,
            codebook: dec.codebook.clone(),
            frames: dec.maps.clone(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let w = u16::try_from(self.width)
            .map_err(|_| Error::InvalidArgument(format!("SEM width {} too large", self.width)))?;
        let h = u16::try_from(self.height)
            .map_err(|_| Error::InvalidArgument(format!("SEM height {} too large", self.height)))?;
        let plane = self.width as usize * self.height as usize;
        let mut out = Vec::with_capacity(20 + self.frames.len() * (5 + plane));
        out.extend_from_slice(SEM_MAGIC);
        out.extend_from_slice(&w.to_le_bytes());
        out.extend_from_slice(&h.to_le_bytes());
        out.push(encode_k(self.codebook.k()));
        out.push(self.codebook.effective_count() as u8);
        for c in self.codebook.centroids() {
            out.extend_from_slice(c);
        }
        out.extend_from_slice(&(self.frames.len() as u32).to_le_bytes());
        for f in &self.frames {
            if (f.map.width(), f.map.height(), f.map.k())
                != (self.width, self.height, self.codebook.k())
            {
                return Err(Error::Inconsistent(format!(
                    "map for frame {} does not match the SEM dimensions",
                    f.index
                )));
            }
            out.extend_from_slice(&(f.index as u32).to_le_bytes());
            out.push(f.is_key as u8);
            out.extend_from_slice(f.map.labels());
        }
        Ok(out)
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(|| {
                Error::corrupt("truncated", format!("SEM ends before byte {}", pos + n))
            })?;
            pos += n;
            Ok(s)
        };
        if take(4)? != SEM_MAGIC {
            return Err(Error::UnsupportedFormat("not a SEM1 file".into()));
        }
        let width = u16::from_le_bytes(take(2)?.try_into().unwrap()) as u32;
        let height = u16::from_le_bytes(take(2)?.try_into().unwrap()) as u32;
        let k = decode_k(take(1)?[0]);
        let eff = take(1)?[0] as usize;
        let palette = take(eff * 3)?
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        let codebook = Codebook::new(k, palette)?;
        let count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let plane = width as usize * height as usize;
        let mut frames = Vec::with_capacity(count.min(bytes.len() / (5 + plane).max(1)));
        for _ in 0..count {
            let index = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let is_key = match take(1)?[0] {
                0 => false,
                1 => true,
                b => return Err(Error::corrupt("is_key", format!("flag byte {b}"))),
            };
            let map = SoftEdgeMap::new(width, height, k, take(plane)?.to_vec())?;
            frames.push(IndexedMap { index, is_key, map });
        }
        if pos != bytes.len() {
            return Err(Error::corrupt(
                "trailing",
                format!("{} bytes after the last frame", bytes.len() - pos),
            ));
        }
        Ok(SemFile {
            width,
            height,
            codebook,
            frames,
        })
    }
}
