//! SEV bitstream layout.
//!
//! ```text
//! "SEVC" | version:u8 | width:u16 | height:u16 | fps_num:u32 | fps_den:u32
//! | frame_count:u32 | scale:u8 | k:u8 | effective_count:u8 | kmeans_seed:u64
//! | canny_low:u8 | canny_high:u8 | key_codec_id:u8 | key_frame_count:u32
//! | key index deltas (LEB128) | palette (effective_count x RGB)
//! | key_payload_len:u32 | key payload | one chunk per non-empty GOP
//! ```
//!
//! All integers are little-endian. `k = 256` is written as 0. The number of
//! chunks is implied by the key indices: every key frame followed by at
//! least one G-frame opens a GOP.

use serde::Serialize;

use crate::entropy::{decode_k, encode_k, CompressedChunk};
use crate::error::{Error, Result};
use crate::soft_edge::{CannyThresholds, Codebook};
use crate::video::{gop_ranges, Rational};

pub const MAGIC: &[u8; 4] = b"SEVC";
pub const VERSION: u8 = 1;

/// Identifies the first-stage codec that produced the key payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyCodecId {
    /// Per-frame PNG blobs.
    RawPng = 0,
    /// Opaque bitstream from an external H.264 encoder.
    ExternalH264 = 1,
}

impl KeyCodecId {
    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(KeyCodecId::RawPng),
            1 => Ok(KeyCodecId::ExternalH264),
            other => Err(Error::UnsupportedFormat(format!(
                "unknown key codec id {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SevHeader {
    pub version: u8,
    /// Original frame size.
    pub width: u16,
    pub height: u16,
    pub fps: Rational,
    pub frame_count: u32,
    pub scale: u8,
    pub k: u16,
    pub kmeans_seed: u64,
    pub canny_low: u8,
    pub canny_high: u8,
    pub key_codec: KeyCodecId,
    pub key_indices: Vec<u32>,
    pub palette: Vec<[u8; 3]>,
}

impl SevHeader {
    pub fn key_frame_count(&self) -> usize {
        self.key_indices.len()
    }

    pub fn effective_count(&self) -> usize {
        self.palette.len()
    }

    /// Soft edge map size: the frame size divided by `scale`, rounded up.
    pub fn map_dimensions(&self) -> (u32, u32) {
        let s = self.scale as u32;
        (
            (self.width as u32).div_ceil(s),
            (self.height as u32).div_ceil(s),
        )
    }

    pub fn thresholds(&self) -> Result<CannyThresholds> {
        CannyThresholds::new(self.canny_low, self.canny_high)
    }

    pub fn codebook(&self) -> Result<Codebook> {
        Codebook::new(self.k, self.palette.clone())
    }

    pub fn key_indices_usize(&self) -> Vec<usize> {
        self.key_indices.iter().map(|&i| i as usize).collect()
    }

    /// G-frame index ranges, one per chunk.
    pub fn gops(&self) -> Vec<std::ops::Range<usize>> {
        gop_ranges(&self.key_indices_usize(), self.frame_count as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Inconsistent(m));
        if self.version != VERSION {
            return Err(Error::UnsupportedFormat(format!(
                "unsupported version {}",
                self.version
            )));
        }
        if self.width == 0 || self.height == 0 {
            return bad(format!(
                "frame size {}x{} is empty",
                self.width, self.height
            ));
        }
        if self.fps.num == 0 || self.fps.den == 0 {
            return bad("frame rate must be positive".into());
        }
        if self.frame_count == 0 {
            return bad("frame count is zero".into());
        }
        if self.scale == 0 {
            return bad("scale is zero".into());
        }
        self.thresholds()?;
        self.codebook()?;
        match self.key_indices.first() {
            Some(0) => {}
            Some(i) => return bad(format!("first key index is {i}, must be 0")),
            None => return bad("no key frames".into()),
        }
        if self.key_indices.windows(2).any(|w| w[0] >= w[1]) {
            return bad("key indices are not strictly increasing".into());
        }
        if let Some(&last) = self.key_indices.last() {
            if last >= self.frame_count {
                return bad(format!(
                    "key index {last} beyond frame count {}",
                    self.frame_count
                ));
            }
        }
        Ok(())
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        out.push(self.version);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.fps.num.to_le_bytes());
        out.extend_from_slice(&self.fps.den.to_le_bytes());
        out.extend_from_slice(&self.frame_count.to_le_bytes());
        out.push(self.scale);
        out.push(encode_k(self.k));
        out.push(self.palette.len() as u8);
        out.extend_from_slice(&self.kmeans_seed.to_le_bytes());
        out.push(self.canny_low);
        out.push(self.canny_high);
        out.push(self.key_codec as u8);
        out.extend_from_slice(&(self.key_indices.len() as u32).to_le_bytes());
        let mut prev = 0u32;
        for &i in &self.key_indices {
            write_varint(out, (i - prev) as u64);
            prev = i;
        }
        for c in &self.palette {
            out.extend_from_slice(c);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out);
        out
    }

    fn read(r: &mut Reader<'_>) -> Result<Self> {
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(Error::UnsupportedFormat(format!(
                "bad magic {:?}, expected \"SEVC\"",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::UnsupportedFormat(format!(
                "unsupported version {version}"
            )));
        }
        let width = r.u16()?;
        let height = r.u16()?;
        let fps = Rational {
            num: r.u32()?,
            den: r.u32()?,
        };
        let frame_count = r.u32()?;
        let scale = r.u8()?;
        let k = decode_k(r.u8()?);
        let effective = r.u8()? as usize;
        let kmeans_seed = r.u64()?;
        let canny_low = r.u8()?;
        let canny_high = r.u8()?;
        let key_codec = KeyCodecId::from_byte(r.u8()?)?;
        let key_count = r.u32()? as usize;
        if key_count as u64 > frame_count as u64 {
            return Err(Error::Inconsistent(format!(
                "{key_count} key frames declared for {frame_count} frames"
            )));
        }
        let mut key_indices = Vec::with_capacity(key_count);
        let mut prev = 0u64;
        for n in 0..key_count {
            let delta = r.varint()?;
            if n > 0 && delta == 0 {
                return Err(Error::Inconsistent(
                    "key indices are not strictly increasing".into(),
                ));
            }
            prev += delta;
            let idx = u32::try_from(prev)
                .map_err(|_| Error::Inconsistent("key index overflows".into()))?;
            key_indices.push(idx);
        }
        let mut palette = Vec::with_capacity(effective);
        for _ in 0..effective {
            let c = r.take(3)?;
            palette.push([c[0], c[1], c[2]]);
        }
        let header = SevHeader {
            version,
            width,
            height,
            fps,
            frame_count,
            scale,
            k,
            kmeans_seed,
            canny_low,
            canny_high,
            key_codec,
            key_indices,
            palette,
        };
        header.validate()?;
        Ok(header)
    }
}

/// A complete SEV stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SevFile {
    pub header: SevHeader,
    pub key_payload: Vec<u8>,
    pub chunks: Vec<CompressedChunk>,
}

/// Byte counts of each section of a serialized file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SectionSizes {
    pub header: usize,
    /// Key payload including its 4-byte length prefix.
    pub key: usize,
    pub chunks: usize,
}

impl SectionSizes {
    pub fn total(&self) -> usize {
        self.header + self.key + self.chunks
    }
}

impl SevFile {
    pub fn section_sizes(&self) -> SectionSizes {
        SectionSizes {
            header: self.header.to_bytes().len(),
            key: 4 + self.key_payload.len(),
            chunks: self.chunks.iter().map(CompressedChunk::byte_len).sum(),
        }
    }
}

pub fn serialize_container(file: &SevFile) -> Vec<u8> {
    let mut out = Vec::with_capacity(file.section_sizes().total());
    file.header.write_to(&mut out);
    out.extend_from_slice(&(file.key_payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&file.key_payload);
    for c in &file.chunks {
        c.write_to(&mut out);
    }
    out
}

pub fn parse_container(bytes: &[u8]) -> Result<SevFile> {
    let mut r = Reader { bytes, pos: 0 };
    let header = SevHeader::read(&mut r)?;
    let key_len = r.u32()? as usize;
    let key_payload = r.take(key_len)?.to_vec();
    let (mw, mh) = header.map_dimensions();
    let gops = header.gops();
    let mut chunks = Vec::with_capacity(gops.len());
    for (g, range) in gops.iter().enumerate() {
        let wrap = |e: Error| Error::CorruptChunk {
            gop: g,
            source: Box::new(e),
        };
        let (chunk, used) = CompressedChunk::parse(&bytes[r.pos..], mw, mh).map_err(wrap)?;
        r.pos += used;
        if chunk.frame_count() as usize != range.len() {
            return Err(wrap(Error::corrupt(
                "length",
                format!(
                    "chunk holds {} frames, GOP spans {}",
                    chunk.frame_count(),
                    range.len()
                ),
            )));
        }
        if chunk.k() != header.k {
            return Err(wrap(Error::corrupt(
                "label table",
                format!(
                    "chunk alphabet {} differs from header k {}",
                    chunk.k(),
                    header.k
                ),
            )));
        }
        chunks.push(chunk);
    }
    if r.pos != bytes.len() {
        return Err(Error::corrupt(
            "trailing data",
            format!("{} bytes after the last chunk", bytes.len() - r.pos),
        ));
    }
    Ok(SevFile {
        header,
        key_payload,
        chunks,
    })
}

fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7F) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::corrupt(
                "truncated",
                format!(
                    "need {n} bytes at offset {}, only {} remain",
                    self.pos,
                    self.bytes.len() - self.pos
                ),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn varint(&mut self) -> Result<u64> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.u8()?;
            v |= ((b & 0x7F) as u64) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(Error::corrupt("varint", "varint longer than 64 bits"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::compress_chunk;
    use crate::soft_edge::SoftEdgeMap;

    fn minimal_header() -> SevHeader {
        SevHeader {
            version: 1,
            width: 2,
            height: 2,
            fps: Rational::new(25, 1).unwrap(),
            frame_count: 1,
            scale: 8,
            k: 8,
            kmeans_seed: 7,
            canny_low: 50,
            canny_high: 150,
            key_codec: KeyCodecId::RawPng,
            key_indices: vec![0],
            palette: vec![],
        }
    }

    /// Hand-assembled bytes of a one-frame file with a 3-byte key payload.
    fn golden_minimal() -> Vec<u8> {
        let hex = concat!(
            "53455643",         // SEVC
            "01",               // version
            "0200",             // width 2
            "0200",             // height 2
            "19000000",         // fps num 25
            "01000000",         // fps den 1
            "01000000",         // frame_count 1
            "08",               // scale
            "08",               // k
            "00",               // effective_count
            "0700000000000000", // seed 7
            "32",               // canny low 50
            "96",               // canny high 150
            "00",               // raw png codec
            "01000000",         // one key frame
            "00",               // delta 0
            "03000000",         // key payload length
            "aabbcc",           // key payload
        );
        (0..hex.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&hex[i..i + 2], 16).unwrap())
            .collect()
    }

    #[test]
    fn golden_minimal_file() {
        let file = parse_container(&golden_minimal()).unwrap();
        assert_eq!(file.header, minimal_header());
        assert_eq!(file.key_payload, vec![0xaa, 0xbb, 0xcc]);
        assert!(file.chunks.is_empty());
        assert_eq!(serialize_container(&file), golden_minimal());
        assert_eq!(file.section_sizes().total(), golden_minimal().len());
    }

    #[test]
    fn bad_magic_and_version() {
        let mut b = golden_minimal();
        b[..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            parse_container(&b),
            Err(Error::UnsupportedFormat(_))
        ));
        let mut b = golden_minimal();
        b[4] = 9;
        assert!(matches!(
            parse_container(&b),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn truncation_anywhere_fails() {
        let b = golden_minimal();
        for n in 0..b.len() {
            assert!(parse_container(&b[..n]).is_err(), "prefix {n} parsed");
        }
        let mut extra = b.clone();
        extra.push(0);
        assert!(parse_container(&extra).is_err());
    }

    fn file_with_gops() -> SevFile {
        let mut header = minimal_header();
        header.width = 16;
        header.height = 8;
        header.scale = 4;
        header.frame_count = 7;
        header.key_indices = vec![0, 3, 4];
        header.palette = vec![[10, 10, 10], [200, 0, 0]];
        // GOPs: 1..3 (2 frames), 5..7 (2 frames); key 3 has no GOP.
        let (mw, mh) = header.map_dimensions();
        assert_eq!((mw, mh), (4, 2));
        let chunk = |seed: u8| {
            let maps: Vec<_> = (0..2)
                .map(|f| {
                    let l = (0..8).map(|i| (i + f + seed) % 3).collect();
                    SoftEdgeMap::new(mw, mh, 8, l).unwrap()
                })
                .collect();
            compress_chunk(&maps).unwrap()
        };
        SevFile {
            header,
            key_payload: vec![1, 2, 3, 4],
            chunks: vec![chunk(0), chunk(1)],
        }
    }

    #[test]
    fn roundtrip_with_chunks() {
        let file = file_with_gops();
        assert_eq!(file.header.gops(), vec![1..3, 5..7]);
        let bytes = serialize_container(&file);
        assert_eq!(bytes.len(), file.section_sizes().total());
        let parsed = parse_container(&bytes).unwrap();
        assert_eq!(parsed, file);
        assert_eq!(serialize_container(&parsed), bytes);
    }

    #[test]
    fn corrupt_chunk_names_gop() {
        let file = file_with_gops();
        let mut bytes = serialize_container(&file);
        let second_chunk_start = bytes.len() - file.chunks[1].byte_len();
        bytes[second_chunk_start] = 7; // invalid scan mode
        match parse_container(&bytes) {
            Err(Error::CorruptChunk { gop, .. }) => assert_eq!(gop, 1),
            other => panic!("expected corrupt chunk, got {other:?}"),
        }
    }

    #[test]
    fn non_monotone_key_indices_rejected() {
        let mut h = minimal_header();
        h.frame_count = 10;
        h.key_indices = vec![0, 4, 4];
        let mut bytes = h.to_bytes();
        bytes.extend_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            parse_container(&bytes),
            Err(Error::Inconsistent(_))
        ));

        h.key_indices = vec![2, 4];
        assert!(h.validate().is_err());
    }

    #[test]
    fn palette_must_fit_k_and_be_sorted() {
        let mut h = minimal_header();
        h.k = 2;
        h.palette = vec![[0, 0, 0], [1, 1, 1]];
        assert!(h.validate().is_err());
        h.k = 8;
        h.palette = vec![[255, 255, 255], [0, 0, 0]];
        assert!(h.validate().is_err());
    }

    #[test]
    fn varint_roundtrip() {
        for v in [
            0u64,
            1,
            127,
            128,
            300,
            16_383,
            16_384,
            u32::MAX as u64,
            u64::MAX,
        ] {
            let mut out = Vec::new();
            write_varint(&mut out, v);
            let mut r = Reader {
                bytes: &out,
                pos: 0,
            };
            assert_eq!(r.varint().unwrap(), v);
            assert_eq!(r.pos, out.len());
        }
    }
}
