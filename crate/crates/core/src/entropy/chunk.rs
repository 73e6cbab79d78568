//! Compressed chunks: one group of soft edge maps, run-length tokenized in
//! the better of two scan orders and Huffman coded.
//!
//! Byte layout (integers little-endian):
//!
//! ```text
//! scan_mode:u8 | frame_count:u32 | k:u8 | k label code lengths:u8
//! | 256 run code lengths:u8 | payload_bit_count:u64
//! | payload bytes (MSB-first) | zero padding to a byte boundary
//! ```
//!
//! `k = 256` is written as 0. Width and height are not stored; they come
//! from the enclosing container.

use super::bitio::{BitReader, BitWriter};
use super::huffman::{huffman_build, HuffmanTable};
use super::rle::{count_tokens, rle_tokenize, RunToken};
use crate::error::{Error, Result};
use crate::soft_edge::SoftEdgeMap;

pub(crate) const RUN_ALPHABET: usize = 256;

/// Order in which the labels of a chunk are serialized before coding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScanMode {
    /// Frame by frame, row-major within each frame.
    Spatial = 0,
    /// Pixel by pixel in row-major order, frame index innermost.
    Temporal = 1,
    /// Fixed-width label packing in spatial order, used when entropy coding
    /// would be larger.
    Raw = 2,
}

impl ScanMode {
    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(ScanMode::Spatial),
            1 => Ok(ScanMode::Temporal),
            2 => Ok(ScanMode::Raw),
            other => Err(Error::corrupt(
                "scan mode",
                format!("unknown scan mode {other}"),
            )),
        }
    }
}

/// Bits per label for fixed-width packing: `ceil(log2 k)`.
pub fn raw_bits_per_label(k: u16) -> u8 {
    (16 - (k - 1).leading_zeros()) as u8
}

/// Size of everything in a serialized chunk except the payload bytes.
pub fn chunk_overhead_bytes(k: u16) -> usize {
    1 + 4 + 1 + k as usize + RUN_ALPHABET + 8
}

pub(crate) fn encode_k(k: u16) -> u8 {
    if k == 256 {
        0
    } else {
        k as u8
    }
}

pub(crate) fn decode_k(b: u8) -> u16 {
    if b == 0 {
        256
    } else {
        b as u16
    }
}

/// A serialized-ready compressed group of soft edge maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedChunk {
    scan_mode: ScanMode,
    frame_count: u32,
    width: u32,
    height: u32,
    k: u16,
    label_lengths: Vec<u8>,
    run_lengths: Vec<u8>,
    payload_bits: u64,
    payload: Vec<u8>,
}

impl CompressedChunk {
    pub fn scan_mode(&self) -> ScanMode {
        self.scan_mode
    }

    pub fn frame_count(&self) -> u32 {
        self.frame_count
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn k(&self) -> u16 {
        self.k
    }

    pub fn payload_bits(&self) -> u64 {
        self.payload_bits
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// Serialized size in bytes.
    pub fn byte_len(&self) -> usize {
        chunk_overhead_bytes(self.k) + self.payload.len()
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.push(self.scan_mode as u8);
        out.extend_from_slice(&self.frame_count.to_le_bytes());
        out.push(encode_k(self.k));
        out.extend_from_slice(&self.label_lengths);
        out.extend_from_slice(&self.run_lengths);
        out.extend_from_slice(&self.payload_bits.to_le_bytes());
        out.extend_from_slice(&self.payload);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.byte_len());
        self.write_to(&mut out);
        out
    }

    /// Parses one chunk from the front of `bytes`, returning it and the
    /// number of bytes consumed. Table validity, truncation and padding are
    /// checked here; the token stream itself is checked by
    /// [`decompress_chunk`].
    pub fn parse(bytes: &[u8], width: u32, height: u32) -> Result<(Self, usize)> {
        let mut cur = Cursor { bytes, pos: 0 };
        let scan_mode = ScanMode::from_byte(cur.u8()?)?;
        let frame_count = u32::from_le_bytes(cur.array()?);
        let k = decode_k(cur.u8()?);
        if k < 2 {
            return Err(Error::corrupt(
                "label table",
                format!("alphabet size {k} is below 2"),
            ));
        }
        let label_lengths = cur.take(k as usize)?.to_vec();
        let run_lengths = cur.take(RUN_ALPHABET)?.to_vec();
        let payload_bits = u64::from_le_bytes(cur.array()?);
        let payload_len = usize::try_from(payload_bits.div_ceil(8))
            .map_err(|_| Error::corrupt("truncated", "payload length overflows"))?;
        let payload = cur.take(payload_len)?.to_vec();
        let used = payload_bits % 8;
        if used != 0 && payload.last().is_some_and(|&b| b & (0xFF >> used) != 0) {
            return Err(Error::corrupt("padding", "non-zero bits after the payload"));
        }
        if scan_mode == ScanMode::Raw {
            if label_lengths.iter().chain(&run_lengths).any(|&l| l != 0) {
                return Err(Error::corrupt(
                    "label table",
                    "raw chunks carry empty tables",
                ));
            }
        } else {
            HuffmanTable::from_lengths(label_lengths.clone())?;
            HuffmanTable::from_lengths(run_lengths.clone())?;
            if run_lengths[0] != 0 {
                return Err(Error::corrupt("run table", "run length 0 has a code"));
            }
        }
        let chunk = CompressedChunk {
            scan_mode,
            frame_count,
            width,
            height,
            k,
            label_lengths,
            run_lengths,
            payload_bits,
            payload,
        };
        Ok((chunk, cur.pos))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::corrupt(
                    "truncated",
                    format!(
                        "need {n} bytes at offset {}, only {} remain",
                        self.pos,
                        self.bytes.len() - self.pos
                    ),
                )
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("slice has length N"))
    }
}

fn spatial_labels(maps: &[SoftEdgeMap]) -> impl Iterator<Item = u8> + '_ {
    maps.iter().flat_map(|m| m.labels().iter().copied())
}

fn temporal_labels(maps: &[SoftEdgeMap]) -> impl Iterator<Item = u8> + '_ {
    let pixels = maps[0].labels().len();
    (0..pixels).flat_map(move |p| maps.iter().map(move |m| m.labels()[p]))
}

/// Compresses a non-empty list of equally sized maps.
pub fn compress_chunk(maps: &[SoftEdgeMap]) -> Result<CompressedChunk> {
    let first = maps
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot compress an empty map list".into()))?;
    let (width, height, k) = (first.width(), first.height(), first.k());
    for (i, m) in maps.iter().enumerate().skip(1) {
        if m.width() != width || m.height() != height {
            return Err(Error::DimensionMismatch {
                expected_w: width,
                expected_h: height,
                actual_w: m.width(),
                actual_h: m.height(),
                context: Some(format!("map {i} of chunk")),
            });
        }
        if m.k() != k {
            return Err(Error::InvalidArgument(format!(
                "map {i} has k = {}, chunk uses k = {k}",
                m.k()
            )));
        }
    }
    let frame_count = u32::try_from(maps.len())
        .map_err(|_| Error::InvalidArgument("too many maps for one chunk".into()))?;

    let spatial = count_tokens(spatial_labels(maps));
    let temporal = count_tokens(temporal_labels(maps));
    let (scan_mode, labels): (ScanMode, Vec<u8>) = if temporal < spatial {
        (ScanMode::Temporal, temporal_labels(maps).collect())
    } else {
        (ScanMode::Spatial, spatial_labels(maps).collect())
    };
    let tokens = rle_tokenize(&labels);

    let mut label_freq = vec![0u64; k as usize];
    let mut run_freq = vec![0u64; RUN_ALPHABET];
    for t in &tokens {
        label_freq[t.label as usize] += 1;
        run_freq[t.run as usize] += 1;
    }
    let label_table = huffman_build(&label_freq)?;
    let run_table = huffman_build(&run_freq)?;
    let coded_bits = label_table.cost(&label_freq) + run_table.cost(&run_freq);
    let raw_bits = labels.len() as u64 * raw_bits_per_label(k) as u64;

    if coded_bits > raw_bits {
        let bits = raw_bits_per_label(k);
        let mut w = BitWriter::new();
        for l in spatial_labels(maps) {
            w.write(l as u32, bits);
        }
        let (payload, payload_bits) = w.finish();
        return Ok(CompressedChunk {
            scan_mode: ScanMode::Raw,
            frame_count,
            width,
            height,
            k,
            label_lengths: vec![0; k as usize],
            run_lengths: vec![0; RUN_ALPHABET],
            payload_bits,
            payload,
        });
    }

    let mut w = BitWriter::new();
    for t in &tokens {
        label_table.encode(t.label as usize, &mut w)?;
        run_table.encode(t.run as usize, &mut w)?;
    }
    let (payload, payload_bits) = w.finish();
    debug_assert_eq!(payload_bits, coded_bits);
    Ok(CompressedChunk {
        scan_mode,
        frame_count,
        width,
        height,
        k,
        label_lengths: label_table.lengths().to_vec(),
        run_lengths: run_table.lengths().to_vec(),
        payload_bits,
        payload,
    })
}

/// Exact inverse of [`compress_chunk`].
pub fn decompress_chunk(chunk: &CompressedChunk) -> Result<Vec<SoftEdgeMap>> {
    let pixels = chunk.width as u64 * chunk.height as u64;
    let total = chunk.frame_count as u64 * pixels;
    if chunk.frame_count == 0 || pixels == 0 {
        return Err(Error::corrupt("length", "chunk declares no samples"));
    }
    let mut reader = BitReader::new(&chunk.payload, chunk.payload_bits);
    // Never trust the declared size for allocation before data backs it.
    let mut labels: Vec<u8> = Vec::with_capacity(total.min(1 << 24) as usize);

    match chunk.scan_mode {
        ScanMode::Raw => {
            let bits = raw_bits_per_label(chunk.k);
            let expected = total * bits as u64;
            if chunk.payload_bits != expected {
                return Err(Error::corrupt(
                    "length",
                    format!(
                        "raw payload holds {} bits, {} frames need {expected}",
                        chunk.payload_bits, chunk.frame_count
                    ),
                ));
            }
            for _ in 0..total {
                let l = reader.read(bits).expect("payload length checked above");
                if l as u16 >= chunk.k {
                    return Err(Error::corrupt("label", format!("label {l} exceeds k")));
                }
                labels.push(l as u8);
            }
        }
        ScanMode::Spatial | ScanMode::Temporal => {
            let label_dec = HuffmanTable::from_lengths(chunk.label_lengths.clone())?.decoder();
            let run_dec = HuffmanTable::from_lengths(chunk.run_lengths.clone())?.decoder();
            while reader.remaining() > 0 {
                let label = label_dec.decode(&mut reader)?;
                let run = run_dec.decode(&mut reader)?;
                let t = RunToken {
                    label: label as u8,
                    run: run as u8,
                };
                if t.run == 0 {
                    return Err(Error::corrupt("run", "zero-length run"));
                }
                if labels.len() as u64 + t.run as u64 > total {
                    return Err(Error::corrupt(
                        "length",
                        format!("tokens expand past the declared {total} labels"),
                    ));
                }
                labels.extend(std::iter::repeat_n(t.label, t.run as usize));
            }
            if labels.len() as u64 != total {
                return Err(Error::corrupt(
                    "length",
                    format!(
                        "tokens expand to {} labels, declared {} frames of {pixels}",
                        labels.len(),
                        chunk.frame_count
                    ),
                ));
            }
        }
    }

    let frames = chunk.frame_count as usize;
    let pixels = pixels as usize;
    let per_frame: Vec<Vec<u8>> = match chunk.scan_mode {
        ScanMode::Temporal => (0..frames)
            .map(|f| (0..pixels).map(|p| labels[p * frames + f]).collect())
            .collect(),
        _ => labels.chunks_exact(pixels).map(<[u8]>::to_vec).collect(),
    };
    per_frame
        .into_iter()
        .map(|l| SoftEdgeMap::new(chunk.width, chunk.height, chunk.k, l))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::corrupt("label", e.to_string()))
}

/// Parses and decompresses one chunk from raw bytes.
pub fn decompress_chunk_bytes(bytes: &[u8], width: u32, height: u32) -> Result<Vec<SoftEdgeMap>> {
    let (chunk, used) = CompressedChunk::parse(bytes, width, height)?;
    if used != bytes.len() {
        return Err(Error::corrupt(
            "trailing data",
            format!("{} bytes after the chunk", bytes.len() - used),
        ));
    }
    decompress_chunk(&chunk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    fn golden_single_zero_frame() -> Vec<u8> {
        let mut b = vec![0u8]; // spatial
        b.extend_from_slice(&1u32.to_le_bytes()); // frame_count
        b.push(2); // k
        b.extend_from_slice(&[1, 0]); // label lengths: symbol 0 -> "0"
        let mut runs = [0u8; 256];
        runs[16] = 1; // run 16 -> "0"
        b.extend_from_slice(&runs);
        b.extend_from_slice(&2u64.to_le_bytes()); // two payload bits
        b.push(0b0000_0000); // "0" "0" + six zero padding bits
        b
    }

    #[test]
    fn golden_all_zero_frame() {
        let m = SoftEdgeMap::zeros(4, 4, 2).unwrap();
        let chunk = compress_chunk(std::slice::from_ref(&m)).unwrap();
        assert_eq!(chunk.scan_mode(), ScanMode::Spatial);
        assert_eq!(chunk.payload_bits(), 2);
        let bytes = chunk.to_bytes();
        assert_eq!(bytes, golden_single_zero_frame());
        assert_eq!(bytes.len(), chunk.byte_len());
        assert_eq!(decompress_chunk_bytes(&bytes, 4, 4).unwrap(), vec![m]);
    }

    #[test]
    fn truncated_payload_is_corrupt() {
        let mut bytes = golden_single_zero_frame();
        bytes.pop();
        let err = decompress_chunk_bytes(&bytes, 4, 4).unwrap_err();
        assert!(
            matches!(
                err,
                Error::CorruptStream {
                    check: "truncated",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn declared_frames_must_match_tokens() {
        let mut bytes = golden_single_zero_frame();
        bytes[1..5].copy_from_slice(&2u32.to_le_bytes());
        let err = decompress_chunk_bytes(&bytes, 4, 4).unwrap_err();
        assert!(
            matches!(
                err,
                Error::CorruptStream {
                    check: "length",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn nonzero_padding_is_corrupt() {
        let mut bytes = golden_single_zero_frame();
        *bytes.last_mut().unwrap() = 0b0000_0001;
        let err = decompress_chunk_bytes(&bytes, 4, 4).unwrap_err();
        assert!(
            matches!(
                err,
                Error::CorruptStream {
                    check: "padding",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn unknown_code_word_is_corrupt() {
        let mut bytes = golden_single_zero_frame();
        *bytes.last_mut().unwrap() = 0b1000_0000; // label "1" is unassigned
        let err = decompress_chunk_bytes(&bytes, 4, 4).unwrap_err();
        assert!(matches!(err, Error::CorruptStream { .. }), "{err}");

        // With enough bits available the decoder reports the bad code word.
        let table = HuffmanTable::from_lengths(vec![1, 0]).unwrap();
        let data = [0xFFu8, 0xFF];
        let mut r = BitReader::new(&data, 16);
        let err = table.decoder().decode(&mut r).unwrap_err();
        assert!(
            matches!(
                err,
                Error::CorruptStream {
                    check: "code word",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn temporal_scan_wins_on_static_content() {
        // Each row has its own label, constant over 8 frames.
        let frame: Vec<u8> = (0..4).flat_map(|row| [row as u8; 4]).collect();
        let maps: Vec<_> = (0..8)
            .map(|_| SoftEdgeMap::new(4, 4, 4, frame.clone()).unwrap())
            .collect();
        // Spatial: 4 runs per frame x 8 frames = 32 tokens. Temporal: each
        // pixel is one run of 8, and the 4 pixels of a row merge into one
        // run of 32, so 4 tokens.
        assert_eq!(count_tokens(spatial_labels(&maps)), 32);
        assert_eq!(count_tokens(temporal_labels(&maps)), 4);
        let chunk = compress_chunk(&maps).unwrap();
        assert_eq!(chunk.scan_mode(), ScanMode::Temporal);
        assert_eq!(decompress_chunk(&chunk).unwrap(), maps);
    }

    #[test]
    fn raw_fallback_for_incompressible_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let maps: Vec<_> = (0..4)
            .map(|_| {
                let l = (0..256).map(|_| (rng.next_u32() & 1) as u8).collect();
                SoftEdgeMap::new(16, 16, 2, l).unwrap()
            })
            .collect();
        let chunk = compress_chunk(&maps).unwrap();
        assert_eq!(chunk.scan_mode(), ScanMode::Raw);
        assert_eq!(chunk.payload_bits(), 1024);
        let bytes = chunk.to_bytes();
        assert_eq!(decompress_chunk_bytes(&bytes, 16, 16).unwrap(), maps);
    }

    #[test]
    fn input_validation() {
        assert!(compress_chunk(&[]).is_err());
        let a = SoftEdgeMap::zeros(4, 4, 2).unwrap();
        let b = SoftEdgeMap::zeros(4, 5, 2).unwrap();
        let c = SoftEdgeMap::zeros(4, 4, 8).unwrap();
        assert!(compress_chunk(&[a.clone(), b]).is_err());
        assert!(compress_chunk(&[a, c]).is_err());
    }

    #[test]
    fn k_256_roundtrip() {
        let labels: Vec<u8> = (0..=255u8).collect();
        let m = SoftEdgeMap::new(16, 16, 256, labels).unwrap();
        let bytes = compress_chunk(std::slice::from_ref(&m)).unwrap().to_bytes();
        assert_eq!(bytes[5], 0);
        assert_eq!(decompress_chunk_bytes(&bytes, 16, 16).unwrap(), vec![m]);
    }

    #[test]
    fn raw_bits() {
        assert_eq!(raw_bits_per_label(2), 1);
        assert_eq!(raw_bits_per_label(3), 2);
        assert_eq!(raw_bits_per_label(4), 2);
        assert_eq!(raw_bits_per_label(8), 3);
        assert_eq!(raw_bits_per_label(9), 4);
        assert_eq!(raw_bits_per_label(256), 8);
    }

    fn sparse_maps(
        seed: u64,
        w: u32,
        h: u32,
        frames: usize,
        k: u16,
        zero_pct: u32,
    ) -> Vec<SoftEdgeMap> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..frames)
            .map(|_| {
                let l = (0..w * h)
                    .map(|_| {
                        if rng.next_u32() % 100 < zero_pct {
                            0
                        } else {
                            1 + (rng.next_u32() % (k as u32 - 1)) as u8
                        }
                    })
                    .collect();
                SoftEdgeMap::new(w, h, k, l).unwrap()
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn roundtrip_and_size_bound(
            seed in any::<u64>(),
            w in 1u32..=32, h in 1u32..=32, frames in 1usize..=16,
            k in prop::sample::select(vec![2u16, 4, 8, 16, 256]),
            zero_pct in prop::sample::select(vec![0u32, 50, 90, 99, 100]),
        ) {
            let maps = sparse_maps(seed, w, h, frames, k, zero_pct);
            let chunk = compress_chunk(&maps).unwrap();
            let bytes = chunk.to_bytes();
            prop_assert_eq!(decompress_chunk_bytes(&bytes, w, h).unwrap(), maps);
            let raw_payload = (frames as u64 * (w * h) as u64 * raw_bits_per_label(k) as u64).div_ceil(8);
            prop_assert!(chunk.payload().len() as u64 <= raw_payload);
            prop_assert_eq!(bytes.len(), chunk_overhead_bytes(k) + chunk.payload().len());
        }
    }
}
