//! Lossless coding of soft edge map sequences: run-length tokens in a
//! spatial or temporal scan, then separate canonical Huffman codes for the
//! token labels and run lengths.

mod bitio;
mod chunk;
mod huffman;
mod rle;

pub use bitio::{BitReader, BitWriter};
pub use chunk::{
    chunk_overhead_bytes, compress_chunk, decompress_chunk, decompress_chunk_bytes,
    raw_bits_per_label, CompressedChunk, ScanMode,
};
pub(crate) use chunk::{decode_k, encode_k};
pub use huffman::{huffman_build, HuffmanDecoder, HuffmanTable, MAX_CODE_LEN};
pub use rle::{rle_expand, rle_tokenize, RunToken, MAX_RUN};
