//! Soft-edge video codec.
//!
//! Videos are split into a few key frames, sent through a conventional
//! first-stage codec, and G-frames, which travel only as low-resolution
//! soft edge maps: Canny edges labeled with a small color palette and
//! compressed losslessly with run-length plus canonical Huffman coding.
//! A generative decoder trained on the key frames (built separately)
//! turns the soft edge maps back into frames.

pub mod container;
pub mod downsample;
pub mod entropy;
pub mod error;
pub mod metrics;
pub mod rd;
pub mod soft_edge;
pub mod synth;
pub mod video;

pub use error::{Error, Result};
