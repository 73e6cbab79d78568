use serde::Serialize;

use super::format::SevFile;
use crate::video::Rational;

/// `bits * fps / frames / 1000`.
pub fn kbps(bits: u64, frames: u64, fps: Rational) -> f64 {
    if frames == 0 {
        return 0.0;
    }
    bits as f64 * fps.num as f64 / fps.den as f64 / frames as f64 / 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BitrateReport {
    pub total_bits: u64,
    pub header_bits: u64,
    /// Key payload plus its length prefix.
    pub key_bits: u64,
    pub g_bits: u64,
    pub kbps_total: f64,
    pub kbps_key: f64,
    pub kbps_g: f64,
    /// Fraction of payload bits (key + G) spent on key frames.
    pub key_share: f64,
}

pub fn bitrate_kbps(file: &SevFile) -> BitrateReport {
    let sizes = file.section_sizes();
    let (header_bits, key_bits, g_bits) = (
        sizes.header as u64 * 8,
        sizes.key as u64 * 8,
        sizes.chunks as u64 * 8,
    );
    let total_bits = header_bits + key_bits + g_bits;
    let frames = file.header.frame_count as u64;
    let fps = file.header.fps;
    let payload = key_bits + g_bits;
    BitrateReport {
        total_bits,
        header_bits,
        key_bits,
        g_bits,
        kbps_total: kbps(total_bits, frames, fps),
        kbps_key: kbps(key_bits, frames, fps),
        kbps_g: kbps(g_bits, frames, fps),
        key_share: if payload == 0 {
            0.0
        } else {
            key_bits as f64 / payload as f64
        },
    }
}
