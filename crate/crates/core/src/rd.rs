//! Rate-distortion sweeps over (alpha, scale, k, quality).
//!
//! Each grid point is encoded, decoded again to check that the receiver
//! regenerates the encoder's soft edge maps, and scored against
//! reconstructions when a directory for that point exists under
//! `recon_dir` (`a{alpha}_s{scale}_k{k}_q{quality}/%06d.png`).

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::container::{
    bitrate_kbps, decode_sev, encode_video_traced, parse_container, serialize_container,
    BitrateReport, EncoderConfig, KeyFrameCodec,
};
use crate::downsample::ScaleFactor;
use crate::error::{Error, Result};
use crate::metrics::{format_score, ms_ssim, psnr, ssim, MS_SSIM_MIN_DIM};
use crate::soft_edge::{CannyThresholds, SoftEdgeMap};
use crate::video::{load_video, Frame, Rational, VideoSequence};

pub const CSV_HEADER: [&str; 12] = [
    "alpha",
    "scale",
    "k",
    "quality",
    "kbps_total",
    "kbps_key",
    "kbps_g",
    "psnr",
    "ssim",
    "msssim",
    "vmaf",
    "error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub input: PathBuf,
    /// Used for PNG directories; Y4M carries its own rate.
    pub fps: Rational,
    pub alphas: Vec<f64>,
    pub scales: Vec<u8>,
    pub ks: Vec<u16>,
    pub qualities: Vec<u32>,
    pub thresholds: CannyThresholds,
    pub seed: u64,
    pub recon_dir: Option<PathBuf>,
}

/// Grid values in sweep order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub alpha: f64,
    pub scale: u8,
    pub k: u16,
    pub quality: u32,
}

impl GridPoint {
    pub fn recon_name(&self) -> String {
        format!(
            "a{}_s{}_k{}_q{}",
            self.alpha, self.scale, self.k, self.quality
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: GridPoint,
    pub bitrate: Option<BitrateReport>,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub msssim: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(point: GridPoint, e: Error) -> Self {
        SweepRow {
            point,
            bitrate: None,
            psnr: None,
            ssim: None,
            msssim: None,
            error: Some(e.to_string()),
        }
    }
}

fn sorted<T: PartialOrd + Copy>(values: &[T]) -> Vec<T> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("grid values are comparable"));
    v.dedup();
    v
}

/// Cartesian product in lexicographic (alpha, scale, k, quality) order.
pub fn grid(config: &SweepConfig) -> Vec<GridPoint> {
    let mut points = Vec::new();
    for &alpha in &sorted(&config.alphas) {
        for &scale in &sorted(&config.scales) {
            for &k in &sorted(&config.ks) {
                for &quality in &sorted(&config.qualities) {
                    points.push(GridPoint {
                        alpha,
                        scale,
                        k,
                        quality,
                    });
                }
            }
        }
    }
    points
}

pub fn run_sweep(config: &SweepConfig, key_codec: &dyn KeyFrameCodec) -> Result<Vec<SweepRow>> {
    let video = load_video(&config.input, config.fps)?;
    Ok(run_sweep_on(&video, config, key_codec))
}

/// Like [`run_sweep`] with the video already in memory; `config.input` is
/// ignored.
pub fn run_sweep_on(
    video: &VideoSequence,
    config: &SweepConfig,
    key_codec: &dyn KeyFrameCodec,
) -> Vec<SweepRow> {
    grid(config)
        .into_par_iter()
        .map(|p| match run_point(video, config, p, key_codec) {
            Ok(row) => row,
            Err(e) => SweepRow::failed(p, e),
        })
        .collect()
}

fn run_point(
    video: &VideoSequence,
    config: &SweepConfig,
    point: GridPoint,
    key_codec: &dyn KeyFrameCodec,
) -> Result<SweepRow> {
    let enc = EncoderConfig {
        alpha: point.alpha,
        key_indices: None,
        scale: ScaleFactor::new(point.scale)?,
        k: point.k,
        thresholds: config.thresholds,
        seed: config.seed,
        quality: point.quality,
    };
    let (file, tap) = encode_video_traced(video, &enc, key_codec)?;
    let bytes = serialize_container(&file);
    let decoded = decode_sev(&parse_container(&bytes)?, key_codec)?;
    let mut expected: Vec<(usize, &SoftEdgeMap)> = tap
        .key_maps
        .iter()
        .chain(&tap.g_maps)
        .map(|(i, m)| (*i, m))
        .collect();
    expected.sort_by_key(|e| e.0);
    let symmetric = decoded.maps.len() == expected.len()
        && decoded
            .maps
            .iter()
            .zip(&expected)
            .all(|(d, (i, m))| d.index == *i && &d.map == *m);
    let mut row = SweepRow {
        point,
        bitrate: Some(bitrate_kbps(&file)),
        psnr: None,
        ssim: None,
        msssim: None,
        error: None,
    };
    if !symmetric {
        row.error = Some("decoder soft edge maps differ from the encoder's".into());
        return Ok(row);
    }
    if let Some(dir) = &config.recon_dir {
        let recon_path = dir.join(point.recon_name());
        if recon_path.is_dir() {
            if let Err(e) = score(video, &recon_path, &mut row) {
                row.error = Some(e.to_string());
            }
        }
    }
    Ok(row)
}

fn score(video: &VideoSequence, recon: &Path, row: &mut SweepRow) -> Result<()> {
    let recon = load_video(recon, video.fps())?;
    if recon.len() != video.len() {
        return Err(Error::InvalidArgument(format!(
            "reconstruction holds {} frames, source has {}",
            recon.len(),
            video.len()
        )));
    }
    let pairs: Vec<_> = video.frames().iter().zip(recon.frames()).collect();
    let mean = |f: fn(&Frame, &Frame) -> Result<f64>| -> Result<f64> {
        let scores = pairs
            .par_iter()
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(scores.iter().sum::<f64>() / scores.len() as f64)
    };
    row.psnr = Some(mean(psnr)?);
    let side = video.width().min(video.height());
    if side >= 11 {
        row.ssim = Some(mean(ssim)?);
    }
    if side >= MS_SSIM_MIN_DIM {
        row.msssim = Some(mean(ms_ssim)?);
    }
    Ok(())
}

pub fn write_sweep_csv(out: impl Write, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt = |v: Option<f64>| v.map(format_score).unwrap_or_default();
    for r in rows {
        let b = r.bitrate.as_ref();
        w.write_record([
            r.point.alpha.to_string(),
            r.point.scale.to_string(),
            r.point.k.to_string(),
            r.point.quality.to_string(),
            opt(b.map(|b| b.kbps_total)),
            opt(b.map(|b| b.kbps_key)),
            opt(b.map(|b| b.kbps_g)),
            opt(r.psnr),
            opt(r.ssim),
            opt(r.msssim),
            String::new(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Whitespace-separated columns for gnuplot; missing values are `NaN`.
pub fn write_gnuplot(mut out: impl Write, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(
        out,
        "# alpha scale k quality kbps_total kbps_key kbps_g psnr ssim msssim"
    )?;
    let v = |x: Option<f64>| x.map_or("NaN".to_string(), format_score);
    for r in rows {
        let b = r.bitrate.as_ref();
        writeln!(
            out,
            "{} {} {} {} {} {} {} {} {} {}",
            r.point.alpha,
            r.point.scale,
            r.point.k,
            r.point.quality,
            v(b.map(|b| b.kbps_total)),
            v(b.map(|b| b.kbps_key)),
            v(b.map(|b| b.kbps_g)),
            v(r.psnr),
            v(r.ssim),
            v(r.msssim),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::RawPngCodec;
    use crate::synth::moving_rectangles;

    fn config(alphas: &[f64], scales: &[u8], ks: &[u16]) -> SweepConfig {
        SweepConfig {
            input: PathBuf::new(),
            fps: Rational { num: 25, den: 1 },
            alphas: alphas.to_vec(),
            scales: scales.to_vec(),
            ks: ks.to_vec(),
            qualities: vec![23],
            thresholds: CannyThresholds::default(),
            seed: 1,
            recon_dir: None,
        }
    }

    fn csv(rows: &[SweepRow]) -> String {
        let mut out = Vec::new();
        write_sweep_csv(&mut out, rows).unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn grid_is_sorted_product() {
        let video = moving_rectangles(10, 32, 24, 2, 0);
        let rows = run_sweep_on(&video, &config(&[0.5, 0.2], &[4, 2], &[8, 2]), &RawPngCodec);
        assert_eq!(rows.len(), 8);
        let keys: Vec<_> = rows
            .iter()
            .map(|r| (r.point.alpha, r.point.scale, r.point.k))
            .collect();
        assert_eq!(keys[0], (0.2, 2, 2));
        assert_eq!(keys[7], (0.5, 4, 8));
        assert!(rows.iter().all(|r| r.error.is_none()), "{rows:?}");
        for r in &rows {
            let b = r.bitrate.unwrap();
            assert_eq!(b.total_bits, b.header_bits + b.key_bits + b.g_bits);
        }
    }

    #[test]
    fn alpha_one_spends_nothing_on_g_frames() {
        let video = moving_rectangles(6, 32, 24, 2, 0);
        let rows = run_sweep_on(&video, &config(&[1.0], &[4], &[8]), &RawPngCodec);
        assert_eq!(rows[0].bitrate.unwrap().g_bits, 0);
        assert!(csv(&rows)
            .lines()
            .nth(1)
            .unwrap()
            .contains(",0.000000,,,,,"));
    }

    #[test]
    fn g_bits_grow_with_k() {
        for seed in 0..5 {
            let video = moving_rectangles(24, 64, 48, 4, seed);
            let rows = run_sweep_on(&video, &config(&[0.1], &[2], &[2, 8, 16]), &RawPngCodec);
            let bits: Vec<u64> = rows.iter().map(|r| r.bitrate.unwrap().g_bits).collect();
            assert!(
                bits.windows(2).all(|w| w[0] <= w[1]),
                "seed {seed}: {bits:?}"
            );
        }
    }

    #[test]
    fn rerun_is_byte_identical() {
        let video = moving_rectangles(12, 32, 24, 3, 5);
        let cfg = config(&[0.25, 0.5], &[2], &[4]);
        assert_eq!(
            csv(&run_sweep_on(&video, &cfg, &RawPngCodec)),
            csv(&run_sweep_on(&video, &cfg, &RawPngCodec))
        );
    }

    #[test]
    fn bad_point_is_recorded_and_sweep_continues() {
        let video = moving_rectangles(6, 32, 24, 2, 0);
        let rows = run_sweep_on(&video, &config(&[0.5], &[0, 2], &[4]), &RawPngCodec);
        assert_eq!(rows.len(), 2);
        assert!(rows[0].error.as_deref().unwrap().contains("scale"));
        assert!(rows[1].error.is_none());
        let text = csv(&rows);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    }

    #[test]
    fn reconstructions_are_scored() {
        let video = moving_rectangles(4, 32, 24, 2, 0);
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(&[0.5], &[2], &[4]);
        cfg.recon_dir = Some(dir.path().to_path_buf());
        let point = grid(&cfg)[0];
        video
            .save_png_dir(dir.path().join(point.recon_name()))
            .unwrap();
        let rows = run_sweep_on(&video, &cfg, &RawPngCodec);
        assert_eq!(rows[0].psnr, Some(100.0));
        assert_eq!(rows[0].ssim, Some(1.0));
        assert_eq!(rows[0].msssim, None);
        let mut gp = Vec::new();
        write_gnuplot(&mut gp, &rows).unwrap();
        assert!(String::from_utf8(gp)
            .unwrap()
            .lines()
            .nth(1)
            .unwrap()
            .ends_with("100.000000 1.000000 NaN"));
    }
}
