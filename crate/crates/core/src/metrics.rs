//! Full-reference quality metrics.
//!
//! PSNR is computed over all RGB samples. SSIM and MS-SSIM work on BT.601
//! luma (unrounded) with an 11x11 Gaussian window, sigma 1.5.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::video::Frame;

/// Returned for identical inputs instead of infinity.
pub const PSNR_CAP_DB: f64 = 100.0;

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const L: f64 = 255.0;
const C1: f64 = (K1 * L) * (K1 * L);
const C2: f64 = (K2 * L) * (K2 * L);

pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
/// Smallest side accepted by [`ms_ssim`]: the window must fit at the
/// coarsest of the five scales.
pub const MS_SSIM_MIN_DIM: u32 = (WINDOW as u32) << 4;

pub fn psnr(reference: &Frame, distorted: &Frame) -> Result<f64> {
    reference.check_dimensions(distorted, "psnr")?;
    let sse: u64 = reference
        .as_bytes()
        .iter()
        .zip(distorted.as_bytes())
        .map(|(&a, &b)| {
            let d = a as i64 - b as i64;
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let mse = sse as f64 / reference.as_bytes().len() as f64;
    Ok((10.0 * (L * L / mse).log10()).min(PSNR_CAP_DB))
}

/// Single-channel f64 image.
#[derive(Debug, Clone)]
struct Plane {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Plane {
    fn luma(frame: &Frame) -> Self {
        let v = frame
            .pixels()
            .map(|[r, g, b]| 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
            .collect();
        Plane {
            w: frame.width() as usize,
            h: frame.height() as usize,
            v,
        }
    }

    fn mul(&self, other: &Plane) -> Plane {
        Plane {
            w: self.w,
            h: self.h,
            v: self.v.iter().zip(&other.v).map(|(a, b)| a * b).collect(),
        }
    }

    /// 2x2 mean, dropping an odd last row or column.
    fn halve(&self) -> Plane {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut v = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * self.w + 2 * x;
                v.push(
                    (self.v[i] + self.v[i + 1] + self.v[i + self.w] + self.v[i + self.w + 1]) / 4.0,
                );
            }
        }
        Plane { w, h, v }
    }

    /// Separable "valid" filtering with the Gaussian window.
    fn blur_valid(&self, kernel: &[f64; WINDOW]) -> Plane {
        let ow = self.w - WINDOW + 1;
        let oh = self.h - WINDOW + 1;
        let mut rows = vec![0.0; ow * self.h];
        for y in 0..self.h {
            let src = &self.v[y * self.w..(y + 1) * self.w];
            for x in 0..ow {
                rows[y * ow + x] = kernel
                    .iter()
                    .zip(&src[x..x + WINDOW])
                    .map(|(k, s)| k * s)
                    .sum();
            }
        }
        let mut v = vec![0.0; ow * oh];
        for y in 0..oh {
            for x in 0..ow {
                v[y * ow + x] = (0..WINDOW)
                    .map(|i| kernel[i] * rows[(y + i) * ow + x])
                    .sum();
            }
        }
        Plane { w: ow, h: oh, v }
    }
}

fn gaussian_kernel() -> [f64; WINDOW] {
    let mut k = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Mean SSIM and mean contrast-structure term over all window positions.
fn ssim_components(x: &Plane, y: &Plane) -> (f64, f64) {
    let kernel = gaussian_kernel();
    let mu_x = x.blur_valid(&kernel);
    let mu_y = y.blur_valid(&kernel);
    let xx = x.mul(x).blur_valid(&kernel);
    let yy = y.mul(y).blur_valid(&kernel);
    let xy = x.mul(y).blur_valid(&kernel);
    let n = mu_x.v.len() as f64;
    let (mut ssim_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..mu_x.v.len() {
        let (mx, my) = (mu_x.v[i], mu_y.v[i]);
        let sx = xx.v[i] - mx * mx;
        let sy = yy.v[i] - my * my;
        let sxy = xy.v[i] - mx * my;
        let cs = (2.0 * sxy + C2) / (sx + sy + C2);
        let l = (2.0 * mx * my + C1) / (mx * mx + my * my + C1);
        ssim_sum += l * cs;
        cs_sum += cs;
    }
    (ssim_sum / n, cs_sum / n)
}

fn check_min_dim(frame: &Frame, min: u32, metric: &str) -> Result<()> {
    if frame.width().min(frame.height()) < min {
        return Err(Error::Precondition(format!(
            "{metric} needs frames of at least {min}x{min}, got {}x{}",
            frame.width(),
            frame.height()
        )));
    }
    Ok(())
}

pub fn ssim(reference: &Frame, distorted: &Frame) -> Result<f64> {
    reference.check_dimensions(distorted, "ssim")?;
    check_min_dim(reference, WINDOW as u32, "SSIM")?;
    if reference == distorted {
        return Ok(1.0);
    }
    let (s, _) = ssim_components(&Plane::luma(reference), &Plane::luma(distorted));
    Ok(s.clamp(-1.0, 1.0))
}

/// Five-scale MS-SSIM. Negative per-scale terms are clamped to 0 before
/// exponentiation.
pub fn ms_ssim(reference: &Frame, distorted: &Frame) -> Result<f64> {
    reference.check_dimensions(distorted, "ms-ssim")?;
    check_min_dim(reference, MS_SSIM_MIN_DIM, "MS-SSIM")?;
    if reference == distorted {
        return Ok(1.0);
    }
    let mut x = Plane::luma(reference);
    let mut y = Plane::luma(distorted);
    let mut score = 1.0;
    for (scale, &w) in MS_SSIM_WEIGHTS.iter().enumerate() {
        let (s, cs) = ssim_components(&x, &y);
        let term = if scale + 1 == MS_SSIM_WEIGHTS.len() {
            s
        } else {
            cs
        };
        score *= term.max(0.0).powf(w);
        if scale + 1 < MS_SSIM_WEIGHTS.len() {
            x = x.halve();
            y = y.halve();
        }
    }
    Ok(score.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Psnr,
    Ssim,
    MsSsim,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Psnr, Metric::Ssim, Metric::MsSsim];

    pub fn compute(self, reference: &Frame, distorted: &Frame) -> Result<f64> {
        match self {
            Metric::Psnr => psnr(reference, distorted),
            Metric::Ssim => ssim(reference, distorted),
            Metric::MsSsim => ms_ssim(reference, distorted),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "psnr" => Ok(Metric::Psnr),
            "ssim" => Ok(Metric::Ssim),
            "msssim" | "ms-ssim" | "ms_ssim" => Ok(Metric::MsSsim),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

/// Per-frame scores of one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricResult {
    pub per_frame: Vec<f64>,
    pub mean: f64,
}

impl MetricResult {
    pub fn from_scores(per_frame: Vec<f64>) -> Self {
        let mean = if per_frame.is_empty() {
            f64::NAN
        } else {
            per_frame.iter().sum::<f64>() / per_frame.len() as f64
        };
        MetricResult { per_frame, mean }
    }
}

/// Scores for a pair of equally long sequences.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SequenceMetrics {
    pub frames: usize,
    pub psnr: Option<MetricResult>,
    pub ssim: Option<MetricResult>,
    pub msssim: Option<MetricResult>,
}

pub fn evaluate_sequences(
    reference: &[Frame],
    distorted: &[Frame],
    metrics: &[Metric],
) -> Result<SequenceMetrics> {
    if reference.len() != distorted.len() {
        return Err(Error::InvalidArgument(format!(
            "reference has {} frames, distorted has {}",
            reference.len(),
            distorted.len()
        )));
    }
    let mut out = SequenceMetrics {
        frames: reference.len(),
        ..SequenceMetrics::default()
    };
    for &m in metrics {
        let scores = reference
            .par_iter()
            .zip(distorted.par_iter())
            .map(|(r, d)| m.compute(r, d))
            .collect::<Result<Vec<_>>>()?;
        let slot = match m {
            Metric::Psnr => &mut out.psnr,
            Metric::Ssim => &mut out.ssim,
            Metric::MsSsim => &mut out.msssim,
        };
        *slot = Some(MetricResult::from_scores(scores));
    }
    Ok(out)
}

/// Writes `frame_index,psnr_db,ssim,msssim,vmaf` rows plus a `mean` row.
/// Metrics that were not computed, and always `vmaf`, are left empty.
pub fn write_metrics_csv(out: impl Write, m: &SequenceMetrics) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame_index", "psnr_db", "ssim", "msssim", "vmaf"])?;
    let cell = |r: &Option<MetricResult>, i: Option<usize>| -> String {
        r.as_ref()
            .map(|r| format_score(i.map_or(r.mean, |i| r.per_frame[i])))
            .unwrap_or_default()
    };
    for i in 0..m.frames {
        w.write_record([
            i.to_string(),
            cell(&m.psnr, Some(i)),
            cell(&m.ssim, Some(i)),
            cell(&m.msssim, Some(i)),
            String::new(),
        ])?;
    }
    w.write_record([
        "mean".to_string(),
        cell(&m.psnr, None),
        cell(&m.ssim, None),
        cell(&m.msssim, None),
        String::new(),
    ])?;
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub(crate) fn format_score(v: f64) -> String {
    format!("{v:.6}")
}
