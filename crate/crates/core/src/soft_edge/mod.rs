//! Soft edge detection: Canny edges colored by a k-level vector quantizer.
//!
//! A soft edge map assigns every pixel a label in `[0, k)`. Label 0 marks
//! non-edge pixels; an edge pixel gets `1 + index` of the palette color
//! nearest to its (downsampled) RGB value.

mod canny;
mod codebook;

pub use canny::{detect_edges, CannyThresholds, EdgeMap};
#[cfg(test)]
pub(crate) use codebook::fit_codebook_traced;
pub use codebook::{fit_codebook, Codebook, MAX_K, MIN_K};

use crate::error::{Error, Result};
use crate::video::{luma_of, rgb_to_luma, Frame, LumaPlane};

/// Per-pixel label map produced by [`quantize_soft_edges`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SoftEdgeMap {
    width: u32,
    height: u32,
    k: u16,
    labels: Vec<u8>,
}

impl SoftEdgeMap {
    pub fn new(width: u32, height: u32, k: u16, labels: Vec<u8>) -> Result<Self> {
        codebook::check_k(k)?;
        if labels.len() != width as usize * height as usize {
            return Err(Error::InvalidArgument(format!(
                "soft edge map {width}x{height} needs {} labels, got {}",
                width as usize * height as usize,
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as u16 >= k) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for k = {k}"
            )));
        }
        Ok(SoftEdgeMap {
            width,
            height,
            k,
            labels,
        })
    }

    pub fn zeros(width: u32, height: u32, k: u16) -> Result<Self> {
        Self::new(width, height, k, vec![0; width as usize * height as usize])
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

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// Number of distinct non-zero labels present.
    pub fn distinct_edge_labels(&self) -> usize {
        let mut seen = [false; 256];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        seen[1..].iter().filter(|&&s| s).count()
    }
}

/// Colors of the pixels marked in `edges`, in raster order.
pub fn edge_colors(frame: &Frame, edges: &EdgeMap) -> Result<Vec<[u8; 3]>> {
    check_edge_dims(frame, edges)?;
    Ok(frame
        .pixels()
        .zip(&edges.mask)
        .filter(|(_, &m)| m != 0)
        .map(|(p, _)| p)
        .collect())
}

fn check_edge_dims(frame: &Frame, edges: &EdgeMap) -> Result<()> {
    if frame.width() != edges.width || frame.height() != edges.height {
        return Err(Error::DimensionMismatch {
            expected_w: frame.width(),
            expected_h: frame.height(),
            actual_w: edges.width,
            actual_h: edges.height,
            context: Some("edge map".into()),
        });
    }
    Ok(())
}

/// Labels each pixel: 0 off-edge, otherwise `1 + nearest centroid`.
pub fn quantize_soft_edges(frame: &Frame, edges: &EdgeMap, book: &Codebook) -> Result<SoftEdgeMap> {
    check_edge_dims(frame, edges)?;
    let has_edges = edges.mask.iter().any(|&m| m != 0);
    if has_edges && book.effective_count() == 0 {
        return Err(Error::Inconsistent(
            "edge pixels present but the codebook has no centroids".into(),
        ));
    }
    let labels = frame
        .pixels()
        .zip(&edges.mask)
        .map(|(p, &m)| {
            if m == 0 {
                0
            } else {
                1 + book.nearest(p).expect("non-empty codebook") as u8
            }
        })
        .collect();
    Ok(SoftEdgeMap {
        width: frame.width(),
        height: frame.height(),
        k: book.k(),
        labels,
    })
}

/// Canny on the frame's luma followed by quantization against `book`.
pub fn soft_edge_map(
    frame: &Frame,
    thresholds: CannyThresholds,
    book: &Codebook,
) -> Result<SoftEdgeMap> {
    let edges = detect_edges(&rgb_to_luma(frame), thresholds)?;
    quantize_soft_edges(frame, &edges, book)
}

/// Shannon entropy of the label histogram in bits per symbol.
pub fn label_entropy(map: &SoftEdgeMap) -> f64 {
    let mut hist = [0u64; 256];
    for &l in &map.labels {
        hist[l as usize] += 1;
    }
    let n = map.labels.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Grayscale view of a map: label 0 is black, other labels show the
/// luminance of their centroid.
pub fn render_grayscale(map: &SoftEdgeMap, book: &Codebook) -> Result<LumaPlane> {
    let lut: Vec<u8> = std::iter::once(0)
        .chain(book.centroids().iter().map(|&c| luma_of(c)))
        .collect();
    let values = map
        .labels
        .iter()
        .map(|&l| {
            lut.get(l as usize).copied().ok_or_else(|| {
                Error::Inconsistent(format!(
                    "label {l} has no centroid (palette holds {})",
                    book.effective_count()
                ))
            })
        })
        .collect::<Result<Vec<u8>>>()?;
    LumaPlane::new(map.width, map.height, values)
}
