//! Integer Canny edge detector with frozen stage constants.
//!
//! Stages: 5x5 Gaussian blur (sigma 1.4, the classic /159 integer kernel),
//! 3x3 Sobel, non-maximum suppression over four quantized directions and
//! 8-connected double-threshold hysteresis. Magnitudes are compared in
//! squared integer form so results do not depend on floating point.

use crate::error::{Error, Result};
use crate::video::LumaPlane;

const GAUSS_5X5: [[u32; 5]; 5] = [
    [2, 4, 5, 4, 2],
    [4, 9, 12, 9, 4],
    [5, 12, 15, 12, 5],
    [4, 9, 12, 9, 4],
    [2, 4, 5, 4, 2],
];
const GAUSS_SUM: u32 = 159;

/// tan(22.5 deg) scaled by 10^6.
const TAN_22_5: i64 = 414_214;
const TAN_SCALE: i64 = 1_000_000;

/// Binary edge mask, one byte (0 or 1) per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    pub width: u32,
    pub height: u32,
    pub mask: Vec<u8>,
}

impl EdgeMap {
    pub fn empty(width: u32, height: u32) -> Self {
        EdgeMap {
            width,
            height,
            mask: vec![0; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn is_edge(&self, x: u32, y: u32) -> bool {
        self.mask[y as usize * self.width as usize + x as usize] != 0
    }

    pub fn edge_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m != 0).count()
    }
}

/// Hysteresis thresholds on the Sobel gradient magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CannyThresholds {
    pub low: u8,
    pub high: u8,
}

impl CannyThresholds {
    pub fn new(low: u8, high: u8) -> Result<Self> {
        if low >= high {
            return Err(Error::InvalidArgument(format!(
                "canny low threshold ({low}) must be below high ({high})"
            )));
        }
        Ok(CannyThresholds { low, high })
    }
}

impl Default for CannyThresholds {
    fn default() -> Self {
        CannyThresholds { low: 50, high: 150 }
    }
}

#[inline]
fn clamp_idx(v: i64, len: u32) -> usize {
    v.clamp(0, len as i64 - 1) as usize
}

fn gaussian_blur(luma: &LumaPlane) -> Vec<i32> {
    let (w, h) = (luma.width, luma.height);
    let mut out = Vec::with_capacity(luma.values.len());
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = 0u32;
            for (ky, row) in GAUSS_5X5.iter().enumerate() {
                let sy = clamp_idx(y + ky as i64 - 2, h);
                for (kx, &kw) in row.iter().enumerate() {
                    let sx = clamp_idx(x + kx as i64 - 2, w);
                    acc += kw * luma.values[sy * w as usize + sx] as u32;
                }
            }
            out.push(((acc + GAUSS_SUM / 2) / GAUSS_SUM) as i32);
        }
    }
    out
}

#[derive(Clone, Copy)]
enum Direction {
    /// Gradient along x; compare left/right neighbors.
    Horizontal,
    /// Gradient along y; compare up/down neighbors.
    Vertical,
    /// Gradient along the main diagonal (down-right).
    Diagonal,
    /// Gradient along the anti-diagonal (down-left).
    AntiDiagonal,
}

impl Direction {
    fn quantize(gx: i32, gy: i32) -> Self {
        let (ax, ay) = (gx.unsigned_abs() as i64, gy.unsigned_abs() as i64);
        if ay * TAN_SCALE <= ax * TAN_22_5 {
            Direction::Horizontal
        } else if ax * TAN_SCALE <= ay * TAN_22_5 {
            Direction::Vertical
        } else if (gx > 0) == (gy > 0) {
            Direction::Diagonal
        } else {
            Direction::AntiDiagonal
        }
    }

    /// Neighbor offsets `(before, after)`; `before` is the one with the
    /// smaller x (or smaller y for vertical).
    fn neighbors(self) -> [(i64, i64); 2] {
        match self {
            Direction::Horizontal => [(-1, 0), (1, 0)],
            Direction::Vertical => [(0, -1), (0, 1)],
            Direction::Diagonal => [(-1, -1), (1, 1)],
            Direction::AntiDiagonal => [(-1, 1), (1, -1)],
        }
    }
}

/// Runs the full Canny pipeline on a luma plane.
pub fn detect_edges(luma: &LumaPlane, thresholds: CannyThresholds) -> Result<EdgeMap> {
    let CannyThresholds { low, high } = CannyThresholds::new(thresholds.low, thresholds.high)?;
    let (w, h) = (luma.width, luma.height);
    let (wu, hu) = (w as usize, h as usize);
    let blurred = gaussian_blur(luma);
    let at = |x: i64, y: i64| blurred[clamp_idx(y, h) * wu + clamp_idx(x, w)];

    let mut mag2 = vec![0u32; wu * hu];
    let mut dirs = Vec::with_capacity(wu * hu);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let gx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
            mag2[y as usize * wu + x as usize] = (gx * gx + gy * gy) as u32;
            dirs.push(Direction::quantize(gx, gy));
        }
    }

    // Out-of-frame neighbors count as zero magnitude. Plateaus of equal
    // magnitude keep only the pixel on the `before` side.
    let mag_at = |x: i64, y: i64| -> u32 {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0
        } else {
            mag2[y as usize * wu + x as usize]
        }
    };
    let low2 = (low as u32) * (low as u32);
    let high2 = (high as u32) * (high as u32);
    // 0 = suppressed, 1 = weak, 2 = strong
    let mut class = vec![0u8; wu * hu];
    let mut stack = Vec::new();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * wu + x as usize;
            let m = mag2[i];
            if m < low2 || m == 0 {
                continue;
            }
            let [(bx, by), (ax, ay)] = dirs[i].neighbors();
            if m > mag_at(x + bx, y + by) && m >= mag_at(x + ax, y + ay) {
                if m >= high2 {
                    class[i] = 2;
                    stack.push(i);
                } else {
                    class[i] = 1;
                }
            }
        }
    }

    let mut edges = EdgeMap::empty(w, h);
    for &i in &stack {
        edges.mask[i] = 1;
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % wu) as i64, (i / wu) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * wu + nx as usize;
                if class[j] != 0 && edges.mask[j] == 0 {
                    edges.mask[j] = 1;
                    stack.push(j);
                }
            }
        }
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straight-line floating-point Canny written from the textbook
    /// description, used to cross-check the integer implementation.
    #[allow(clippy::needless_range_loop)]
    fn reference_canny(plane: &[Vec<f64>], low: f64, high: f64) -> Vec<Vec<u8>> {
        let h = plane.len();
        let w = plane[0].len();
        let get = |p: &Vec<Vec<f64>>, x: isize, y: isize| {
            let yy = y.max(0).min(h as isize - 1) as usize;
            let xx = x.max(0).min(w as isize - 1) as usize;
            p[yy][xx]
        };
        let k = [
            [2.0, 4.0, 5.0, 4.0, 2.0],
            [4.0, 9.0, 12.0, 9.0, 4.0],
            [5.0, 12.0, 15.0, 12.0, 5.0],
            [4.0, 9.0, 12.0, 9.0, 4.0],
            [2.0, 4.0, 5.0, 4.0, 2.0],
        ];
        let src = plane.to_vec();
        let mut blur = vec![vec![0.0; w]; h];
        for y in 0..h {
            for x in 0..w {
                let mut s = 0.0;
                for j in 0..5 {
                    for i in 0..5 {
                        s += k[j][i]
                            * get(
                                &src,
                                x as isize + i as isize - 2,
                                y as isize + j as isize - 2,
                            );
                    }
                }
                blur[y][x] = (s / 159.0 + 0.5).floor();
            }
        }
        let mut mag = vec![vec![0.0; w]; h];
        let mut ang = vec![vec![0.0; w]; h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let b = |dx: isize, dy: isize| get(&blur, x + dx, y + dy);
                let gx = b(1, -1) + 2.0 * b(1, 0) + b(1, 1) - b(-1, -1) - 2.0 * b(-1, 0) - b(-1, 1);
                let gy = b(-1, 1) + 2.0 * b(0, 1) + b(1, 1) - b(-1, -1) - 2.0 * b(0, -1) - b(1, -1);
                mag[y as usize][x as usize] = (gx * gx + gy * gy).sqrt();
                let mut a = gy.atan2(gx).to_degrees();
                if a < 0.0 {
                    a += 180.0;
                }
                ang[y as usize][x as usize] = a;
            }
        }
        let m = |x: isize, y: isize| {
            if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                0.0
            } else {
                mag[y as usize][x as usize]
            }
        };
        let mut cls = vec![vec![0u8; w]; h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let v = m(x, y);
                if v < low || v == 0.0 {
                    continue;
                }
                let a = ang[y as usize][x as usize];
                let (before, after) = if !(22.5..157.5).contains(&a) {
                    (m(x - 1, y), m(x + 1, y))
                } else if a < 67.5 {
                    (m(x - 1, y - 1), m(x + 1, y + 1))
                } else if a < 112.5 {
                    (m(x, y - 1), m(x, y + 1))
                } else {
                    (m(x - 1, y + 1), m(x + 1, y - 1))
                };
                if v > before && v >= after {
                    cls[y as usize][x as usize] = if v >= high { 2 } else { 1 };
                }
            }
        }
        let mut out = vec![vec![0u8; w]; h];
        fn grow(cls: &Vec<Vec<u8>>, out: &mut Vec<Vec<u8>>, x: usize, y: usize) {
            if out[y][x] == 1 {
                return;
            }
            out[y][x] = 1;
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    let nx = x as i32 + dx;
                    let ny = y as i32 + dy;
                    if nx >= 0
                        && ny >= 0
                        && (ny as usize) < cls.len()
                        && (nx as usize) < cls[0].len()
                        && cls[ny as usize][nx as usize] > 0
                    {
                        grow(cls, out, nx as usize, ny as usize);
                    }
                }
            }
        }
        for y in 0..h {
            for x in 0..w {
                if cls[y][x] == 2 {
                    grow(&cls, &mut out, x, y);
                }
            }
        }
        out
    }

    fn plane_from(rows: &[Vec<u8>]) -> LumaPlane {
        LumaPlane::new(
            rows[0].len() as u32,
            rows.len() as u32,
            rows.iter().flatten().copied().collect(),
        )
        .unwrap()
    }

    fn check_against_reference(rows: &[Vec<u8>], low: u8, high: u8) -> EdgeMap {
        let plane = plane_from(rows);
        let got = detect_edges(&plane, CannyThresholds::new(low, high).unwrap()).unwrap();
        let fl: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| v as f64).collect())
            .collect();
        let want = reference_canny(&fl, low as f64, high as f64);
        let want: Vec<u8> = want.into_iter().flatten().collect();
        assert_eq!(got.mask, want);
        got
    }

    #[test]
    fn constant_plane_has_no_edges() {
        let plane = LumaPlane::new(16, 9, vec![77; 144]).unwrap();
        let e = detect_edges(&plane, CannyThresholds::default()).unwrap();
        assert_eq!(e.edge_count(), 0);
    }

    #[test]
    fn vertical_step_gives_single_column() {
        let c = 4usize;
        let rows: Vec<Vec<u8>> = (0..8)
            .map(|_| (0..8).map(|x| if x < c { 0 } else { 255 }).collect())
            .collect();
        let e = check_against_reference(&rows, 50, 150);
        for y in 0..8u32 {
            for x in 0..8u32 {
                assert_eq!(e.is_edge(x, y), x as usize == c - 1, "({x},{y})");
            }
        }
    }

    #[test]
    fn matches_reference_on_mixed_fixtures() {
        let diag: Vec<Vec<u8>> = (0..8)
            .map(|y| (0..8).map(|x| if x + y < 8 { 20 } else { 220 }).collect())
            .collect();
        check_against_reference(&diag, 50, 150);

        let square: Vec<Vec<u8>> = (0..12)
            .map(|y| {
                (0..12)
                    .map(|x| {
                        if (3..9).contains(&x) && (4..10).contains(&y) {
                            200
                        } else {
                            30
                        }
                    })
                    .collect()
            })
            .collect();
        let e = check_against_reference(&square, 50, 150);
        assert!(e.edge_count() > 0);

        // Pseudo-random texture exercises every direction bucket.
        let mut s = 12345u32;
        let noise: Vec<Vec<u8>> = (0..16)
            .map(|_| {
                (0..16)
                    .map(|_| {
                        s = s.wrapping_mul(1103515245).wrapping_add(12345);
                        (s >> 24) as u8
                    })
                    .collect()
            })
            .collect();
        for (lo, hi) in [(10, 40), (50, 150), (100, 250)] {
            check_against_reference(&noise, lo, hi);
        }
    }

    #[test]
    fn weak_gradients_below_low_are_dropped() {
        // Ramp of 1 level per pixel: |G| = 8, well under low=50.
        let rows: Vec<Vec<u8>> = (0..10)
            .map(|_| (0..10).map(|x| x as u8).collect())
            .collect();
        let e = detect_edges(&plane_from(&rows), CannyThresholds::default()).unwrap();
        assert_eq!(e.edge_count(), 0);
    }

    #[test]
    fn thresholds_must_be_ordered() {
        let plane = LumaPlane::new(4, 4, vec![0; 16]).unwrap();
        assert!(CannyThresholds::new(150, 150).is_err());
        assert!(detect_edges(
            &plane,
            CannyThresholds {
                low: 200,
                high: 100
            }
        )
        .is_err());
    }
}
