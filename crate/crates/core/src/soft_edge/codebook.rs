//! Color codebook fitted by seeded k-means over edge-pixel colors.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::video::luma_key;

pub const MIN_K: u16 = 2;
pub const MAX_K: u16 = 256;

const MAX_ITERATIONS: usize = 50;
const CONVERGENCE_SHIFT: f64 = 0.5;

/// Palette of up to `k - 1` RGB centroids. Label 0 is reserved for
/// non-edge pixels, so label `l >= 1` refers to `centroids[l - 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Codebook {
    k: u16,
    centroids: Vec<[u8; 3]>,
}

fn palette_order(a: &[u8; 3], b: &[u8; 3]) -> std::cmp::Ordering {
    luma_key(*a).cmp(&luma_key(*b)).then(a.cmp(b))
}

pub(crate) fn check_k(k: u16) -> Result<()> {
    if !(MIN_K..=MAX_K).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "k must lie in [{MIN_K}, {MAX_K}], got {k}"
        )));
    }
    Ok(())
}

impl Codebook {
    /// Validates an explicit palette (e.g. one read back from a header).
    /// Centroids must already be in canonical order.
    pub fn new(k: u16, centroids: Vec<[u8; 3]>) -> Result<Self> {
        check_k(k)?;
        if centroids.len() > k as usize - 1 {
            return Err(Error::Inconsistent(format!(
                "{} centroids exceed k - 1 = {}",
                centroids.len(),
                k - 1
            )));
        }
        if centroids
            .windows(2)
            .any(|w| palette_order(&w[0], &w[1]) != std::cmp::Ordering::Less)
        {
            return Err(Error::Inconsistent(
                "palette is not in ascending luminance order".into(),
            ));
        }
        Ok(Codebook { k, centroids })
    }

    pub fn k(&self) -> u16 {
        self.k
    }

    pub fn centroids(&self) -> &[[u8; 3]] {
        &self.centroids
    }

    pub fn effective_count(&self) -> usize {
        self.centroids.len()
    }

    /// Index of the nearest centroid by squared RGB distance; ties go to
    /// the lower index. `None` when the palette is empty.
    #[inline]
    pub fn nearest(&self, rgb: [u8; 3]) -> Option<usize> {
        let mut best: Option<(usize, u32)> = None;
        for (i, c) in self.centroids.iter().enumerate() {
            let d = dist2_u8(rgb, *c);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }
}

#[inline]
fn dist2_u8(a: [u8; 3], b: [u8; 3]) -> u32 {
    (0..3)
        .map(|c| {
            let d = a[c] as i32 - b[c] as i32;
            (d * d) as u32
        })
        .sum()
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}

/// Uniform draw in [0, 1) from the top 53 bits of the generator.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Weighted sampling: first index whose cumulative weight exceeds
/// `u * total`.
fn sample_index(weights: impl Iterator<Item = f64>, total: f64, u: f64) -> Option<usize> {
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last_positive = Some(i);
        }
        acc += w;
        if acc > target && w > 0.0 {
            return Some(i);
        }
    }
    // Rounding may leave `acc` a hair below `target`.
    last_positive
}

/// Per-iteration diagnostics from the Lloyd loop.
#[derive(Debug, Clone, Default)]
pub(crate) struct KMeansTrace {
    /// Total weighted squared distance after each assignment step.
    pub distortion: Vec<f64>,
    pub iterations: usize,
}

/// Fits a palette of at most `k - 1` colors to the edge-pixel colors.
///
/// k-means++ initialization is driven by a ChaCha8 generator seeded with
/// `seed`; Lloyd iterations stop when no centroid moves by 0.5 or more, or
/// after 50 rounds. With fewer distinct colors than clusters the palette is
/// simply the distinct colors.
pub fn fit_codebook(edge_colors: &[[u8; 3]], k: u16, seed: u64) -> Result<Codebook> {
    fit_codebook_traced(edge_colors, k, seed).map(|(book, _)| book)
}

pub(crate) fn fit_codebook_traced(
    edge_colors: &[[u8; 3]],
    k: u16,
    seed: u64,
) -> Result<(Codebook, KMeansTrace)> {
    check_k(k)?;
    let clusters = k as usize - 1;
    let mut histogram: BTreeMap<[u8; 3], u64> = BTreeMap::new();
    for &c in edge_colors {
        *histogram.entry(c).or_default() += 1;
    }
    if histogram.len() <= clusters {
        let mut centroids: Vec<[u8; 3]> = histogram.into_keys().collect();
        centroids.sort_by(palette_order);
        return Ok((Codebook { k, centroids }, KMeansTrace::default()));
    }

    let points: Vec<[f64; 3]> = histogram
        .keys()
        .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
        .collect();
    let weights: Vec<f64> = histogram.values().map(|&w| w as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_pp_init(&points, &weights, clusters, &mut rng);

    let mut trace = KMeansTrace::default();
    let mut assignment = vec![0usize; points.len()];
    let mut nearest_d2 = vec![0.0f64; points.len()];
    for iter in 0..MAX_ITERATIONS {
        trace.iterations = iter + 1;
        let mut total = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (best, d) = nearest_center(p, &centers);
            assignment[i] = best;
            nearest_d2[i] = d;
            total += weights[i] * d;
        }
        trace.distortion.push(total);

        let mut sums = vec![[0.0f64; 3]; clusters];
        let mut mass = vec![0.0f64; clusters];
        for (i, p) in points.iter().enumerate() {
            let a = assignment[i];
            for c in 0..3 {
                sums[a][c] += weights[i] * p[c];
            }
            mass[a] += weights[i];
        }
        let mut shift: f64 = 0.0;
        for j in 0..clusters {
            let new = if mass[j] > 0.0 {
                [
                    sums[j][0] / mass[j],
                    sums[j][1] / mass[j],
                    sums[j][2] / mass[j],
                ]
            } else {
                // Re-seed at the point farthest from its nearest centroid.
                let far = (0..points.len()).fold(0, |best, i| {
                    if nearest_d2[i] > nearest_d2[best] {
                        i
                    } else {
                        best
                    }
                });
                nearest_d2[far] = 0.0;
                points[far]
            };
            shift = shift.max(dist2(&new, &centers[j]).sqrt());
            centers[j] = new;
        }
        if shift < CONVERGENCE_SHIFT {
            break;
        }
    }

    let mut centroids: Vec<[u8; 3]> = centers
        .iter()
        .map(|c| c.map(|v| (v + 0.5).floor().clamp(0.0, 255.0) as u8))
        .collect();
    centroids.sort_by(palette_order);
    centroids.dedup();
    Ok((Codebook { k, centroids }, trace))
}

fn nearest_center(p: &[f64; 3], centers: &[[f64; 3]]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = dist2(p, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    (best, best_d)
}

fn kmeans_pp_init(
    points: &[[f64; 3]],
    weights: &[f64],
    clusters: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<[f64; 3]> {
    let total: f64 = weights.iter().sum();
    let first = sample_index(weights.iter().copied(), total, unit(rng)).unwrap_or(0);
    let mut centers = vec![points[first]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &points[first])).collect();
    while centers.len() < clusters {
        let scores: Vec<f64> = d2.iter().zip(weights).map(|(d, w)| d * w).collect();
        let total: f64 = scores.iter().sum();
        // More distinct points than clusters guarantees a positive total.
        let next = sample_index(scores.iter().copied(), total, unit(rng)).unwrap_or(0);
        let c = points[next];
        centers.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c));
        }
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest};

    fn random_colors(seed: u64, n: usize, spread: u8) -> Vec<[u8; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let anchors = [
            [20u8, 30, 40],
            [200, 50, 60],
            [90, 180, 220],
            [240, 240, 10],
        ];
        (0..n)
            .map(|i| {
                let a = anchors[i % anchors.len()];
                a.map(|v| {
                    let jitter = (rng.next_u32() % (2 * spread as u32 + 1)) as i32 - spread as i32;
                    (v as i32 + jitter).clamp(0, 255) as u8
                })
            })
            .collect()
    }

    #[test]
    fn single_color() {
        let book = fit_codebook(&[[9, 8, 7]; 50], 8, 1).unwrap();
        assert_eq!(book.effective_count(), 1);
        assert_eq!(book.centroids(), &[[9, 8, 7]]);
    }

    /// Brute force over every split of the distinct colors into two
    /// non-empty groups; the best split's group means are the optimum.
    fn brute_force_two_means(colors: &[[u8; 3]]) -> Vec<[u8; 3]> {
        let mut distinct: Vec<[u8; 3]> = colors.to_vec();
        distinct.sort();
        distinct.dedup();
        let n = distinct.len();
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1..(1u32 << n) - 1 {
            let mut cost = 0.0;
            let mut means = vec![];
            for side in [true, false] {
                let members: Vec<&[u8; 3]> = colors
                    .iter()
                    .filter(|c| {
                        let idx = distinct.iter().position(|d| d == *c).unwrap();
                        ((mask >> idx) & 1 == 1) == side
                    })
                    .collect();
                let m = [0, 1, 2].map(|ch| {
                    members.iter().map(|c| c[ch] as f64).sum::<f64>() / members.len() as f64
                });
                cost += members
                    .iter()
                    .map(|c| (0..3).map(|ch| (c[ch] as f64 - m[ch]).powi(2)).sum::<f64>())
                    .sum::<f64>();
                means.push(m.map(|v| (v + 0.5).floor() as u8));
            }
            if cost < best.0 {
                best = (cost, means);
            }
        }
        let mut m = best.1;
        m.sort_by(palette_order);
        m
    }

    #[test]
    fn two_groups_match_brute_force() {
        let mut colors = vec![[0u8, 0, 0]; 10];
        colors.extend(std::iter::repeat_n([250u8, 250, 250], 10));
        let book = fit_codebook(&colors, 3, 42).unwrap();
        assert_eq!(book.centroids(), &brute_force_two_means(&colors)[..]);
        assert_eq!(book.centroids(), &[[0, 0, 0], [250, 250, 250]]);

        // Four distinct colors forming two tight groups forces actual
        // clustering rather than the distinct-color shortcut.
        let colors = vec![
            [0, 0, 0],
            [2, 2, 2],
            [250, 250, 250],
            [252, 252, 252],
            [2, 2, 2],
        ];
        for seed in 0..10 {
            let book = fit_codebook(&colors, 3, seed).unwrap();
            assert_eq!(book.centroids(), &brute_force_two_means(&colors)[..]);
        }
    }

    #[test]
    fn empty_input() {
        for k in [2, 8, 256] {
            let book = fit_codebook(&[], k, 0).unwrap();
            assert_eq!(book.effective_count(), 0);
            assert_eq!(book.k(), k);
        }
    }

    #[test]
    fn k_bounds() {
        assert!(fit_codebook(&[], 1, 0).is_err());
        assert!(fit_codebook(&[], 257, 0).is_err());
        assert!(Codebook::new(0, vec![]).is_err());
    }

    #[test]
    fn palette_is_canonically_sorted() {
        let colors = random_colors(3, 2000, 30);
        let book = fit_codebook(&colors, 16, 9).unwrap();
        assert!(book.effective_count() <= 15);
        assert!(Codebook::new(16, book.centroids().to_vec()).is_ok());
        let mut unsorted = book.centroids().to_vec();
        unsorted.reverse();
        assert!(Codebook::new(16, unsorted).is_err());
    }

    #[test]
    fn distortion_never_increases() {
        for seed in 0..20 {
            let colors = random_colors(seed, 3000, 60);
            for k in [3u16, 5, 9, 17] {
                let (_, trace) = fit_codebook_traced(&colors, k, seed).unwrap();
                assert!(!trace.distortion.is_empty());
                for w in trace.distortion.windows(2) {
                    assert!(w[1] <= w[0] * (1.0 + 1e-12), "seed {seed} k {k}: {w:?}");
                }
            }
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let colors = random_colors(77, 5000, 90);
        let a = fit_codebook(&colors, 8, 1234).unwrap();
        let b = fit_codebook(&colors, 8, 1234).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nearest_breaks_ties_low() {
        let book = Codebook::new(4, vec![[0, 0, 0], [10, 0, 0]]).unwrap();
        assert_eq!(book.nearest([5, 0, 0]), Some(0));
        assert_eq!(book.nearest([6, 0, 0]), Some(1));
        assert_eq!(Codebook::new(4, vec![]).unwrap().nearest([1, 2, 3]), None);
    }

    proptest! {
        #[test]
        fn palette_size_bounded(seed in any::<u64>(), k in 2u16..=32, n in 0usize..400) {
            let colors = random_colors(seed, n, 120);
            let book = fit_codebook(&colors, k, seed).unwrap();
            prop_assert!(book.effective_count() < k as usize);
            prop_assert!(Codebook::new(k, book.centroids().to_vec()).is_ok());
        }
    }
}
