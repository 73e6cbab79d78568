//! Two-stage encoder and the matching decoder front half.

use rayon::prelude::*;

use super::format::{SevFile, SevHeader, VERSION};
use super::keycodec::{KeyCodecParams, KeyFrameCodec};
use crate::downsample::{downsample, ScaleFactor};
use crate::entropy::{compress_chunk, decompress_chunk};
use crate::error::{Error, Result};
use crate::soft_edge::{
    detect_edges, edge_colors, fit_codebook, quantize_soft_edges, soft_edge_map, CannyThresholds,
    Codebook, EdgeMap, SoftEdgeMap,
};
use crate::video::{partition_frames, rgb_to_luma, Frame, FramePartition, VideoSequence};

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    /// Key-frame ratio; ignored when `key_indices` is set.
    pub alpha: f64,
    /// Explicit key frames. Must contain 0.
    pub key_indices: Option<Vec<usize>>,
    pub scale: ScaleFactor,
    pub k: u16,
    pub thresholds: CannyThresholds,
    pub seed: u64,
    /// Passed through to the key-frame codec.
    pub quality: u32,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            alpha: 0.01,
            key_indices: None,
            scale: ScaleFactor::default(),
            k: 8,
            thresholds: CannyThresholds::default(),
            seed: 0,
            quality: 23,
        }
    }
}

impl EncoderConfig {
    pub fn partition(&self, n_frames: usize) -> Result<FramePartition> {
        match &self.key_indices {
            Some(keys) => FramePartition::from_key_indices(n_frames, keys.clone()),
            None => partition_frames(n_frames, self.alpha),
        }
    }
}

/// Encoder-side state that never enters the bitstream.
#[derive(Debug, Clone)]
pub struct EncoderTap {
    /// Maps of the decoded key frames, by frame index.
    pub key_maps: Vec<(usize, SoftEdgeMap)>,
    pub g_maps: Vec<(usize, SoftEdgeMap)>,
    pub codebook: Codebook,
}

/// Soft edge map of one frame in display order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedMap {
    pub index: usize,
    pub is_key: bool,
    pub map: SoftEdgeMap,
}

/// Everything the generative decoder needs.
#[derive(Debug, Clone)]
pub struct DecodedSev {
    pub header: SevHeader,
    pub key_frames: Vec<(usize, Frame)>,
    /// One map per frame, ordered by index.
    pub maps: Vec<IndexedMap>,
    pub codebook: Codebook,
}

pub fn encode_video(
    video: &VideoSequence,
    config: &EncoderConfig,
    key_codec: &dyn KeyFrameCodec,
) -> Result<SevFile> {
    encode_video_traced(video, config, key_codec).map(|(file, _)| file)
}

pub fn encode_video_traced(
    video: &VideoSequence,
    config: &EncoderConfig,
    key_codec: &dyn KeyFrameCodec,
) -> Result<(SevFile, EncoderTap)> {
    let (width, height) = (video.width(), video.height());
    let too_big = |what: &str, v: usize| {
        Error::InvalidArgument(format!("{what} {v} does not fit the container"))
    };
    let width16 = u16::try_from(width).map_err(|_| too_big("width", width as usize))?;
    let height16 = u16::try_from(height).map_err(|_| too_big("height", height as usize))?;
    let frame_count =
        u32::try_from(video.len()).map_err(|_| too_big("frame count", video.len()))?;
    Codebook::new(config.k, Vec::new())?;

    let partition = config.partition(video.len())?;
    let frames = video.frames();
    let key_originals: Vec<Frame> = partition
        .key_indices()
        .iter()
        .map(|&i| frames[i].clone())
        .collect();
    let params = KeyCodecParams {
        width,
        height,
        fps: video.fps(),
        quality: config.quality,
        frame_count: key_originals.len(),
    };
    let key_payload = key_codec.encode(&key_originals, &params)?;
    drop(key_originals);
    // The receiver only sees decoded key frames, so the palette is fitted
    // on those.
    let key_decoded = key_codec.decode(&key_payload, &params)?;

    let key_edges: Vec<(Frame, EdgeMap)> = key_decoded
        .par_iter()
        .map(|f| small_edges(f, config.scale, config.thresholds))
        .collect::<Result<_>>()?;
    let g_edges: Vec<(Frame, EdgeMap)> = partition
        .g_indices()
        .par_iter()
        .map(|&i| small_edges(&frames[i], config.scale, config.thresholds))
        .collect::<Result<_>>()?;
    let codebook = fit_palette(&key_edges, &g_edges, config)?;

    let quantize_all = |edges: &[(Frame, EdgeMap)], indices: &[usize]| {
        edges
            .par_iter()
            .zip(indices.par_iter())
            .map(|((small, e), &i)| Ok((i, quantize_soft_edges(small, e, &codebook)?)))
            .collect::<Result<Vec<_>>>()
    };
    let key_maps = quantize_all(&key_edges, partition.key_indices())?;
    let g_maps = quantize_all(&g_edges, partition.g_indices())?;
    drop(g_edges);

    let mut groups = Vec::new();
    let mut rest = g_maps.as_slice();
    for gop in partition.gops() {
        let (head, tail) = rest.split_at(gop.len());
        groups.push(head);
        rest = tail;
    }
    let chunks = groups
        .par_iter()
        .map(|group| {
            let maps: Vec<SoftEdgeMap> = group.iter().map(|(_, m)| m.clone()).collect();
            compress_chunk(&maps)
        })
        .collect::<Result<Vec<_>>>()?;

    let header = SevHeader {
        version: VERSION,
        width: width16,
        height: height16,
        fps: video.fps(),
        frame_count,
        scale: config.scale.get(),
        k: config.k,
        kmeans_seed: config.seed,
        canny_low: config.thresholds.low,
        canny_high: config.thresholds.high,
        key_codec: key_codec.id(),
        key_indices: partition.key_indices().iter().map(|&i| i as u32).collect(),
        palette: codebook.centroids().to_vec(),
    };
    header.validate()?;
    let file = SevFile {
        header,
        key_payload,
        chunks,
    };
    let tap = EncoderTap {
        key_maps,
        g_maps,
        codebook,
    };
    Ok((file, tap))
}

/// Fits on decoded key-frame edge colors. When the key frames carry no
/// edges at all but G-frames do, the G-frame edge colors are used instead;
/// the palette travels in the header either way.
fn fit_palette(
    key_edges: &[(Frame, EdgeMap)],
    g_edges: &[(Frame, EdgeMap)],
    config: &EncoderConfig,
) -> Result<Codebook> {
    let colors = |set: &[(Frame, EdgeMap)]| -> Result<Vec<[u8; 3]>> {
        let mut out = Vec::new();
        for (small, edges) in set {
            out.extend(edge_colors(small, edges)?);
        }
        Ok(out)
    };
    let mut sample = colors(key_edges)?;
    if sample.is_empty() {
        sample = colors(g_edges)?;
    }
    fit_codebook(&sample, config.k, config.seed)
}

fn small_edges(
    frame: &Frame,
    scale: ScaleFactor,
    thresholds: CannyThresholds,
) -> Result<(Frame, EdgeMap)> {
    let small = downsample(frame, scale);
    let edges = detect_edges(&rgb_to_luma(&small), thresholds)?;
    Ok((small, edges))
}

/// Decodes key frames, regenerates their maps from the header palette and
/// thresholds, and expands every G-frame chunk.
pub fn decode_sev(file: &SevFile, key_codec: &dyn KeyFrameCodec) -> Result<DecodedSev> {
    let header = &file.header;
    header.validate()?;
    if key_codec.id() != header.key_codec {
        return Err(Error::Inconsistent(format!(
            "stream uses key codec {:?} but {:?} was supplied",
            header.key_codec,
            key_codec.id()
        )));
    }
    let codebook = header.codebook()?;
    let thresholds = header.thresholds()?;
    let scale = ScaleFactor::new(header.scale)?;
    let keys = header.key_indices_usize();
    let gops = header.gops();
    if gops.len() != file.chunks.len() {
        return Err(Error::Inconsistent(format!(
            "{} chunks for {} GOPs",
            file.chunks.len(),
            gops.len()
        )));
    }

    let params = KeyCodecParams {
        width: header.width as u32,
        height: header.height as u32,
        fps: header.fps,
        quality: 0,
        frame_count: keys.len(),
    };
    let key_frames = key_codec.decode(&file.key_payload, &params)?;

    let key_maps: Vec<SoftEdgeMap> = key_frames
        .par_iter()
        .map(|f| {
            let small = downsample(f, scale);
            soft_edge_map(&small, thresholds, &codebook)
        })
        .collect::<Result<_>>()?;

    let (mw, mh) = header.map_dimensions();
    let g_groups: Vec<Vec<SoftEdgeMap>> = file
        .chunks
        .par_iter()
        .enumerate()
        .map(|(g, chunk)| {
            let wrap = |e: Error| Error::CorruptChunk {
                gop: g,
                source: Box::new(e),
            };
            let maps = decompress_chunk(chunk).map_err(wrap)?;
            if maps.len() != gops[g].len() {
                return Err(wrap(Error::Inconsistent(format!(
                    "chunk holds {} frames, GOP has {}",
                    maps.len(),
                    gops[g].len()
                ))));
            }
            for m in &maps {
                if (m.width(), m.height(), m.k()) != (mw, mh, header.k) {
                    return Err(wrap(Error::Inconsistent(format!(
                        "map is {}x{} k={}, header says {mw}x{mh} k={}",
                        m.width(),
                        m.height(),
                        m.k(),
                        header.k
                    ))));
                }
                if m.labels()
                    .iter()
                    .any(|&l| l as usize > codebook.effective_count())
                {
                    return Err(wrap(Error::Inconsistent(
                        "label outside the transmitted palette".into(),
                    )));
                }
            }
            Ok(maps)
        })
        .collect::<Result<_>>()?;

    let mut maps: Vec<IndexedMap> = keys
        .iter()
        .zip(key_maps)
        .map(|(&index, map)| IndexedMap {
            index,
            is_key: true,
            map,
        })
        .chain(gops.iter().zip(g_groups).flat_map(|(range, group)| {
            range.clone().zip(group).map(|(index, map)| IndexedMap {
                index,
                is_key: false,
                map,
            })
        }))
        .collect();
    maps.sort_by_key(|m| m.index);

    Ok(DecodedSev {
        header: header.clone(),
        key_frames: keys.into_iter().zip(key_frames).collect(),
        maps,
        codebook,
    })
}
