//! Raster types, video ingestion and the key-frame / G-frame partition.
//!
//! A [`VideoSequence`] is an ordered list of equally sized 8-bit RGB
//! [`Frame`]s. Videos are loaded either from a directory of numbered PNG
//! files or from a single 4:2:0 Y4M stream.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::RgbImage;

use crate::error::{Error, Result};

/// An 8-bit RGB raster stored row-major, three bytes per pixel.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Frame {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "frame dimensions must be non-zero, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "frame {width}x{height} needs {expected} bytes, got {}",
                data.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            data,
        })
    }

    /// A frame where every pixel has the same color.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "frame dimensions must be non-zero");
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Frame {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn same_dimensions(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_dimensions(&self, other: &Frame, context: &str) -> Result<()> {
        if self.same_dimensions(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                actual_w: other.width,
                actual_h: other.height,
                context: Some(context.to_string()),
            })
        }
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("frame buffer length matches its dimensions")
    }

    pub fn from_rgb_image(img: RgbImage) -> Self {
        let (width, height) = img.dimensions();
        Frame {
            width,
            height,
            data: img.into_raw(),
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_rgb_image()
            .save(path)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_rgb_image(img.into_rgb8()))
    }

    /// Encodes the frame as an in-memory PNG.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_rgb_image()
            .write_to(&mut out, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: PathBuf::from("<memory>"),
                source,
            })?;
        Ok(out.into_inner())
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(
            |source| Error::Image {
                path: PathBuf::from("<memory>"),
                source,
            },
        )?;
        Ok(Self::from_rgb_image(img.into_rgb8()))
    }

    /// Resamples to `width`x`height`. `Stretch` ignores aspect ratio;
    /// `CenterCrop` scales to cover the target then crops the center.
    pub fn resize(&self, width: u32, height: u32, mode: ResizeMode) -> Result<Frame> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "resize target must be non-zero, got {width}x{height}"
            )));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let img = self.to_rgb_image();
        let out = match mode {
            ResizeMode::Stretch => {
                image::imageops::resize(&img, width, height, FilterType::Triangle)
            }
            ResizeMode::CenterCrop => {
                // Scale so both sides cover the target, rounding up.
                let sx = width as f64 / self.width as f64;
                let sy = height as f64 / self.height as f64;
                let s = sx.max(sy);
                let cw = ((self.width as f64 * s).ceil() as u32).max(width);
                let ch = ((self.height as f64 * s).ceil() as u32).max(height);
                let scaled = image::imageops::resize(&img, cw, ch, FilterType::Triangle);
                let x0 = (cw - width) / 2;
                let y0 = (ch - height) / 2;
                image::imageops::crop_imm(&scaled, x0, y0, width, height).to_image()
            }
        };
        Ok(Frame::from_rgb_image(out))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResizeMode {
    #[default]
    Stretch,
    CenterCrop,
}

impl std::str::FromStr for ResizeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stretch" => Ok(ResizeMode::Stretch),
            "crop" | "center-crop" => Ok(ResizeMode::CenterCrop),
            other => Err(Error::InvalidArgument(format!(
                "unknown resize mode {other:?} (expected stretch or crop)"
            ))),
        }
    }
}

/// Frame rate as a positive rational number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub struct Rational {
    pub num: u32,
    pub den: u32,
}

impl Rational {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidArgument(format!(
                "frame rate must be positive, got {num}/{den}"
            )));
        }
        Ok(Rational { num, den })
    }

    pub fn integer(fps: u32) -> Result<Self> {
        Self::new(fps, 1)
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl std::fmt::Display for Rational {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl std::str::FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse frame rate {s:?}"));
        match s.split_once('/') {
            Some((n, d)) => Rational::new(
                n.trim().parse().map_err(|_| bad())?,
                d.trim().parse().map_err(|_| bad())?,
            ),
            None => Rational::integer(s.trim().parse().map_err(|_| bad())?),
        }
    }
}

/// Ordered frames sharing one size, plus their frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    frames: Vec<Frame>,
    fps: Rational,
}

impl VideoSequence {
    pub fn new(frames: Vec<Frame>, fps: Rational) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidArgument("a video needs at least one frame".into()))?;
        for (i, f) in frames.iter().enumerate().skip(1) {
            first.check_dimensions(f, &format!("frame {i}"))?;
        }
        Ok(VideoSequence { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn fps(&self) -> Rational {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> u32 {
        self.frames[0].width()
    }

    pub fn height(&self) -> u32 {
        self.frames[0].height()
    }

    /// Applies [`Frame::resize`] to every frame.
    pub fn resized(&self, width: u32, height: u32, mode: ResizeMode) -> Result<Self> {
        let frames = self
            .frames
            .iter()
            .map(|f| f.resize(width, height, mode))
            .collect::<Result<Vec<_>>>()?;
        Ok(VideoSequence {
            frames,
            fps: self.fps,
        })
    }

    /// Writes every frame as `{index:06}.png` into `dir`.
    pub fn save_png_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, frame) in self.frames.iter().enumerate() {
            frame.save_png(dir.join(format!("{i:06}.png")))?;
        }
        Ok(())
    }
}

/// Single-channel 8-bit plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LumaPlane {
    pub width: u32,
    pub height: u32,
    pub values: Vec<u8>,
}

impl LumaPlane {
    pub fn new(width: u32, height: u32, values: Vec<u8>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::InvalidArgument(format!(
                "luma plane {width}x{height} needs {} values, got {}",
                width as usize * height as usize,
                values.len()
            )));
        }
        Ok(LumaPlane {
            width,
            height,
            values,
        })
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.values[y as usize * self.width as usize + x as usize]
    }
}

/// BT.601 luminance of one pixel, rounded half up.
///
/// The weights have three decimal digits, so the integer form is exact.
#[inline]
pub fn luma_of(rgb: [u8; 3]) -> u8 {
    let [r, g, b] = rgb.map(u32::from);
    ((299 * r + 587 * g + 114 * b + 500) / 1000).min(255) as u8
}

/// Unrounded BT.601 luminance scaled by 1000; used as an exact sort key.
#[inline]
pub(crate) fn luma_key(rgb: [u8; 3]) -> u32 {
    let [r, g, b] = rgb.map(u32::from);
    299 * r + 587 * g + 114 * b
}

pub fn rgb_to_luma(frame: &Frame) -> LumaPlane {
    LumaPlane {
        width: frame.width(),
        height: frame.height(),
        values: frame.pixels().map(luma_of).collect(),
    }
}

/// Split of frame indices into key frames and G-frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePartition {
    n_frames: usize,
    key_indices: Vec<usize>,
    g_indices: Vec<usize>,
    alpha: f64,
}

impl FramePartition {
    /// Builds a partition from an explicit key-frame list. Index 0 must be
    /// present; the list is sorted and deduplicated.
    pub fn from_key_indices(n_frames: usize, mut keys: Vec<usize>) -> Result<Self> {
        if n_frames == 0 {
            return Err(Error::InvalidArgument("n_frames must be at least 1".into()));
        }
        keys.sort_unstable();
        keys.dedup();
        if keys.first() != Some(&0) {
            return Err(Error::InvalidArgument("frame 0 must be a key frame".into()));
        }
        if let Some(&last) = keys.last() {
            if last >= n_frames {
                return Err(Error::InvalidArgument(format!(
                    "key index {last} out of range for {n_frames} frames"
                )));
            }
        }
        let mut g_indices = Vec::with_capacity(n_frames - keys.len());
        let mut k = keys.iter().peekable();
        for i in 0..n_frames {
            if k.peek() == Some(&&i) {
                k.next();
            } else {
                g_indices.push(i);
            }
        }
        let alpha = keys.len() as f64 / n_frames as f64;
        Ok(FramePartition {
            n_frames,
            key_indices: keys,
            g_indices,
            alpha,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn key_indices(&self) -> &[usize] {
        &self.key_indices
    }

    pub fn g_indices(&self) -> &[usize] {
        &self.g_indices
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_key(&self, index: usize) -> bool {
        self.key_indices.binary_search(&index).is_ok()
    }

    /// G-frame index ranges following each key frame. Key frames that are
    /// immediately followed by another key frame (or end the video) have no
    /// GOP and are skipped.
    pub fn gops(&self) -> Vec<std::ops::Range<usize>> {
        gop_ranges(&self.key_indices, self.n_frames)
    }
}

pub(crate) fn gop_ranges(keys: &[usize], n_frames: usize) -> Vec<std::ops::Range<usize>> {
    keys.iter()
        .enumerate()
        .filter_map(|(p, &k)| {
            let end = keys.get(p + 1).copied().unwrap_or(n_frames);
            (end > k + 1).then(|| k + 1..end)
        })
        .collect()
}

/// Uniformly spaced key frames anchored at frame 0.
///
/// `N_I = max(1, round(alpha * n_frames))` key frames at indices
/// `i * floor(n_frames / N_I)`.
pub fn partition_frames(n_frames: usize, alpha: f64) -> Result<FramePartition> {
    if n_frames == 0 {
        return Err(Error::InvalidArgument("n_frames must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let n_key = ((alpha * n_frames as f64).round() as usize).clamp(1, n_frames);
    let spacing = n_frames / n_key;
    let keys = (0..n_key).map(|i| i * spacing).collect();
    let mut part = FramePartition::from_key_indices(n_frames, keys)?;
    part.alpha = alpha;
    Ok(part)
}

/// Loads a video from a directory of numbered PNG files or a `.y4m` file.
///
/// For Y4M input the frame rate comes from the stream header and `fps` is
/// ignored.
pub fn load_video(path: impl AsRef<Path>, fps: Rational) -> Result<VideoSequence> {
    let path = path.as_ref();
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_dir() {
        load_png_dir(path, fps)
    } else {
        load_y4m(path)
    }
}

fn load_png_dir(dir: &Path, fps: Rational) -> Result<VideoSequence> {
    let mut numbered = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let p = entry.path();
        let is_png = p
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if !is_png {
            continue;
        }
        let n: u64 = p
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Video {
                path: p.clone(),
                detail: "frame file name is not a number".into(),
            })?;
        numbered.push((n, p));
    }
    if numbered.is_empty() {
        return Err(Error::Video {
            path: dir.to_path_buf(),
            detail: "directory contains no PNG frames".into(),
        });
    }
    numbered.sort();
    let mut frames: Vec<Frame> = Vec::with_capacity(numbered.len());
    for (_, p) in &numbered {
        let frame = Frame::load_png(p)?;
        if let Some(first) = frames.first() {
            if !first.same_dimensions(&frame) {
                return Err(Error::Video {
                    path: p.clone(),
                    detail: format!(
                        "frame is {}x{} but the video is {}x{}",
                        frame.width(),
                        frame.height(),
                        first.width(),
                        first.height()
                    ),
                });
            }
        }
        frames.push(frame);
    }
    VideoSequence::new(frames, fps)
}

fn load_y4m(path: &Path) -> Result<VideoSequence> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let video_err = |detail: String| Error::Video {
        path: path.to_path_buf(),
        detail,
    };
    let mut dec =
        y4m::decode(BufReader::new(file)).map_err(|e| video_err(format!("bad Y4M header: {e}")))?;
    match dec.get_colorspace() {
        y4m::Colorspace::C420
        | y4m::Colorspace::C420jpeg
        | y4m::Colorspace::C420paldv
        | y4m::Colorspace::C420mpeg2 => {}
        other => return Err(video_err(format!("unsupported Y4M colorspace {other:?}"))),
    }
    let w = dec.get_width();
    let h = dec.get_height();
    let rate = dec.get_framerate();
    let fps = Rational::new(
        u32::try_from(rate.num).map_err(|_| video_err("frame rate out of range".into()))?,
        u32::try_from(rate.den).map_err(|_| video_err("frame rate out of range".into()))?,
    )
    .map_err(|e| video_err(e.to_string()))?;
    let mut frames = Vec::new();
    loop {
        match dec.read_frame() {
            Ok(f) => frames.push(yuv420_to_rgb(
                w,
                h,
                f.get_y_plane(),
                f.get_u_plane(),
                f.get_v_plane(),
            )?),
            Err(y4m::Error::EOF) => break,
            Err(e) => {
                return Err(video_err(format!(
                    "cannot read frame {}: {e}",
                    frames.len()
                )))
            }
        }
    }
    if frames.is_empty() {
        return Err(video_err("stream contains no frames".into()));
    }
    VideoSequence::new(frames, fps)
}

/// Bilinear 2x upsampling weights (in quarters) for luma coordinate `x`,
/// with chroma samples centered between luma pairs: returns the two chroma
/// indices and their weights.
#[inline]
fn chroma_taps(x: usize, chroma_len: usize) -> [(usize, u32); 2] {
    let m = x / 2;
    let clamp = |i: isize| i.clamp(0, chroma_len as isize - 1) as usize;
    if x % 2 == 0 {
        [(clamp(m as isize - 1), 1), (clamp(m as isize), 3)]
    } else {
        [(clamp(m as isize), 3), (clamp(m as isize + 1), 1)]
    }
}

/// 4:2:0 YCbCr (BT.601 full range) to RGB with bilinear chroma upsampling.
pub(crate) fn yuv420_to_rgb(w: usize, h: usize, y: &[u8], u: &[u8], v: &[u8]) -> Result<Frame> {
    let cw = w.div_ceil(2);
    let ch = h.div_ceil(2);
    if y.len() != w * h || u.len() != cw * ch || v.len() != cw * ch {
        return Err(Error::InvalidArgument(
            "Y4M plane sizes do not match header".into(),
        ));
    }
    let mut data = Vec::with_capacity(w * h * 3);
    for row in 0..h {
        let vt = chroma_taps(row, ch);
        for col in 0..w {
            let ht = chroma_taps(col, cw);
            let mut cb = 0u32;
            let mut cr = 0u32;
            for &(cy, wy) in &vt {
                for &(cx, wx) in &ht {
                    let i = cy * cw + cx;
                    cb += wy * wx * u[i] as u32;
                    cr += wy * wx * v[i] as u32;
                }
            }
            let cb = ((cb + 8) / 16) as f64 - 128.0;
            let cr = ((cr + 8) / 16) as f64 - 128.0;
            let yy = y[row * w + col] as f64;
            let to_u8 = |x: f64| (x + 0.5).floor().clamp(0.0, 255.0) as u8;
            data.push(to_u8(yy + 1.402 * cr));
            data.push(to_u8(yy - 0.344136 * cb - 0.714136 * cr));
            data.push(to_u8(yy + 1.772 * cb));
        }
    }
    Frame::new(w as u32, h as u32, data)
}
