//! First-stage key-frame codecs.
//!
//! [`RawPngCodec`] stores each key frame as a PNG and is lossless.
//! [`ExternalCodec`] shells out to user-supplied encoder/decoder commands
//! (typically an H.264 encoder), exchanging raw RGB24 frames.

use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use super::format::KeyCodecId;
use crate::error::{Error, Result};
use crate::video::{Frame, Rational};

/// Everything a key-frame codec needs besides the frames themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyCodecParams {
    pub width: u32,
    pub height: u32,
    pub fps: Rational,
    pub quality: u32,
    pub frame_count: usize,
}

pub trait KeyFrameCodec: Send + Sync {
    fn id(&self) -> KeyCodecId;

    fn encode(&self, frames: &[Frame], params: &KeyCodecParams) -> Result<Vec<u8>>;

    /// Must return exactly `params.frame_count` frames of the declared size.
    fn decode(&self, bytes: &[u8], params: &KeyCodecParams) -> Result<Vec<Frame>>;
}

fn check_decoded(frames: &[Frame], params: &KeyCodecParams) -> Result<()> {
    if frames.len() != params.frame_count {
        return Err(Error::KeyCodec(format!(
            "decoder returned {} frames, expected {}",
            frames.len(),
            params.frame_count
        )));
    }
    if let Some(f) = frames
        .iter()
        .find(|f| f.width() != params.width || f.height() != params.height)
    {
        return Err(Error::KeyCodec(format!(
            "decoded frame is {}x{}, expected {}x{}",
            f.width(),
            f.height(),
            params.width,
            params.height
        )));
    }
    Ok(())
}

/// Lossless key frames: `count:u32` then `len:u32 | png bytes` per frame.
#[derive(Debug, Clone, Copy, Default)]
pub struct RawPngCodec;

impl KeyFrameCodec for RawPngCodec {
    fn id(&self) -> KeyCodecId {
        KeyCodecId::RawPng
    }

    fn encode(&self, frames: &[Frame], _params: &KeyCodecParams) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
        for f in frames {
            let png = f.encode_png()?;
            out.extend_from_slice(&(png.len() as u32).to_le_bytes());
            out.extend_from_slice(&png);
        }
        Ok(out)
    }

    fn decode(&self, bytes: &[u8], params: &KeyCodecParams) -> Result<Vec<Frame>> {
        let short = || Error::KeyCodec("PNG key payload is truncated".into());
        let read_u32 = |at: usize| -> Result<u32> {
            bytes
                .get(at..at + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .ok_or_else(short)
        };
        let count = read_u32(0)? as usize;
        let mut pos = 4;
        let mut frames = Vec::with_capacity(count.min(params.frame_count));
        for i in 0..count {
            let len = read_u32(pos)? as usize;
            pos += 4;
            let png = bytes.get(pos..pos + len).ok_or_else(short)?;
            pos += len;
            let frame = Frame::decode_png(png)
                .map_err(|e| Error::KeyCodec(format!("key frame {i}: {e}")))?;
            frames.push(frame);
        }
        if pos != bytes.len() {
            return Err(Error::KeyCodec(format!(
                "{} stray bytes after the PNG key frames",
                bytes.len() - pos
            )));
        }
        check_decoded(&frames, params)?;
        Ok(frames)
    }
}

/// Runs external commands for E1/D1.
///
/// Templates are run through `sh -c` after substituting `{w} {h} {fps}
/// {quality} {in} {out}`. The encoder receives raw RGB24 frames on stdin
/// (also written to `{in}`) and must write its bitstream to `{out}`. The
/// decoder reads the bitstream from `{in}` and writes raw RGB24 frames to
/// `{out}`.
#[derive(Debug, Clone, Default)]
pub struct ExternalCodec {
    pub encode_cmd: Option<String>,
    pub decode_cmd: Option<String>,
}

impl ExternalCodec {
    pub fn new(encode_cmd: Option<String>, decode_cmd: Option<String>) -> Self {
        ExternalCodec {
            encode_cmd,
            decode_cmd,
        }
    }

    fn render(template: &str, params: &KeyCodecParams, input: &Path, output: &Path) -> String {
        template
            .replace("{w}", &params.width.to_string())
            .replace("{h}", &params.height.to_string())
            .replace("{fps}", &params.fps.to_string())
            .replace("{quality}", &params.quality.to_string())
            .replace("{in}", &shell_quote(input))
            .replace("{out}", &shell_quote(output))
    }

    fn run(command: &str, stdin_data: Option<&[u8]>) -> Result<()> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(if stdin_data.is_some() {
                Stdio::piped()
            } else {
                Stdio::null()
            })
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::KeyCodec(format!("cannot spawn `{command}`: {e}")))?;
        let writer = stdin_data.map(|data| {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            let data = data.to_vec();
            std::thread::spawn(move || {
                // Commands that read {in} instead may close stdin early.
                match stdin.write_all(&data) {
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e),
                    _ => Ok(()),
                }
            })
        });
        let mut stderr = String::new();
        if let Some(mut s) = child.stderr.take() {
            let _ = s.read_to_string(&mut stderr);
        }
        let status = child
            .wait()
            .map_err(|e| Error::KeyCodec(format!("`{command}`: {e}")))?;
        if let Some(w) = writer {
            w.join()
                .expect("stdin writer thread panicked")
                .map_err(|e| Error::KeyCodec(format!("`{command}`: writing stdin: {e}")))?;
        }
        if !status.success() {
            return Err(Error::KeyCodec(format!(
                "`{command}` exited with {status}; stderr: {}",
                stderr.trim()
            )));
        }
        Ok(())
    }
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

fn scratch_dir() -> Result<tempfile::TempDir> {
    tempfile::Builder::new()
        .prefix("sevc-keycodec")
        .tempdir()
        .map_err(|e| Error::KeyCodec(format!("cannot create scratch directory: {e}")))
}

impl KeyFrameCodec for ExternalCodec {
    fn id(&self) -> KeyCodecId {
        KeyCodecId::ExternalH264
    }

    fn encode(&self, frames: &[Frame], params: &KeyCodecParams) -> Result<Vec<u8>> {
        let template = self
            .encode_cmd
            .as_deref()
            .ok_or_else(|| Error::KeyCodec("no external encoder command configured".into()))?;
        let dir = scratch_dir()?;
        let input = dir.path().join("in.rgb");
        let output = dir.path().join("out.bin");
        let raw: Vec<u8> = frames
            .iter()
            .flat_map(|f| f.as_bytes().iter().copied())
            .collect();
        std::fs::write(&input, &raw).map_err(|e| Error::io(&input, e))?;
        Self::run(&Self::render(template, params, &input, &output), Some(&raw))?;
        std::fs::read(&output)
            .map_err(|e| Error::KeyCodec(format!("encoder produced no output file: {e}")))
    }

    fn decode(&self, bytes: &[u8], params: &KeyCodecParams) -> Result<Vec<Frame>> {
        let template = self
            .decode_cmd
            .as_deref()
            .ok_or_else(|| Error::KeyCodec("no external decoder command configured".into()))?;
        let dir = scratch_dir()?;
        let input = dir.path().join("in.bin");
        let output = dir.path().join("out.rgb");
        std::fs::write(&input, bytes).map_err(|e| Error::io(&input, e))?;
        Self::run(&Self::render(template, params, &input, &output), None)?;
        let raw = std::fs::read(&output)
            .map_err(|e| Error::KeyCodec(format!("decoder produced no output file: {e}")))?;
        let frame_bytes = params.width as usize * params.height as usize * 3;
        if raw.len() != frame_bytes * params.frame_count {
            return Err(Error::KeyCodec(format!(
                "decoder wrote {} bytes, expected {} frames of {frame_bytes}",
                raw.len(),
                params.frame_count
            )));
        }
        let frames = raw
            .chunks_exact(frame_bytes)
            .map(|c| Frame::new(params.width, params.height, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        check_decoded(&frames, params)?;
        Ok(frames)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize) -> KeyCodecParams {
        KeyCodecParams {
            width: 6,
            height: 4,
            fps: Rational::new(25, 1).unwrap(),
            quality: 30,
            frame_count: n,
        }
    }

    fn frames() -> Vec<Frame> {
        (0..3u8)
            .map(|i| Frame::from_fn(6, 4, |x, y| [i * 50, x as u8 * 10, y as u8 * 30]))
            .collect()
    }

    #[test]
    fn raw_png_is_lossless() {
        let f = frames();
        let bytes = RawPngCodec.encode(&f, &params(3)).unwrap();
        assert_eq!(RawPngCodec.decode(&bytes, &params(3)).unwrap(), f);
        assert!(RawPngCodec.decode(&bytes, &params(2)).is_err());
        assert!(RawPngCodec
            .decode(&bytes[..bytes.len() - 1], &params(3))
            .is_err());
    }

    #[test]
    fn external_passthrough_commands() {
        let codec = ExternalCodec::new(Some("cat > {out}".into()), Some("cp {in} {out}".into()));
        let f = frames();
        let bytes = codec.encode(&f, &params(3)).unwrap();
        assert_eq!(bytes.len(), 3 * 6 * 4 * 3);
        assert_eq!(codec.decode(&bytes, &params(3)).unwrap(), f);
    }

    #[test]
    fn external_reads_input_file_and_substitutes_placeholders() {
        let codec = ExternalCodec::new(
            Some("test {w}x{h}@{fps}q{quality} = 6x4@25q30 && cp {in} {out}".into()),
            Some("cp {in} {out}".into()),
        );
        let bytes = codec.encode(&frames(), &params(3)).unwrap();
        assert_eq!(bytes.len(), 216);
    }

    #[test]
    fn external_failure_carries_stderr() {
        let codec = ExternalCodec::new(Some("echo boom >&2; exit 3".into()), None);
        let err = codec.encode(&frames(), &params(3)).unwrap_err().to_string();
        assert!(err.contains("boom"), "{err}");
        assert!(err.contains('3'), "{err}");
        let err = codec.decode(&[], &params(3)).unwrap_err().to_string();
        assert!(err.contains("no external decoder"), "{err}");
    }

    #[test]
    fn external_decoder_size_check() {
        let codec = ExternalCodec::new(None, Some("head -c 10 {in} > {out}".into()));
        assert!(codec.decode(&[0u8; 216], &params(3)).is_err());
    }
}
