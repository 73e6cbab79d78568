use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sevc::container::{
    bitrate_kbps, decode_sev, encode_video, parse_container, serialize_container, EncoderConfig,
    ExternalCodec, KeyCodecId, KeyFrameCodec, RawPngCodec, SemFile,
};
use sevc::downsample::ScaleFactor;
use sevc::metrics::{evaluate_sequences, write_metrics_csv, Metric};
use sevc::rd::{run_sweep, write_gnuplot, write_sweep_csv, SweepConfig};
use sevc::soft_edge::CannyThresholds;
use sevc::video::{load_video, Rational, ResizeMode};
use sevc::Error;

#[derive(Parser)]
#[command(name = "sevc", version, about = "Soft-edge video codec tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a PNG directory or Y4M file into a .sev stream.
    Encode(EncodeArgs),
    /// Decode key frames and soft edge maps from a .sev stream.
    Decode(DecodeArgs),
    /// Print the header and section sizes of a .sev stream as JSON.
    Inspect {
        #[arg(long)]
        input: PathBuf,
    },
    /// Full-reference metrics between two PNG directories.
    Metrics(MetricsArgs),
    /// Rate-distortion sweep over parameter grids.
    RdSweep(SweepArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KeyCodecKind {
    Raw,
    Ext,
}

#[derive(Args)]
struct KeyCodecArgs {
    /// First-stage codec for key frames.
    #[arg(long = "keyframe-codec", value_enum, default_value = "raw")]
    kind: KeyCodecKind,
    /// Encoder template; placeholders {w} {h} {fps} {quality} {in} {out}.
    #[arg(long)]
    ext_cmd: Option<String>,
    /// Decoder template, reading {in} and writing raw RGB24 to {out}.
    #[arg(long)]
    ext_decode_cmd: Option<String>,
}

impl KeyCodecArgs {
    fn build(&self) -> Box<dyn KeyFrameCodec> {
        match self.kind {
            KeyCodecKind::Raw => Box::new(RawPngCodec),
            KeyCodecKind::Ext => Box::new(ExternalCodec::new(
                self.ext_cmd.clone(),
                self.ext_decode_cmd.clone(),
            )),
        }
    }
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Explicit key frames, e.g. 0,40,90. Overrides --alpha.
    #[arg(long, value_delimiter = ',')]
    key_indices: Option<Vec<usize>>,
    #[arg(long, default_value_t = 8)]
    scale: u8,
    #[arg(long, default_value_t = 8)]
    k: u16,
    #[arg(long, default_value_t = 50)]
    canny_low: u8,
    #[arg(long, default_value_t = 150)]
    canny_high: u8,
    #[arg(long, default_value_t = 0)]
    kmeans_seed: u64,
    /// Frame rate for PNG input, e.g. 25 or 30000/1001.
    #[arg(long, default_value = "25")]
    fps: Rational,
    /// Passed to the key-frame codec as {quality}.
    #[arg(long, default_value_t = 23)]
    quality: u32,
    /// Resize every frame to WxH before encoding.
    #[arg(long, value_parser = parse_size)]
    resize: Option<(u32, u32)>,
    #[arg(long, default_value = "stretch")]
    resize_mode: ResizeMode,
    #[command(flatten)]
    codec: KeyCodecArgs,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Write decoded key frames here as %06d.png (frame index).
    #[arg(long)]
    emit_keyframes: Option<PathBuf>,
    /// Write every soft edge map to a SEM file.
    #[arg(long)]
    emit_sem: Option<PathBuf>,
    /// Needed when the stream was encoded with the external codec.
    #[arg(long)]
    ext_decode_cmd: Option<String>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    dist: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "psnr,ssim,msssim")]
    metrics: Vec<Metric>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.005,0.01,0.015")]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "4,8")]
    scales: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_value = "2,8,16")]
    ks: Vec<u16>,
    #[arg(long, value_delimiter = ',', default_value = "23")]
    qualities: Vec<u32>,
    #[arg(long)]
    out: PathBuf,
    /// Directory holding reconstructions as a{alpha}_s{scale}_k{k}_q{quality}/.
    #[arg(long)]
    recon: Option<PathBuf>,
    /// Also write a gnuplot data file.
    #[arg(long)]
    gnuplot: Option<PathBuf>,
    #[arg(long, default_value = "25")]
    fps: Rational,
    #[arg(long, default_value_t = 50)]
    canny_low: u8,
    #[arg(long, default_value_t = 150)]
    canny_high: u8,
    #[arg(long, default_value_t = 0)]
    kmeans_seed: u64,
    #[command(flatten)]
    codec: KeyCodecArgs,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("{v:?}: {e}"));
    let (w, h) = (parse(w)?, parse(h)?);
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>, Error> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn print_json(value: &serde_json::Value) {
    let mut out = io::stdout().lock();
    let _ = serde_json::to_writer_pretty(&mut out, value);
    let _ = writeln!(out);
}

fn encode(args: EncodeArgs) -> Result<(), Error> {
    let mut video = load_video(&args.input, args.fps)?;
    if let Some((w, h)) = args.resize {
        video = video.resized(w, h, args.resize_mode)?;
    }
    let config = EncoderConfig {
        alpha: args.alpha,
        key_indices: args.key_indices,
        scale: ScaleFactor::new(args.scale)?,
        k: args.k,
        thresholds: CannyThresholds::new(args.canny_low, args.canny_high)?,
        seed: args.kmeans_seed,
        quality: args.quality,
    };
    let codec = args.codec.build();
    let file = encode_video(&video, &config, codec.as_ref())?;
    write_file(&args.output, &serialize_container(&file))?;
    print_json(&json!({
        "output": args.output,
        "frames": file.header.frame_count,
        "key_frames": file.header.key_frame_count(),
        "chunks": file.chunks.len(),
        "bitrate": bitrate_kbps(&file),
    }));
    Ok(())
}

fn decode(args: DecodeArgs) -> Result<(), Error> {
    let file = parse_container(&read_file(&args.input)?)?;
    let codec: Box<dyn KeyFrameCodec> = match file.header.key_codec {
        KeyCodecId::RawPng => Box::new(RawPngCodec),
        KeyCodecId::ExternalH264 => Box::new(ExternalCodec::new(None, args.ext_decode_cmd)),
    };
    let decoded = decode_sev(&file, codec.as_ref())?;
    if let Some(dir) = &args.emit_keyframes {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        for (index, frame) in &decoded.key_frames {
            frame.save_png(dir.join(format!("{index:06}.png")))?;
        }
    }
    if let Some(path) = &args.emit_sem {
        write_file(path, &SemFile::from_decoded(&decoded).to_bytes()?)?;
    }
    print_json(&json!({
        "frames": decoded.maps.len(),
        "key_frames": decoded.key_frames.len(),
        "palette": decoded.codebook.centroids(),
    }));
    Ok(())
}

fn inspect(input: &Path) -> Result<(), Error> {
    let file = parse_container(&read_file(input)?)?;
    print_json(&json!({
        "header": file.header,
        "effective_count": file.header.effective_count(),
        "map_size": file.header.map_dimensions(),
        "chunks": file.chunks.len(),
        "sections": file.section_sizes(),
        "bitrate": bitrate_kbps(&file),
    }));
    Ok(())
}

fn metrics(args: MetricsArgs) -> Result<(), Error> {
    // Frame rate does not affect the scores.
    let fps = Rational::integer(25)?;
    let reference = load_video(&args.reference, fps)?;
    let distorted = load_video(&args.dist, fps)?;
    let scores = evaluate_sequences(reference.frames(), distorted.frames(), &args.metrics)?;
    match &args.out {
        Some(path) => {
            let f = fs::File::create(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            write_metrics_csv(io::BufWriter::new(f), &scores)
        }
        None => write_metrics_csv(io::stdout().lock(), &scores),
    }
}

fn rd_sweep(args: SweepArgs) -> Result<(), Error> {
    let config = SweepConfig {
        input: args.input,
        fps: args.fps,
        alphas: args.alphas,
        scales: args.scales,
        ks: args.ks,
        qualities: args.qualities,
        thresholds: CannyThresholds::new(args.canny_low, args.canny_high)?,
        seed: args.kmeans_seed,
        recon_dir: args.recon,
    };
    let codec = args.codec.build();
    let rows = run_sweep(&config, codec.as_ref())?;
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &rows)?;
    write_file(&args.out, &csv)?;
    if let Some(path) = &args.gnuplot {
        let mut data = Vec::new();
        write_gnuplot(&mut data, &rows).expect("writing to memory");
        write_file(path, &data)?;
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    eprintln!("{} grid points, {failed} failed", rows.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Inspect { input } => inspect(&input),
        Command::Metrics(a) => metrics(a),
        Command::RdSweep(a) => rd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
