use proptest::prelude::*;

use sevc::container::{
    decode_sev, encode_video, encode_video_traced, parse_container, serialize_container,
    EncoderConfig, ExternalCodec, RawPngCodec,
};
use sevc::downsample::ScaleFactor;
use sevc::soft_edge::label_entropy;
use sevc::synth::moving_rectangles;
use sevc::video::{load_video, Rational};
use sevc::Error;

fn config(alpha: f64, scale: u8, k: u16, seed: u64) -> EncoderConfig {
    EncoderConfig {
        alpha,
        scale: ScaleFactor::new(scale).unwrap(),
        k,
        seed,
        ..EncoderConfig::default()
    }
}

/// 16x8 C420jpeg stream: left half dark, right half bright, 6 frames.
fn y4m_fixture() -> Vec<u8> {
    let (w, h) = (16usize, 8usize);
    let mut out = b"YUV4MPEG2 W16 H8 F25:1 Ip A1:1 C420jpeg\n".to_vec();
    for t in 0..6u8 {
        out.extend_from_slice(b"FRAME\n");
        for _y in 0..h {
            for x in 0..w {
                out.push(if x < 6 + t as usize { 30 } else { 220 });
            }
        }
        out.extend(std::iter::repeat_n(128, w * h / 4));
        out.extend(std::iter::repeat_n(128 + 10 * t, w * h / 4));
    }
    out
}

#[test]
fn y4m_to_sev_and_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clip.y4m");
    std::fs::write(&path, y4m_fixture()).unwrap();
    let video = load_video(&path, Rational::integer(1).unwrap()).unwrap();
    assert_eq!(video.len(), 6);
    assert_eq!(video.fps(), Rational::integer(25).unwrap());

    let (file, tap) = encode_video_traced(&video, &config(0.34, 1, 4, 0), &RawPngCodec).unwrap();
    assert_eq!(file.header.key_indices, vec![0, 3]);
    let bytes = serialize_container(&file);
    assert_eq!(bytes.len(), file.section_sizes().total());
    let dec = decode_sev(&parse_container(&bytes).unwrap(), &RawPngCodec).unwrap();
    assert_eq!(dec.key_frames[1].1, video.frames()[3]);
    assert_eq!(dec.maps.len(), 6);
    for m in &dec.maps {
        let want = if m.is_key {
            &tap.key_maps.iter().find(|(i, _)| *i == m.index).unwrap().1
        } else {
            &tap.g_maps.iter().find(|(i, _)| *i == m.index).unwrap().1
        };
        assert_eq!(&m.map, want);
        assert!(label_entropy(&m.map) <= 2.0);
    }
    assert!(dec.maps.iter().all(|m| m.map.distinct_edge_labels() > 0));
}

#[test]
fn key_codec_failure_is_propagated() {
    let video = moving_rectangles(4, 32, 24, 2, 0);
    let codec = ExternalCodec::new(Some("echo 'x264: no such preset' >&2; exit 2".into()), None);
    match encode_video(&video, &config(0.5, 4, 4, 0), &codec) {
        Err(Error::KeyCodec(msg)) => assert!(msg.contains("no such preset"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn bad_configurations() {
    let video = moving_rectangles(4, 32, 24, 2, 0);
    assert!(encode_video(&video, &config(0.0, 4, 4, 0), &RawPngCodec).is_err());
    assert!(encode_video(&video, &config(0.5, 4, 1, 0), &RawPngCodec).is_err());
    assert!(encode_video(&video, &config(0.5, 4, 257, 0), &RawPngCodec).is_err());
    let mut keys = config(0.5, 4, 4, 0);
    keys.key_indices = Some(vec![1, 2]);
    assert!(encode_video(&video, &keys, &RawPngCodec).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn container_bytes_round_trip(
        frames in 1usize..20,
        w in 8u32..48,
        h in 8u32..40,
        alpha in 0.05f64..=1.0,
        scale in 1u8..=8,
        k in prop::sample::select(vec![2u16, 3, 8, 16, 256]),
        seed in any::<u64>(),
    ) {
        let video = moving_rectangles(frames, w, h, 3, seed);
        let file = encode_video(&video, &config(alpha, scale, k, seed), &RawPngCodec).unwrap();
        let bytes = serialize_container(&file);
        let parsed = parse_container(&bytes).unwrap();
        prop_assert_eq!(&parsed, &file);
        prop_assert_eq!(serialize_container(&parsed), bytes);
        let dec = decode_sev(&parsed, &RawPngCodec).unwrap();
        prop_assert_eq!(dec.maps.len(), frames);
        prop_assert!(dec.maps.iter().enumerate().all(|(i, m)| m.index == i));
    }
}
