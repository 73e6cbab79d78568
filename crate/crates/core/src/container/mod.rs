//! The SEV stream and the codec that produces it.
//!
//! Only the key payload and the G-frame chunks are transmitted. The
//! decoder regenerates key-frame soft edge maps from the decoded key frames
//! with the palette and thresholds carried in the header.

mod bitrate;
mod codec;
mod format;
mod keycodec;
mod sem;

pub use bitrate::{bitrate_kbps, kbps, BitrateReport};
pub use codec::{
    decode_sev, encode_video, encode_video_traced, DecodedSev, EncoderConfig, EncoderTap,
    IndexedMap,
};
pub use format::{
    parse_container, serialize_container, KeyCodecId, SectionSizes, SevFile, SevHeader, MAGIC,
    VERSION,
};
pub use keycodec::{ExternalCodec, KeyCodecParams, KeyFrameCodec, RawPngCodec};
pub use sem::{SemFile, SEM_MAGIC};
