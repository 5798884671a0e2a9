//! Application-layer telehaptic header.
//!
//! ```text
//!  0               1               2               3
//!  0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1
//! +-----+-----+-+-+-----------------------------------------------+
//! |  M  |  k  |D|X|          notification delay (24, us)          |
//! +-----+-----+-+-+-----------------------------------------------+
//! |              haptic sample timestamp (32, ms)                 |
//! +-------------------------------+-------------------------------+
//! |       A/V frame number        |       A/V payload size        |   present iff M != 0
//! +---------------+---------------+-------------------------------+
//! | A/V fragment  |
//! +---------------+
//! ```
//!
//! All multi-byte fields are big-endian; bit 0 of a row is the most
//! significant bit of its first byte.

use crate::error::WireError;

/// Bytes in the header of a haptic-only packet.
pub const HAPTIC_HEADER_LEN: usize = 8;
/// Bytes in the header of a packet that also carries audio or video.
pub const AV_HEADER_LEN: usize = 13;

/// Ethernet framing charged per packet (header, FCS, preamble, gap).
pub const LINK_OVERHEAD_BYTES: u32 = 26;
pub const NETWORK_OVERHEAD_BYTES: u32 = 20;
pub const TRANSPORT_OVERHEAD_BYTES: u32 = 8;
/// Link + network + transport bytes below the application header.
pub const LOWER_LAYER_OVERHEAD_BYTES: u32 =
    LINK_OVERHEAD_BYTES + NETWORK_OVERHEAD_BYTES + TRANSPORT_OVERHEAD_BYTES;

pub const MAX_MERGE: u8 = 7;
pub const MAX_NOTIFICATION_DELAY_US: u32 = (1 << 24) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MediaKind {
    Haptic = 0,
    HapticAudio = 1,
    HapticVideo = 2,
}

impl MediaKind {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self, WireError> {
        match code {
            0 => Ok(MediaKind::Haptic),
            1 => Ok(MediaKind::HapticAudio),
            2 => Ok(MediaKind::HapticVideo),
            other => Err(WireError::InvalidMediaCode(other)),
        }
    }

    pub fn header_len(self) -> usize {
        match self {
            MediaKind::Haptic => HAPTIC_HEADER_LEN,
            _ => AV_HEADER_LEN,
        }
    }

    /// Total per-packet overhead: lower layers plus this header.
    pub fn overhead_bytes(self) -> u32 {
        LOWER_LAYER_OVERHEAD_BYTES + self.header_len() as u32
    }
}

/// Audio or video sub-header, describing the first A/V chunk of the
/// packet's advertised medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AvHeader {
    pub frame_no: u16,
    pub payload_size_bytes: u16,
    pub fragment_no: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PacketHeader {
    pub media: MediaKind,
    /// Number of fragments merged into this packet.
    pub k: u8,
    /// `false` for a freshly measured delay, `true` for a repeat.
    pub delay_indicator: bool,
    /// Reserved bit. Written as 0, preserved verbatim on decode.
    pub reserved_x: bool,
    pub notification_delay_us: u32,
    pub haptic_timestamp_ms: u32,
    pub av_header: Option<AvHeader>,
}

impl PacketHeader {
    pub fn haptic(k: u8, haptic_timestamp_ms: u32) -> Self {
        PacketHeader {
            media: MediaKind::Haptic,
            k,
            delay_indicator: true,
            reserved_x: false,
            notification_delay_us: 0,
            haptic_timestamp_ms,
            av_header: None,
        }
    }

    pub fn encoded_len(&self) -> usize {
        self.media.header_len()
    }

    fn validate(&self) -> Result<(), WireError> {
        if self.k == 0 || self.k > MAX_MERGE {
            return Err(WireError::MergeCountOutOfRange(self.k));
        }
        if self.notification_delay_us > MAX_NOTIFICATION_DELAY_US {
            return Err(WireError::NotificationDelayOverflow(self.notification_delay_us));
        }
        let wants_av = self.media != MediaKind::Haptic;
        if wants_av != self.av_header.is_some() {
            return Err(WireError::AvHeaderMismatch(self.media));
        }
        Ok(())
    }
}

/// Serializes `h` into its 8- or 13-byte wire form.
///
/// The reserved bit is always written as 0.
pub fn encode_header(h: &PacketHeader) -> Result<Vec<u8>, WireError> {
    h.validate()?;
    let mut out = Vec::with_capacity(h.encoded_len());
    let first = (h.media.code() << 5) | (h.k << 2) | ((h.delay_indicator as u8) << 1);
    out.push(first);
    out.extend_from_slice(&h.notification_delay_us.to_be_bytes()[1..]);
    out.extend_from_slice(&h.haptic_timestamp_ms.to_be_bytes());
    if let Some(av) = h.av_header {
        out.extend_from_slice(&av.frame_no.to_be_bytes());
        out.extend_from_slice(&av.payload_size_bytes.to_be_bytes());
        out.push(av.fragment_no);
    }
    debug_assert_eq!(out.len(), h.encoded_len());
    Ok(out)
}

/// Parses a header from the front of `bytes`, returning it together with
/// the number of bytes consumed (8 or 13).
pub fn decode_header(bytes: &[u8]) -> Result<(PacketHeader, usize), WireError> {
    if bytes.len() < HAPTIC_HEADER_LEN {
        return Err(WireError::Truncated {
            needed: HAPTIC_HEADER_LEN,
            got: bytes.len(),
        });
    }
    let first = bytes[0];
    let media = MediaKind::from_code(first >> 5)?;
    let k = (first >> 2) & 0b111;
    if k == 0 {
        return Err(WireError::MergeCountOutOfRange(0));
    }
    let delay_indicator = first & 0b10 != 0;
    let reserved_x = first & 0b1 != 0;
    let notification_delay_us = u32::from_be_bytes([0, bytes[1], bytes[2], bytes[3]]);
    let haptic_timestamp_ms = u32::from_be_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);

    let needed = media.header_len();
    if bytes.len() < needed {
        return Err(WireError::Truncated {
            needed,
            got: bytes.len(),
        });
    }
    let av_header = (media != MediaKind::Haptic).then(|| AvHeader {
        frame_no: u16::from_be_bytes([bytes[8], bytes[9]]),
        payload_size_bytes: u16::from_be_bytes([bytes[10], bytes[11]]),
        fragment_no: bytes[12],
    });
    Ok((
        PacketHeader {
            media,
            k,
            delay_indicator,
            reserved_x,
            notification_delay_us,
            haptic_timestamp_ms,
            av_header,
        },
        needed,
    ))
}
