//! Dynamic packetization: choosing how many fragments go in a packet.
//!
//! A `k`-merge packet carries `k` consecutive fragments behind a single
//! set of headers, so the transmission rate is `R_k = D + OHR / k`. The
//! controller reacts to feedback triggers with a step-increase /
//! multistep-decrease rule on `k`:
//!
//! | trigger    | step increase (default) | multistep increase | fixed |
//! |------------|-------------------------|--------------------|-------|
//! | congestion | `k = k_max`             | `k = min(k+1, k_max)` | n/a  |
//! | steady     | `k = max(k-1, 1)`       | `k = max(k-1, 1)`  | n/a     |
//!
//! With a non-zero hold-up, the controller remembers the `k` that was in
//! force at the last congestion trigger (`k_hat`); once it is back at
//! `k_hat + 1` it ignores steady triggers for `hold_up_ms`.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::feedback::Trigger;
use crate::mux::{AvKind, MediaConfig, TelehapticFragment};
use crate::wire::{AvHeader, MediaKind, PacketHeader, LOWER_LAYER_OVERHEAD_BYTES, MAX_MERGE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    /// Payload rate `D`, kbps.
    pub payload_kbps: f64,
    /// Overhead rate at one packet per fragment, kbps.
    pub overhead_kbps: f64,
}

impl RateModel {
    /// Rate model for a channel at 1 kHz fragments with `overhead_bytes`
    /// of headers on every packet.
    pub fn new(payload_kbps: f64, overhead_bytes: u32, f_h: u32) -> Self {
        RateModel {
            payload_kbps,
            overhead_kbps: f64::from(overhead_bytes) * 8.0 * f64::from(f_h) / 1000.0,
        }
    }

    /// Rate model implied by a media configuration: A/V channels pay the
    /// 13-byte header, haptic-only channels the 8-byte one.
    pub fn for_media(cfg: &MediaConfig) -> Result<Self, ConfigError> {
        let rates = crate::mux::derive_rates(cfg)?;
        let media = if cfg.has_av() {
            MediaKind::HapticAudio
        } else {
            MediaKind::Haptic
        };
        Ok(RateModel::new(rates.payload_kbps, media.overhead_bytes(), cfg.f_h))
    }

    pub fn rate_kbps(&self, k: u8, k_max: u8) -> Result<f64, ConfigError> {
        if k == 0 || k > k_max {
            return Err(ConfigError::MergeCount { k, k_max });
        }
        Ok(self.payload_kbps + self.overhead_kbps / f64::from(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RatePolicy {
    /// Jump to `k_max` on congestion (DPM).
    StepIncrease,
    /// Add one to `k` on congestion.
    MultistepIncrease,
    /// Ignore triggers.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpmParams {
    pub k_max: u8,
    /// Hold-up duration in ms; 0 disables it.
    pub hold_up_ms: f64,
    pub policy: RatePolicy,
}

impl Default for DpmParams {
    fn default() -> Self {
        DpmParams {
            k_max: 4,
            hold_up_ms: 0.0,
            policy: RatePolicy::StepIncrease,
        }
    }
}

impl DpmParams {
    pub fn with_hold_up(hold_up_ms: f64) -> Self {
        DpmParams {
            hold_up_ms,
            ..Default::default()
        }
    }

    pub fn no_merge() -> Self {
        DpmParams {
            policy: RatePolicy::Fixed,
            ..Default::default()
        }
    }

    pub fn multistep() -> Self {
        DpmParams {
            policy: RatePolicy::MultistepIncrease,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum HoldUp {
    Idle,
    /// Waiting for `k` to reach `k_hat + 1`.
    Armed,
    Until(f64),
}

#[derive(Debug, Clone)]
pub struct DpmState {
    params: DpmParams,
    k: u8,
    pending: Vec<TelehapticFragment>,
    k_hat: Option<u8>,
    hold: HoldUp,
    ignored_steady: u64,
}

impl DpmState {
    pub fn new(params: DpmParams) -> Result<Self, ConfigError> {
        if params.k_max == 0 || params.k_max > MAX_MERGE {
            return Err(ConfigError::KMax(params.k_max));
        }
        Ok(DpmState {
            params,
            k: 1,
            pending: Vec::new(),
            k_hat: None,
            hold: HoldUp::Idle,
            ignored_steady: 0,
        })
    }

    pub fn params(&self) -> &DpmParams {
        &self.params
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    pub fn k_hat(&self) -> Option<u8> {
        self.k_hat
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Absolute time until which steady triggers are ignored, if a hold
    /// window has started.
    pub fn holdup_until_ms(&self) -> Option<f64> {
        match self.hold {
            HoldUp::Until(t) => Some(t),
            _ => None,
        }
    }

    pub fn ignored_steady(&self) -> u64 {
        self.ignored_steady
    }

    /// Applies a trigger. If `k` drops to or below the number of buffered
    /// fragments, the buffer is returned for immediate transmission.
    pub fn on_trigger(&mut self, trigger: Trigger, now_ms: f64) -> Option<Vec<TelehapticFragment>> {
        let k_max = self.params.k_max;
        match (self.params.policy, trigger) {
            (RatePolicy::Fixed, _) => return None,
            (RatePolicy::StepIncrease, Trigger::Congestion) => {
                self.k_hat = Some(self.k);
                self.hold = if self.params.hold_up_ms > 0.0 {
                    HoldUp::Armed
                } else {
                    HoldUp::Idle
                };
                self.set_k(k_max, now_ms);
            }
            (RatePolicy::MultistepIncrease, Trigger::Congestion) => {
                self.set_k((self.k + 1).min(k_max), now_ms);
            }
            (_, Trigger::Steady) => {
                if let (HoldUp::Until(until), Some(k_hat)) = (self.hold, self.k_hat) {
                    if now_ms < until && self.k == k_hat + 1 {
                        self.ignored_steady += 1;
                        return None;
                    }
                }
                let next = self.k.saturating_sub(1).max(1);
                self.set_k(next, now_ms);
            }
        }
        if !self.pending.is_empty() && self.pending.len() >= usize::from(self.k) {
            return Some(std::mem::take(&mut self.pending));
        }
        None
    }

    fn set_k(&mut self, k: u8, now_ms: f64) {
        self.k = k;
        if self.hold == HoldUp::Armed && Some(k) == self.k_hat.map(|h| h + 1) {
            self.hold = HoldUp::Until(now_ms + self.params.hold_up_ms);
        }
    }

    /// Buffers one fragment; returns the merged fragments once `k` of them
    /// are waiting.
    pub fn submit_fragment(&mut self, frag: TelehapticFragment) -> Option<Vec<TelehapticFragment>> {
        self.pending.push(frag);
        if self.pending.len() >= usize::from(self.k) {
            Some(std::mem::take(&mut self.pending))
        } else {
            None
        }
    }
}

/// A merged packet ready for the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct TelehapticPacket {
    pub header: PacketHeader,
    pub fragments: Vec<TelehapticFragment>,
}

impl TelehapticPacket {
    /// Wraps merged fragments in a header. The timestamp is the earliest
    /// haptic sample's generation time; the A/V sub-header describes the
    /// first audio chunk if there is one, otherwise the first video chunk.
    pub fn assemble(fragments: Vec<TelehapticFragment>, notification: (u32, bool)) -> Self {
        assert!(!fragments.is_empty(), "a packet needs at least one fragment");
        let first_of = |kind: AvKind| {
            fragments
                .iter()
                .flat_map(|f| f.av.iter())
                .find(|c| c.kind == kind)
                .copied()
        };
        let (media, chosen) = match (first_of(AvKind::Audio), first_of(AvKind::Video)) {
            (Some(a), _) => (MediaKind::HapticAudio, Some(a)),
            (None, Some(v)) => (MediaKind::HapticVideo, Some(v)),
            (None, None) => (MediaKind::Haptic, None),
        };
        let av_header = chosen.map(|c| {
            let size: u32 = fragments
                .iter()
                .flat_map(|f| f.av.iter())
                .filter(|x| x.kind == c.kind)
                .map(|x| x.bytes)
                .sum();
            AvHeader {
                frame_no: c.frame_no,
                payload_size_bytes: size.min(u32::from(u16::MAX)) as u16,
                fragment_no: c.fragment_no,
            }
        });
        let ts = fragments
            .iter()
            .map(|f| f.haptic.gen_ms)
            .min()
            .unwrap_or_default();
        let header = PacketHeader {
            media,
            k: fragments.len() as u8,
            delay_indicator: notification.1,
            reserved_x: false,
            notification_delay_us: notification.0,
            haptic_timestamp_ms: ts as u32,
            av_header,
        };
        TelehapticPacket { header, fragments }
    }

    pub fn payload_bytes(&self) -> u32 {
        self.fragments.iter().map(|f| f.payload_bytes()).sum()
    }

    /// Bytes on the wire including all lower-layer overhead.
    pub fn wire_bytes(&self) -> u32 {
        self.payload_bytes() + self.header.encoded_len() as u32 + LOWER_LAYER_OVERHEAD_BYTES
    }
}
