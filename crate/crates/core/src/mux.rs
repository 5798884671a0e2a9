//! Priority multiplexer: one telehaptic fragment per haptic tick.
//!
//! Every fragment carries the tick's haptic sample plus up to `s_m` bytes
//! of audio/video that have not been sent yet. Audio bytes always go
//! before video bytes. Frames of one kind leave in FIFO order.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Per-channel media generation parameters. Rates are per second, sizes
/// in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediaConfig {
    pub f_h: u32,
    pub s_h: u32,
    pub f_a: u32,
    pub s_a: u32,
    pub f_v: u32,
    pub s_v: u32,
}

impl MediaConfig {
    /// Operator-to-teleoperator channel: position/velocity only, 192 kbps.
    pub fn forward() -> Self {
        MediaConfig {
            f_h: 1000,
            s_h: 24,
            f_a: 0,
            s_a: 0,
            f_v: 0,
            s_v: 0,
        }
    }

    /// Teleoperator-to-operator channel: force (96 kbps), 160 B audio
    /// frames at 50 fps and 2 kB video frames at 25 fps.
    pub fn backward() -> Self {
        MediaConfig {
            f_h: 1000,
            s_h: 12,
            f_a: 50,
            s_a: 160,
            f_v: 25,
            s_v: 2000,
        }
    }

    pub fn has_av(&self) -> bool {
        (self.f_a > 0 && self.s_a > 0) || (self.f_v > 0 && self.s_v > 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedRates {
    /// Peak payload rate `D`, kbps.
    pub payload_kbps: f64,
    /// Fragment size `p`, bytes per haptic tick.
    pub fragment_bytes: u32,
    /// A/V budget per fragment `s_m = p - s_h`, bytes.
    pub av_bytes_per_fragment: u32,
}

pub fn derive_rates(cfg: &MediaConfig) -> Result<DerivedRates, ConfigError> {
    if cfg.f_h != 1000 {
        return Err(ConfigError::HapticRate(cfg.f_h));
    }
    if cfg.s_h == 0 {
        return Err(ConfigError::EmptyHapticSample);
    }
    let bytes_per_sec = u64::from(cfg.f_h) * u64::from(cfg.s_h)
        + u64::from(cfg.f_a) * u64::from(cfg.s_a)
        + u64::from(cfg.f_v) * u64::from(cfg.s_v);
    let payload_kbps = bytes_per_sec as f64 * 8.0 / 1000.0;
    if bytes_per_sec % 1000 != 0 {
        return Err(ConfigError::FractionalFragment(payload_kbps));
    }
    let p = (bytes_per_sec / 1000) as u32;
    if cfg.s_h > p {
        return Err(ConfigError::HapticExceedsFragment { s_h: cfg.s_h, p });
    }
    Ok(DerivedRates {
        payload_kbps,
        fragment_bytes: p,
        av_bytes_per_fragment: p - cfg.s_h,
    })
}

/// Number of `s_m`-sized pieces a frame of `size` bytes occupies on its own.
pub fn fragment_count(size: usize, s_m: u32) -> usize {
    if s_m == 0 {
        return 0;
    }
    size.div_ceil(s_m as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AvKind {
    Audio,
    Video,
}

impl AvKind {
    pub fn name(self) -> &'static str {
        match self {
            AvKind::Audio => "audio",
            AvKind::Video => "video",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HapticSample {
    pub gen_ms: u64,
    pub value: f64,
    pub size_bytes: u32,
}

/// A contiguous piece of one audio or video frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AvChunk {
    pub kind: AvKind,
    pub frame_no: u16,
    pub fragment_no: u8,
    pub bytes: u32,
    pub frame_gen_ms: u64,
    /// This chunk carries the final byte of its frame.
    pub completes_frame: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TelehapticFragment {
    pub haptic: HapticSample,
    /// At most `s_m` bytes in total, audio chunks before video chunks.
    pub av: Vec<AvChunk>,
}

impl TelehapticFragment {
    pub fn haptic_only(haptic: HapticSample) -> Self {
        TelehapticFragment {
            haptic,
            av: Vec::new(),
        }
    }

    pub fn av_bytes(&self) -> u32 {
        self.av.iter().map(|c| c.bytes).sum()
    }

    pub fn payload_bytes(&self) -> u32 {
        self.haptic.size_bytes + self.av_bytes()
    }
}

#[derive(Debug, Clone)]
struct PendingFrame {
    frame_no: u16,
    gen_ms: u64,
    remaining: u32,
    next_fragment: u8,
}

#[derive(Debug, Clone)]
pub struct Multiplexer {
    cfg: MediaConfig,
    rates: DerivedRates,
    audio: VecDeque<PendingFrame>,
    video: VecDeque<PendingFrame>,
    next_audio_no: u16,
    next_video_no: u16,
    bytes_enqueued: u64,
    bytes_emitted: u64,
}

impl Multiplexer {
    pub fn new(cfg: MediaConfig) -> Result<Self, ConfigError> {
        let rates = derive_rates(&cfg)?;
        Ok(Multiplexer {
            cfg,
            rates,
            audio: VecDeque::new(),
            video: VecDeque::new(),
            next_audio_no: 0,
            next_video_no: 0,
            bytes_enqueued: 0,
            bytes_emitted: 0,
        })
    }

    pub fn config(&self) -> &MediaConfig {
        &self.cfg
    }

    pub fn rates(&self) -> &DerivedRates {
        &self.rates
    }

    /// Queues a frame behind earlier frames of the same kind and returns
    /// its frame number together with the number of `s_m`-sized pieces it
    /// spans.
    pub fn enqueue_frame(
        &mut self,
        kind: AvKind,
        size: usize,
        t_ms: u64,
    ) -> Result<(u16, usize), ConfigError> {
        let s_m = self.rates.av_bytes_per_fragment;
        if s_m == 0 {
            return Err(ConfigError::NoAvBudget);
        }
        let max = match kind {
            AvKind::Audio => self.cfg.s_a,
            AvKind::Video => self.cfg.s_v,
        };
        if size > max as usize {
            return Err(ConfigError::FrameTooLarge {
                kind: kind.name(),
                size,
                max,
            });
        }
        let (queue, counter) = match kind {
            AvKind::Audio => (&mut self.audio, &mut self.next_audio_no),
            AvKind::Video => (&mut self.video, &mut self.next_video_no),
        };
        let frame_no = *counter;
        *counter = counter.wrapping_add(1);
        if size > 0 {
            queue.push_back(PendingFrame {
                frame_no,
                gen_ms: t_ms,
                remaining: size as u32,
                next_fragment: 0,
            });
            self.bytes_enqueued += size as u64;
        }
        Ok((frame_no, fragment_count(size, s_m)))
    }

    /// Builds the fragment for this tick around `haptic`.
    pub fn next_fragment(&mut self, haptic: HapticSample) -> TelehapticFragment {
        let mut budget = self.rates.av_bytes_per_fragment;
        let mut av = Vec::new();
        for (kind, queue) in [(AvKind::Audio, &mut self.audio), (AvKind::Video, &mut self.video)] {
            while budget > 0 {
                let Some(front) = queue.front_mut() else { break };
                let take = front.remaining.min(budget);
                front.remaining -= take;
                budget -= take;
                av.push(AvChunk {
                    kind,
                    frame_no: front.frame_no,
                    fragment_no: front.next_fragment,
                    bytes: take,
                    frame_gen_ms: front.gen_ms,
                    completes_frame: front.remaining == 0,
                });
                front.next_fragment = front.next_fragment.wrapping_add(1);
                self.bytes_emitted += u64::from(take);
                if front.remaining == 0 {
                    queue.pop_front();
                }
            }
        }
        TelehapticFragment { haptic, av }
    }

    pub fn queued_bytes(&self, kind: AvKind) -> u64 {
        let q = match kind {
            AvKind::Audio => &self.audio,
            AvKind::Video => &self.video,
        };
        q.iter().map(|f| u64::from(f.remaining)).sum()
    }

    pub fn bytes_enqueued(&self) -> u64 {
        self.bytes_enqueued
    }

    pub fn bytes_emitted(&self) -> u64 {
        self.bytes_emitted
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: u64) -> HapticSample {
        HapticSample {
            gen_ms: t,
            value: 0.0,
            size_bytes: 12,
        }
    }

    #[test]
    fn backward_rates() {
        let r = derive_rates(&MediaConfig::backward()).unwrap();
        assert_eq!(r.payload_kbps, 560.0);
        assert_eq!(r.fragment_bytes, 70);
        assert_eq!(r.av_bytes_per_fragment, 58);
    }

    #[test]
    fn forward_rates() {
        let r = derive_rates(&MediaConfig::forward()).unwrap();
        assert_eq!(r.payload_kbps, 192.0);
        assert_eq!(r.fragment_bytes, 24);
        assert_eq!(r.av_bytes_per_fragment, 0);
    }

    #[test]
    fn config_rejections() {
        let mut c = MediaConfig::forward();
        c.f_h = 500;
        assert_eq!(derive_rates(&c), Err(ConfigError::HapticRate(500)));
        let mut c = MediaConfig::forward();
        c.s_h = 0;
        assert_eq!(derive_rates(&c), Err(ConfigError::EmptyHapticSample));
        let mut c = MediaConfig::backward();
        c.s_a = 161;
        assert!(matches!(derive_rates(&c), Err(ConfigError::FractionalFragment(_))));
    }

    #[test]
    fn fragment_counts() {
        assert_eq!(fragment_count(2000, 58), 35);
        assert_eq!(fragment_count(160, 58), 3);
        assert_eq!(fragment_count(0, 58), 0);
    }

    #[test]
    fn audio_frame_splits_58_58_44() {
        let mut m = Multiplexer::new(MediaConfig::backward()).unwrap();
        let (_, n) = m.enqueue_frame(AvKind::Audio, 160, 0).unwrap();
        assert_eq!(n, 3);
        let sizes: Vec<u32> = (0..4).map(|t| m.next_fragment(sample(t)).av_bytes()).collect();
        assert_eq!(sizes, vec![58, 58, 44, 0]);
        assert_eq!(m.queued_bytes(AvKind::Audio), 0);
    }

    #[test]
    fn empty_frame_yields_nothing() {
        let mut m = Multiplexer::new(MediaConfig::backward()).unwrap();
        let (_, n) = m.enqueue_frame(AvKind::Video, 0, 0).unwrap();
        assert_eq!(n, 0);
        assert!(m.next_fragment(sample(0)).av.is_empty());
    }

    #[test]
    fn audio_has_priority() {
        let mut m = Multiplexer::new(MediaConfig::backward()).unwrap();
        m.enqueue_frame(AvKind::Video, 2000, 0).unwrap();
        m.enqueue_frame(AvKind::Audio, 160, 0).unwrap();
        let f = m.next_fragment(sample(0));
        assert_eq!(f.av.len(), 1);
        assert_eq!(f.av[0].kind, AvKind::Audio);
        m.next_fragment(sample(1));
        // audio tail (44 B) then 14 B of video in the same fragment
        let f = m.next_fragment(sample(2));
        assert_eq!(f.av[0].kind, AvKind::Audio);
        assert_eq!(f.av[0].bytes, 44);
        assert!(f.av[0].completes_frame);
        assert_eq!(f.av[1].kind, AvKind::Video);
        assert_eq!(f.av[1].bytes, 14);
        assert_eq!(f.av_bytes(), 58);
    }

    #[test]
    fn haptic_only_when_idle() {
        let mut m = Multiplexer::new(MediaConfig::backward()).unwrap();
        let f = m.next_fragment(sample(5));
        assert_eq!(f.haptic.gen_ms, 5);
        assert!(f.av.is_empty());
        assert_eq!(f.payload_bytes(), 12);
    }

    #[test]
    fn no_av_budget_rejects_frames() {
        let mut m = Multiplexer::new(MediaConfig::forward()).unwrap();
        assert_eq!(
            m.enqueue_frame(AvKind::Audio, 10, 0),
            Err(ConfigError::NoAvBudget)
        );
    }

    #[test]
    fn oversized_frame_rejected() {
        let mut m = Multiplexer::new(MediaConfig::backward()).unwrap();
        assert!(matches!(
            m.enqueue_frame(AvKind::Audio, 161, 0),
            Err(ConfigError::FrameTooLarge { .. })
        ));
    }

    /// Paper configuration: audio every 20 ms and video every 40 ms fill
    /// the 58 B budget exactly, so nothing may linger.
    #[test]
    fn reference_config_drain_bounds() {
        let cfg = MediaConfig::backward();
        let mut m = Multiplexer::new(cfg).unwrap();
        let mut audio_done = std::collections::HashMap::new();
        let mut video_done = std::collections::HashMap::new();
        for t in 0..4000u64 {
            if t % 20 == 0 {
                m.enqueue_frame(AvKind::Audio, 160, t).unwrap();
            }
            if t % 40 == 0 {
                m.enqueue_frame(AvKind::Video, 2000, t).unwrap();
            }
            let f = m.next_fragment(sample(t));
            assert!(f.av_bytes() <= 58);
            for c in f.av.iter().filter(|c| c.completes_frame) {
                let lag = t - c.frame_gen_ms;
                match c.kind {
                    AvKind::Audio => audio_done.insert(c.frame_no, lag),
                    AvKind::Video => video_done.insert(c.frame_no, lag),
                };
            }
        }
        assert!(audio_done.values().all(|&lag| lag < 3));
        assert!(video_done.values().all(|&lag| lag < 40));
        assert_eq!(audio_done.len(), 200);
        assert_eq!(video_done.len(), 100);
    }
}
