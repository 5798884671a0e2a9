//! Cross-traffic sources.
//!
//! A CBR source emits fixed-size packets at a constant spacing while one
//! of its on-windows is active. A VBR source does the same, but its rate
//! is redrawn uniformly from `[lo, hi]` at every `redraw_ms` boundary from
//! a seeded generator, so the long-run mean is `(lo + hi) / 2`.
//!
//! Rates count every byte on the wire. Sources emit in small chunks by
//! default, which approximates fluid traffic; set `pkt_bytes` to 1000 for
//! a packetized source.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Channel;

pub const DEFAULT_CHUNK_BYTES: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficKind {
    Cbr,
    Vbr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficSource {
    pub id: String,
    pub kind: TrafficKind,
    /// CBR rate, kbps.
    pub rate_kbps: f64,
    /// VBR range, kbps.
    pub lo_kbps: f64,
    pub hi_kbps: f64,
    pub redraw_ms: f64,
    /// Emission unit on the wire, bytes.
    pub pkt_bytes: u32,
    /// Half-open activity windows `[start_ms, stop_ms)`.
    pub on_off: Vec<(f64, f64)>,
}

impl Default for TrafficSource {
    fn default() -> Self {
        TrafficSource {
            id: String::new(),
            kind: TrafficKind::Cbr,
            rate_kbps: 0.0,
            lo_kbps: 0.0,
            hi_kbps: 0.0,
            redraw_ms: 50.0,
            pkt_bytes: DEFAULT_CHUNK_BYTES,
            on_off: Vec::new(),
        }
    }
}

impl TrafficSource {
    pub fn cbr(id: &str, rate_kbps: f64, start_ms: f64, stop_ms: f64) -> Self {
        TrafficSource {
            id: id.into(),
            kind: TrafficKind::Cbr,
            rate_kbps,
            on_off: vec![(start_ms, stop_ms)],
            ..Default::default()
        }
    }

    pub fn vbr(id: &str, lo_kbps: f64, hi_kbps: f64, start_ms: f64, stop_ms: f64) -> Self {
        TrafficSource {
            id: id.into(),
            kind: TrafficKind::Vbr,
            lo_kbps,
            hi_kbps,
            on_off: vec![(start_ms, stop_ms)],
            ..Default::default()
        }
    }

    pub fn with_pkt_bytes(mut self, pkt_bytes: u32) -> Self {
        self.pkt_bytes = pkt_bytes;
        self
    }

    pub fn mean_kbps(&self) -> f64 {
        match self.kind {
            TrafficKind::Cbr => self.rate_kbps,
            TrafficKind::Vbr => 0.5 * (self.lo_kbps + self.hi_kbps),
        }
    }

    pub fn is_active(&self, t_ms: f64) -> bool {
        self.on_off.iter().any(|&(a, b)| t_ms >= a && t_ms < b)
    }

    pub fn overlaps(&self, other: &TrafficSource) -> bool {
        self.on_off
            .iter()
            .any(|&(a, b)| other.on_off.iter().any(|&(c, d)| a < d && c < b))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.pkt_bytes == 0 {
            return Err("pkt_bytes must be positive".into());
        }
        match self.kind {
            TrafficKind::Cbr if !(self.rate_kbps >= 0.0) => {
                return Err("CBR rate must be non-negative".into())
            }
            TrafficKind::Vbr if !(self.lo_kbps >= 0.0 && self.lo_kbps <= self.hi_kbps) => {
                return Err("VBR range needs 0 <= lo <= hi".into())
            }
            TrafficKind::Vbr if !(self.redraw_ms > 0.0) => {
                return Err("VBR redraw interval must be positive".into())
            }
            _ => {}
        }
        for (i, &(a, b)) in self.on_off.iter().enumerate() {
            if !(a >= 0.0 && b > a) {
                return Err(format!("window {i} is empty or negative"));
            }
            for &(c, d) in &self.on_off[i + 1..] {
                if a < d && c < b {
                    return Err("on/off windows overlap".into());
                }
            }
        }
        Ok(())
    }

    /// Rate in force at `t_ms` (0 when inactive). `source_seed` selects the
    /// VBR sample path.
    pub fn rate_at(&self, t_ms: f64, source_seed: u64) -> f64 {
        if !self.is_active(t_ms) {
            return 0.0;
        }
        match self.kind {
            TrafficKind::Cbr => self.rate_kbps,
            TrafficKind::Vbr => {
                let epoch = (t_ms / self.redraw_ms).floor() as u64;
                vbr_draw(self.lo_kbps, self.hi_kbps, source_seed, epoch)
            }
        }
    }
}

fn vbr_draw(lo: f64, hi: f64, source_seed: u64, epoch: u64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(source_seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.gen_range(lo..=hi)
}

/// Seed of source `index` on `channel` for a scenario seeded with `seed`.
pub fn source_seed(seed: u64, channel: Channel, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + channel as u64 * 1024 + index as u64);
    rng.gen()
}

/// Emission schedule of one source, walked forward by the simulator.
#[derive(Debug, Clone)]
pub struct SourceClock {
    source: TrafficSource,
    seed: u64,
}

impl SourceClock {
    pub fn new(source: TrafficSource, seed: u64) -> Self {
        SourceClock { source, seed }
    }

    pub fn source(&self) -> &TrafficSource {
        &self.source
    }

    /// First emission time at or after `from_ms`, or `None` once every
    /// window has closed.
    pub fn first_at_or_after(&self, from_ms: f64) -> Option<f64> {
        let src = &self.source;
        for &(a, b) in src.on_off.iter().filter(|&&(_, b)| b > from_ms) {
            let mut t = a.max(from_ms);
            while t < b {
                if src.rate_at(t, self.seed) > 0.0 {
                    return Some(t);
                }
                match src.kind {
                    TrafficKind::Cbr => break,
                    // a zero-rate epoch may be followed by a positive one
                    TrafficKind::Vbr => t = ((t / src.redraw_ms).floor() + 1.0) * src.redraw_ms,
                }
            }
        }
        None
    }

    /// Emission following one at `t_ms`.
    pub fn next_after(&self, t_ms: f64) -> Option<f64> {
        let rate = self.source.rate_at(t_ms, self.seed);
        if rate <= 0.0 {
            return self.first_at_or_after(t_ms);
        }
        let gap = f64::from(self.source.pkt_bytes) * 8.0 / rate;
        let next = t_ms + gap;
        if self.source.is_active(next) {
            Some(next)
        } else {
            self.first_at_or_after(next)
        }
    }
}

/// Time-varying CBR schedule on the backward channel: 260 kbps from
/// 0.5 s, 350 kbps from 2.5 s, 400 kbps from 4.5 s, off after 6.5 s.
pub fn stepped_cbr_schedule() -> Vec<TrafficSource> {
    vec![
        TrafficSource::cbr("C1", 260.0, 500.0, 6500.0),
        TrafficSource::cbr("C2", 90.0, 2500.0, 6500.0),
        TrafficSource::cbr("C3", 50.0, 4500.0, 6500.0),
    ]
}
