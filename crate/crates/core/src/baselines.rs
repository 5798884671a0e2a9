//! Comparison transmitters and the perceptual sampling machinery they use.
//!
//! * no-merge: `k = 1` forever ([`crate::dpm::DpmParams::no_merge`]).
//! * multistep increase: `k + 1` on congestion instead of a jump to `k_max`.
//! * RTP-style reports: no-merge plus a delay report every 500 ms, no
//!   adaptation.
//! * NAFCAH-style: 100 Hz probes, congestion inferred from RTT/2, multistep
//!   rate changes.
//! * Weber multiplexing: force samples sent only when they cross a relative
//!   deadband, A/V frames sent as they are produced, no congestion control.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dpm::{DpmState, TelehapticPacket};
use crate::error::ConfigError;
use crate::feedback::{FeedbackState, Trigger};
use crate::mux::{AvChunk, AvKind, HapticSample, MediaConfig, TelehapticFragment};
use crate::wire::{AvHeader, MediaKind, PacketHeader, LOWER_LAYER_OVERHEAD_BYTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    NoMerge,
    MultistepIncrease,
    RtpFeedback,
    Nafcah,
    WeberMux,
}

/// `k` after a trigger under the multistep-increase rule.
pub fn multistep_on_trigger(k: u8, k_max: u8, trigger: Trigger) -> u8 {
    match trigger {
        Trigger::Congestion => (k + 1).min(k_max),
        Trigger::Steady => k.saturating_sub(1).max(1),
    }
}

/// Report clock of an RTP/RTCP-style receiver.
#[derive(Debug, Clone)]
pub struct RtpReporter {
    interval_ms: u64,
    next_ms: u64,
}

impl RtpReporter {
    pub fn new(interval_ms: u64) -> Self {
        RtpReporter {
            interval_ms,
            next_ms: interval_ms,
        }
    }

    /// True once per interval, at the first tick at or after each report
    /// time.
    pub fn due(&mut self, now_ms: u64) -> bool {
        if now_ms >= self.next_ms {
            self.next_ms += self.interval_ms;
            true
        } else {
            false
        }
    }

    pub fn report_times(interval_ms: u64, until_ms: u64) -> Vec<u64> {
        (1..)
            .map(|i| i * interval_ms)
            .take_while(|&t| t <= until_ms)
            .collect()
    }
}

/// Feeds one RTT sample into the sender-side estimator (as RTT/2) and
/// applies any resulting trigger with the multistep rule. Returns the
/// trigger and any fragments flushed by a `k` decrease.
pub fn nafcah_step(
    estimator: &mut FeedbackState,
    dpm: &mut DpmState,
    rtt_ms: f64,
    now_ms: f64,
) -> (Option<Trigger>, Option<Vec<TelehapticFragment>>) {
    let half_us = (rtt_ms * 500.0).round().max(0.0) as u32;
    let trigger = estimator.ingest_notification(half_us, false);
    let flushed = trigger.and_then(|t| dpm.on_trigger(t, now_ms));
    (trigger, flushed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeberParams {
    pub threshold: f64,
}

impl Default for WeberParams {
    fn default() -> Self {
        WeberParams { threshold: 0.12 }
    }
}

impl WeberParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.threshold > 0.0 && self.threshold < 1.0 {
            Ok(())
        } else {
            Err(ConfigError::Scenario(format!(
                "Weber threshold must lie in (0, 1), got {}",
                self.threshold
            )))
        }
    }
}

/// Marks the samples a Weber deadband sampler transmits. The first sample
/// always goes; later ones go when they differ from the last transmitted
/// value by more than `threshold` times its magnitude.
pub fn weber_sample(signal: &[f64], params: &WeberParams) -> Vec<bool> {
    let mut mask = Vec::with_capacity(signal.len());
    let mut last: Option<f64> = None;
    for &v in signal {
        let send = match last {
            None => true,
            Some(l) if l == 0.0 => v != 0.0,
            Some(l) => (v - l).abs() > params.threshold * l.abs(),
        };
        if send {
            last = Some(v);
        }
        mask.push(send);
    }
    mask
}

/// Zero-order hold at 1 kHz display ticks `0..len`. Each input is
/// `(gen_ms, display_ms, value)`; at tick `t` the output is the value of
/// the newest sample displayed at or before `t`, or `initial` before the
/// first one.
pub fn zoh_reconstruct(received: &[(f64, f64, f64)], len: usize, initial: f64) -> Vec<f64> {
    let mut by_display: Vec<(f64, f64, f64)> = received.to_vec();
    by_display.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    let mut out = Vec::with_capacity(len);
    let mut idx = 0;
    let mut current = initial;
    let mut newest_gen = f64::NEG_INFINITY;
    for tick in 0..len {
        let t = tick as f64;
        while idx < by_display.len() && by_display[idx].1 <= t {
            let (gen, _, v) = by_display[idx];
            if gen > newest_gen {
                newest_gen = gen;
                current = v;
            }
            idx += 1;
        }
        out.push(current);
    }
    out
}

/// A packet produced by the Weber multiplexer.
#[derive(Debug, Clone, PartialEq)]
pub enum WeberPacket {
    /// One force sample behind an 8-byte header.
    Haptic(TelehapticPacket),
    /// A piece of an audio or video frame behind a 13-byte header.
    Av { header: PacketHeader, chunk: AvChunk },
}

impl WeberPacket {
    pub fn wire_bytes(&self) -> u32 {
        match self {
            WeberPacket::Haptic(p) => p.wire_bytes(),
            WeberPacket::Av { header, chunk } => {
                chunk.bytes + header.encoded_len() as u32 + LOWER_LAYER_OVERHEAD_BYTES
            }
        }
    }
}

/// Weber-sampled force plus A/V sent frame by frame, one tick at a time.
#[derive(Debug, Clone)]
pub struct WeberMux {
    max_av_payload: u32,
    next_audio_no: u16,
    next_video_no: u16,
}

impl WeberMux {
    pub fn new(max_av_payload: u32) -> Self {
        WeberMux {
            max_av_payload: max_av_payload.max(1),
            next_audio_no: 0,
            next_video_no: 0,
        }
    }

    /// Packets for one tick: the A/V frames generated now (split at
    /// `max_av_payload`), then the force sample if it is marked.
    pub fn step(
        &mut self,
        sample: HapticSample,
        marked: bool,
        frames: &[(AvKind, u32)],
        notification: (u32, bool),
    ) -> Vec<WeberPacket> {
        let mut out = Vec::new();
        for &(kind, size) in frames {
            let counter = match kind {
                AvKind::Audio => &mut self.next_audio_no,
                AvKind::Video => &mut self.next_video_no,
            };
            let frame_no = *counter;
            *counter = counter.wrapping_add(1);
            let mut left = size;
            let mut frag_no = 0u8;
            while left > 0 {
                let take = left.min(self.max_av_payload);
                left -= take;
                let chunk = AvChunk {
                    kind,
                    frame_no,
                    fragment_no: frag_no,
                    bytes: take,
                    frame_gen_ms: sample.gen_ms,
                    completes_frame: left == 0,
                };
                frag_no = frag_no.wrapping_add(1);
                let header = PacketHeader {
                    media: match kind {
                        AvKind::Audio => MediaKind::HapticAudio,
                        AvKind::Video => MediaKind::HapticVideo,
                    },
                    k: 1,
                    delay_indicator: notification.1,
                    reserved_x: false,
                    notification_delay_us: notification.0,
                    haptic_timestamp_ms: sample.gen_ms as u32,
                    av_header: Some(AvHeader {
                        frame_no,
                        payload_size_bytes: take.min(u32::from(u16::MAX)) as u16,
                        fragment_no: chunk.fragment_no,
                    }),
                };
                out.push(WeberPacket::Av { header, chunk });
            }
        }
        if marked {
            out.push(WeberPacket::Haptic(TelehapticPacket::assemble(
                vec![TelehapticFragment::haptic_only(sample)],
                notification,
            )));
        }
        out
    }
}

/// Where the backward-channel force signal comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForceSource {
    Zero,
    #[default]
    Synthetic,
    SyntheticSeeded {
        seed: u64,
    },
    /// Two-column `t_ms,value` CSV.
    Csv {
        path: PathBuf,
    },
}

impl ForceSource {
    /// Force values for ticks `0..len`. `scenario_seed` seeds the default
    /// synthetic trace.
    pub fn values(&self, len: usize, scenario_seed: u64) -> Result<Vec<f64>, ConfigError> {
        match self {
            ForceSource::Zero => Ok(vec![0.0; len]),
            ForceSource::Synthetic => Ok(SyntheticForce::default().generate(len, scenario_seed)),
            ForceSource::SyntheticSeeded { seed } => {
                Ok(SyntheticForce::default().generate(len, *seed))
            }
            ForceSource::Csv { path } => {
                let file = std::fs::File::open(path).map_err(|e| {
                    ConfigError::Scenario(format!("cannot open {}: {e}", path.display()))
                })?;
                let trace = read_force_csv(file)?;
                Ok(resample_force(&trace, len))
            }
        }
    }
}

/// Seeded force trace made of alternating slow and fast segments.
///
/// Slow segments are low-frequency sinusoids riding on an offset, the way
/// a steady contact force drifts. Fast segments are trains of tapping
/// transients: the log of the force follows a triangle wave between
/// `ln(floor)` and 0 whose frequency sweeps across `fast_hz`, so every
/// sample rises or decays by well over the Weber threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticForce {
    pub slow_ms: usize,
    pub fast_ms: usize,
    pub slow_hz: (f64, f64),
    pub fast_hz: (f64, f64),
    /// Smallest force of a transient relative to its peak.
    pub floor: f64,
}

impl Default for SyntheticForce {
    fn default() -> Self {
        SyntheticForce {
            slow_ms: 3000,
            fast_ms: 3000,
            slow_hz: (0.2, 1.0),
            fast_hz: (18.0, 30.0),
            floor: 0.02,
        }
    }
}

impl SyntheticForce {
    /// Ticks `[start, end)` of every fast segment inside `0..len`.
    pub fn fast_segments(&self, len: usize) -> Vec<(usize, usize)> {
        let period = self.slow_ms + self.fast_ms;
        (0..len)
            .step_by(period.max(1))
            .map(|s| ((s + self.slow_ms).min(len), (s + period).min(len)))
            .filter(|(a, b)| a < b)
            .collect()
    }

    pub fn generate(&self, len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(len);
        let tau = std::f64::consts::TAU;
        let depth = -self.floor.ln();
        while out.len() < len {
            let f = rng.gen_range(self.slow_hz.0..=self.slow_hz.1);
            let amp = rng.gen_range(0.2..0.5);
            let offset = rng.gen_range(0.8..1.2);
            let phase = rng.gen_range(0.0..tau);
            for i in 0..self.slow_ms {
                let t = i as f64 / 1000.0;
                out.push(offset + amp * (tau * f * t + phase).sin());
            }
            let (f0, f1) = self.fast_hz;
            let peak = rng.gen_range(0.8..1.6);
            let dur = self.fast_ms as f64 / 1000.0;
            let start = rng.gen_range(0.0..1.0);
            for i in 0..self.fast_ms {
                let t = i as f64 / 1000.0;
                let cycles = start + f0 * t + 0.5 * (f1 - f0) / dur * t * t;
                let tri = 1.0 - 2.0 * (cycles.fract() - 0.5).abs();
                out.push(peak * (-depth * (1.0 - tri)).exp());
            }
        }
        out.truncate(len);
        let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 {
            out.iter_mut().for_each(|v| *v /= peak);
        }
        out
    }
}

pub fn read_force_csv<R: std::io::Read>(reader: R) -> Result<Vec<(f64, f64)>, ConfigError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ConfigError::Scenario(format!("force csv row {i}: {e}")))?;
        let parse = |j: usize| -> Result<f64, ConfigError> {
            rec.get(j)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| ConfigError::Scenario(format!("force csv row {i}: bad column {j}")))
        };
        out.push((parse(0)?, parse(1)?));
    }
    Ok(out)
}

pub fn write_force_csv<W: std::io::Write>(writer: W, values: &[f64]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t_ms", "value"])?;
    for (t, v) in values.iter().enumerate() {
        w.write_record([t.to_string(), format!("{v:.9}")])?;
    }
    w.flush()
}

/// Zero-order-hold resampling of `(t_ms, value)` points onto ticks
/// `0..len`.
pub fn resample_force(points: &[(f64, f64)], len: usize) -> Vec<f64> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let with_display: Vec<(f64, f64, f64)> = sorted.iter().map(|&(t, v)| (t, t, v)).collect();
    let initial = sorted.first().map(|p| p.1).unwrap_or(0.0);
    zoh_reconstruct(&with_display, len, initial)
}

/// Media configuration the Weber multiplexer is normally run with.
pub fn weber_media() -> MediaConfig {
    MediaConfig::backward()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weber_constant_signal() {
        let mask = weber_sample(&[2.0; 50], &WeberParams::default());
        assert!(mask[0]);
        assert_eq!(mask.iter().filter(|&&m| m).count(), 1);
    }

    #[test]
    fn weber_threshold_arithmetic() {
        let p = WeberParams::default();
        assert_eq!(weber_sample(&[1.0, 1.13], &p), vec![true, true]);
        assert_eq!(weber_sample(&[1.0, 1.10], &p), vec![true, false]);
        // reference is the last transmitted value, not the last sample
        assert_eq!(
            weber_sample(&[1.0, 1.06, 1.11, 1.125], &p),
            vec![true, false, false, true]
        );
    }

    #[test]
    fn weber_zero_reference() {
        let p = WeberParams::default();
        assert_eq!(weber_sample(&[0.0, 0.0, 1e-9], &p), vec![true, false, true]);
    }

    #[test]
    fn weber_fast_ramp_sends_everything() {
        let ramp: Vec<f64> = (0..100).map(|i| 1.2f64.powi(i)).collect();
        assert!(weber_sample(&ramp, &WeberParams::default()).iter().all(|&m| m));
    }

    #[test]
    fn zoh_holds_across_gaps() {
        let rx = [(0.0, 15.0, 1.0), (1.0, 16.0, 2.0), (5.0, 20.0, 3.0)];
        let out = zoh_reconstruct(&rx, 22, 0.0);
        assert_eq!(out[14], 0.0);
        assert_eq!(out[15], 1.0);
        assert_eq!(&out[16..20], &[2.0; 4]);
        assert_eq!(out[20], 3.0);
    }

    #[test]
    fn zoh_shifted_copy_when_all_on_time() {
        let src: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let rx: Vec<_> = src
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as f64, i as f64 + 7.0, v))
            .collect();
        let out = zoh_reconstruct(&rx, 57, 0.0);
        assert_eq!(&out[7..57], &src[..]);
    }

    #[test]
    fn zoh_ignores_stale_late_arrivals() {
        let rx = [(2.0, 3.0, 5.0), (1.0, 4.0, 9.0)];
        let out = zoh_reconstruct(&rx, 6, 0.0);
        assert_eq!(out[5], 5.0);
    }

    #[test]
    fn weber_on_zoh_output_adds_nothing() {
        let sig = SyntheticForce::default().generate(12_000, 3);
        let p = WeberParams::default();
        let mask = weber_sample(&sig, &p);
        let rx: Vec<_> = sig
            .iter()
            .enumerate()
            .filter(|(i, _)| mask[*i])
            .map(|(i, &v)| (i as f64, i as f64, v))
            .collect();
        let held = zoh_reconstruct(&rx, sig.len(), sig[0]);
        let again = weber_sample(&held, &p);
        assert_eq!(again, mask);
    }

    #[test]
    fn synthetic_fast_segments_are_weber_dense() {
        let gen = SyntheticForce::default();
        for seed in 0..5 {
            let sig = gen.generate(30_000, seed);
            let mask = weber_sample(&sig, &WeberParams::default());
            let (mut sent, mut total) = (0usize, 0usize);
            for (a, b) in gen.fast_segments(sig.len()) {
                sent += mask[a..b].iter().filter(|&&m| m).count();
                total += b - a;
            }
            let frac = sent as f64 / total as f64;
            assert!(frac > 0.88, "seed {seed}: {frac}");
        }
    }

    #[test]
    fn rtp_report_schedule() {
        assert_eq!(RtpReporter::report_times(500, 2000), vec![500, 1000, 1500, 2000]);
        let mut r = RtpReporter::new(500);
        let due: Vec<u64> = (0..1600).filter(|&t| r.due(t)).collect();
        assert_eq!(due, vec![500, 1000, 1500]);
    }

    #[test]
    fn multistep_rule() {
        assert_eq!(multistep_on_trigger(1, 4, Trigger::Congestion), 2);
        assert_eq!(multistep_on_trigger(4, 4, Trigger::Congestion), 4);
        assert_eq!(multistep_on_trigger(1, 4, Trigger::Steady), 1);
        assert_eq!(multistep_on_trigger(3, 4, Trigger::Steady), 2);
    }

    #[test]
    fn weber_mux_packets() {
        let mut m = WeberMux::new(1000);
        let s = HapticSample {
            gen_ms: 40,
            value: 1.0,
            size_bytes: 12,
        };
        let pkts = m.step(s, true, &[(AvKind::Audio, 160), (AvKind::Video, 2000)], (0, true));
        assert_eq!(pkts.len(), 4);
        let sizes: Vec<u32> = pkts.iter().map(|p| p.wire_bytes()).collect();
        assert_eq!(sizes, vec![160 + 67, 1000 + 67, 1000 + 67, 12 + 62]);
        assert!(m.step(s, false, &[], (0, true)).is_empty());
    }

    #[test]
    fn force_csv_round_trip() {
        let vals = vec![0.5, -0.25, 1.0];
        let mut buf = Vec::new();
        write_force_csv(&mut buf, &vals).unwrap();
        let pts = read_force_csv(&buf[..]).unwrap();
        assert_eq!(resample_force(&pts, 3), vals);
    }
}
