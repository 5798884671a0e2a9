//! Closed-form delay bounds and trace metrics.
//!
//! The haptic bound models DPM in steady state with constant-rate cross
//! traffic: the worst delay builds up while the controller probes one step
//! below `k_opt` and waits for `N` rising notifications to come back. With
//! `rho = (R_cross + R_{k_opt-1} - mu) / mu`,
//!
//! ```text
//! d_inc = N (k_opt - 1) (1 + rho) + 2 tau + 1
//! q_inc = rho * mu * d_inc
//! d_hap = tau + q_inc / mu + (k_opt - 1)
//! ```
//!
//! Times are in ms and rates in kbps; `kbps * ms` is bits, so `q_inc` is
//! in bits.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dpm::RateModel;
use crate::error::AnalysisError;
use crate::mux::{derive_rates, MediaConfig};
use crate::netsim::{Channel, PacketOutcome, SampleMedia, Stream, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub mu_kbps: f64,
    pub tau_ms: f64,
    pub n: usize,
    /// Total cross traffic on the channel, kbps.
    pub r_cross_kbps: f64,
    pub rate_model: RateModel,
    pub k_max: u8,
}

impl BoundInputs {
    /// Defaults of the reference setup: 1.5 Mbps, 15 ms, `N = 8`,
    /// `k_max = 4`, backward-channel rate model.
    pub fn reference(r_cross_kbps: f64) -> Self {
        BoundInputs {
            mu_kbps: 1500.0,
            tau_ms: 15.0,
            n: 8,
            r_cross_kbps,
            rate_model: RateModel::for_media(&MediaConfig::backward())
                .expect("reference media config is valid"),
            k_max: 4,
        }
    }

    fn rate(&self, k: u8) -> f64 {
        self.rate_model.payload_kbps + self.rate_model.overhead_kbps / f64::from(k)
    }

    /// `(R_cross + R_{k_opt-1} - mu) / mu`, or 0 when `k_opt = 1`.
    pub fn rho(&self) -> Result<f64, AnalysisError> {
        let k = k_opt(self)?;
        if k == 1 {
            return Ok(0.0);
        }
        Ok((self.r_cross_kbps + self.rate(k - 1) - self.mu_kbps) / self.mu_kbps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundOutputs {
    pub k_opt: u8,
    pub d_inc_ms: f64,
    pub q_inc_bits: f64,
    pub d_hap_ms: f64,
    pub d_aud_ms: f64,
    pub d_vid_ms: f64,
    pub gamma1_ms: f64,
    pub jitter_bound_ms: f64,
}

/// Smallest `k` whose rate fits next to the cross traffic.
pub fn k_opt(inputs: &BoundInputs) -> Result<u8, AnalysisError> {
    (1..=inputs.k_max)
        .find(|&k| inputs.rate(k) + inputs.r_cross_kbps <= inputs.mu_kbps)
        .ok_or(AnalysisError::Infeasible {
            load: inputs.rate(inputs.k_max.max(1)) + inputs.r_cross_kbps,
            mu: inputs.mu_kbps,
        })
}

/// Time until the congestion trigger after switching to `k_opt - 1`, ms.
pub fn d_inc(inputs: &BoundInputs) -> Result<f64, AnalysisError> {
    let k = f64::from(k_opt(inputs)?) - 1.0;
    let n = inputs.n as f64;
    let rho = inputs.rho()?;
    Ok(n * k + n * rho * k + 2.0 * inputs.tau_ms + 1.0)
}

/// Peak queue build-up, bits.
pub fn q_inc(inputs: &BoundInputs) -> Result<f64, AnalysisError> {
    Ok(inputs.rho()? * inputs.mu_kbps * d_inc(inputs)?)
}

/// Maximum steady-state haptic delay, ms. With `k_opt = 1` there is no
/// lower step to probe and the bound is `tau` plus the 1-merge
/// transmission time.
pub fn d_hap_bound(inputs: &BoundInputs) -> Result<f64, AnalysisError> {
    let k = k_opt(inputs)?;
    if k == 1 {
        return Ok(inputs.tau_ms + gamma1(&inputs.rate_model, inputs.mu_kbps));
    }
    let km1 = f64::from(k - 1);
    let n = inputs.n as f64;
    let rho = inputs.rho()?;
    Ok(inputs.tau_ms + km1 + (n * km1 + 2.0 * inputs.tau_ms + 1.0) * rho + n * km1 * rho * rho)
}

/// Audio and video delay bounds given a haptic delay bound.
pub fn av_bounds(media: &MediaConfig, k_max: u8, d_hap_ms: f64) -> Result<(f64, f64), AnalysisError> {
    let s_m = derive_rates(media)
        .map_err(|_| AnalysisError::NoAvBudget)?
        .av_bytes_per_fragment;
    if s_m == 0 {
        return Err(AnalysisError::NoAvBudget);
    }
    let pack = f64::from(k_max.max(1)) - 1.0;
    let d_aud = d_hap_ms + f64::from(media.s_a) / f64::from(s_m) + pack;
    let d_vid = if media.f_v > 0 {
        d_hap_ms + 1000.0 / f64::from(media.f_v) + pack
    } else {
        d_hap_ms + pack
    };
    Ok((d_aud, d_vid))
}

/// Transmission time of a 1-merge packet at the bottleneck, ms.
pub fn gamma1(model: &RateModel, mu_kbps: f64) -> f64 {
    // one packet per ms at R_1 kbps is R_1 bits
    (model.payload_kbps + model.overhead_kbps) / mu_kbps
}

/// Bound on the display-time jitter caused by a 1 -> 4 switch.
pub fn jitter_bound(model: &RateModel, mu_kbps: f64) -> f64 {
    3.0 * (1.0 + gamma1(model, mu_kbps))
}

pub fn bounds(inputs: &BoundInputs, media: &MediaConfig) -> Result<BoundOutputs, AnalysisError> {
    let d_hap = d_hap_bound(inputs)?;
    let (d_aud, d_vid) = av_bounds(media, inputs.k_max, d_hap)?;
    let g = gamma1(&inputs.rate_model, inputs.mu_kbps);
    Ok(BoundOutputs {
        k_opt: k_opt(inputs)?,
        d_inc_ms: d_inc(inputs)?,
        q_inc_bits: q_inc(inputs)?,
        d_hap_ms: d_hap,
        d_aud_ms: d_aud,
        d_vid_ms: d_vid,
        gamma1_ms: g,
        jitter_bound_ms: 3.0 * (1.0 + g),
    })
}

/// Writes one row per evaluated bound, keyed by `(mu, tau, N, R_cross)`.
pub fn write_bound_table<W: Write>(
    writer: W,
    rows: &[(BoundInputs, BoundOutputs)],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "mu_kbps", "tau_ms", "n", "r_cross_kbps", "k_opt", "d_inc_ms", "q_inc_bits", "d_hap_ms",
        "d_aud_ms", "d_vid_ms", "gamma1_ms", "jitter_bound_ms",
    ])?;
    for (i, o) in rows {
        w.write_record([
            format!("{}", i.mu_kbps),
            format!("{}", i.tau_ms),
            i.n.to_string(),
            format!("{}", i.r_cross_kbps),
            o.k_opt.to_string(),
            format!("{:.4}", o.d_inc_ms),
            format!("{:.4}", o.q_inc_bits),
            format!("{:.4}", o.d_hap_ms),
            format!("{:.4}", o.d_aud_ms),
            format!("{:.4}", o.d_vid_ms),
            format!("{:.4}", o.gamma1_ms),
            format!("{:.4}", o.jitter_bound_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosLimit {
    pub delay_ms: f64,
    pub jitter_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosSpec {
    pub haptic: QosLimit,
    pub audio: QosLimit,
    pub video: QosLimit,
}

impl Default for QosSpec {
    fn default() -> Self {
        QosSpec {
            haptic: QosLimit {
                delay_ms: 30.0,
                jitter_ms: 10.0,
            },
            audio: QosLimit {
                delay_ms: 150.0,
                jitter_ms: 30.0,
            },
            video: QosLimit {
                delay_ms: 400.0,
                jitter_ms: 30.0,
            },
        }
    }
}

impl QosSpec {
    pub fn limit(&self, media: SampleMedia) -> QosLimit {
        match media {
            SampleMedia::Haptic => self.haptic,
            SampleMedia::Audio => self.audio,
            SampleMedia::Video => self.video,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MediaMetrics {
    pub channel: Channel,
    pub media: SampleMedia,
    pub delivered: usize,
    pub lost: usize,
    pub max_delay_ms: f64,
    pub mean_delay_ms: f64,
    pub max_jitter_ms: f64,
    pub mean_jitter_ms: f64,
    pub delay_ok: bool,
    pub jitter_ok: bool,
}

impl MediaMetrics {
    pub fn loss_fraction(&self) -> f64 {
        let n = self.delivered + self.lost;
        if n == 0 {
            0.0
        } else {
            self.lost as f64 / n as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamMetrics {
    pub stream: String,
    pub sent: usize,
    pub delivered: usize,
    pub dropped: usize,
    pub throughput_kbps: f64,
    pub loss_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub window_ms: (f64, f64),
    pub media: Vec<MediaMetrics>,
    pub streams: Vec<StreamMetrics>,
}

impl Summary {
    pub fn get(&self, channel: Channel, media: SampleMedia) -> Option<&MediaMetrics> {
        self.media
            .iter()
            .find(|m| m.channel == channel && m.media == media)
    }

    pub fn stream(&self, label: &str) -> Option<&StreamMetrics> {
        self.streams.iter().find(|s| s.stream == label)
    }

    /// Every media delay and jitter cell inside its QoS limit.
    pub fn qos_pass(&self) -> bool {
        self.media.iter().all(|m| m.delay_ok && m.jitter_ok)
    }

    /// Dropped telehaptic packets over packets sent, both channels.
    pub fn telehaptic_loss(&self) -> f64 {
        let (mut sent, mut dropped) = (0usize, 0usize);
        for s in self.streams.iter().filter(|s| s.stream.starts_with("telehaptic")) {
            sent += s.delivered + s.dropped;
            dropped += s.dropped;
        }
        if sent == 0 {
            0.0
        } else {
            dropped as f64 / sent as f64
        }
    }

    /// Loss over all cross-traffic streams.
    pub fn cross_loss(&self) -> f64 {
        let (mut sent, mut dropped) = (0usize, 0usize);
        for s in self.streams.iter().filter(|s| s.stream.starts_with("cross")) {
            sent += s.delivered + s.dropped;
            dropped += s.dropped;
        }
        if sent == 0 {
            0.0
        } else {
            dropped as f64 / sent as f64
        }
    }

    /// `key,value` lines followed by per-media and per-stream tables.
    pub fn write_report<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "window_ms,{},{}", self.window_ms.0, self.window_ms.1)?;
        writeln!(w, "qos_pass,{}", self.qos_pass())?;
        writeln!(w, "telehaptic_loss,{:.6}", self.telehaptic_loss())?;
        writeln!(w)?;
        writeln!(
            w,
            "channel,media,delivered,lost,max_delay_ms,mean_delay_ms,max_jitter_ms,mean_jitter_ms,delay_ok,jitter_ok"
        )?;
        for m in &self.media {
            writeln!(
                w,
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{}",
                m.channel.name(),
                m.media.name(),
                m.delivered,
                m.lost,
                m.max_delay_ms,
                m.mean_delay_ms,
                m.max_jitter_ms,
                m.mean_jitter_ms,
                m.delay_ok,
                m.jitter_ok
            )?;
        }
        writeln!(w)?;
        writeln!(w, "stream,sent,delivered,dropped,throughput_kbps,loss_fraction")?;
        for s in &self.streams {
            writeln!(
                w,
                "{},{},{},{},{:.6},{:.6}",
                s.stream, s.sent, s.delivered, s.dropped, s.throughput_kbps, s.loss_fraction
            )?;
        }
        Ok(())
    }
}

/// Jitter of consecutive delivered samples:
/// `|(recv_i - recv_{i-1}) - (gen_i - gen_{i-1})|`. Input must be sorted by
/// generation time.
pub fn jitter_series(samples: &[(f64, f64)]) -> Vec<f64> {
    samples
        .windows(2)
        .map(|w| ((w[1].1 - w[0].1) - (w[1].0 - w[0].0)).abs())
        .collect()
}

/// Metrics over samples generated in `[start_ms, end_ms]` and packets sent
/// in the same interval.
pub fn metrics(trace: &Trace, window_ms: (f64, f64), qos: &QosSpec) -> Result<Summary, AnalysisError> {
    let (start, end) = window_ms;
    let in_window = |t: f64| t >= start && t <= end;
    let mut media = Vec::new();
    for channel in Channel::BOTH {
        for kind in SampleMedia::ALL {
            let mut delivered = Vec::new();
            let mut lost = 0;
            for s in trace.samples_of(channel, kind) {
                if !in_window(s.gen_ms as f64) {
                    continue;
                }
                match s.recv_ms {
                    Some(r) => delivered.push((s.gen_ms as f64, r)),
                    None if s.dropped => lost += 1,
                    None => {}
                }
            }
            if delivered.is_empty() && lost == 0 {
                continue;
            }
            let delays: Vec<f64> = delivered.iter().map(|(g, r)| r - g).collect();
            let jitter = jitter_series(&delivered);
            let limit = qos.limit(kind);
            let max_delay = delays.iter().copied().fold(f64::NAN, f64::max);
            let max_jitter = jitter.iter().copied().fold(0.0, f64::max);
            media.push(MediaMetrics {
                channel,
                media: kind,
                delivered: delivered.len(),
                lost,
                max_delay_ms: max_delay,
                mean_delay_ms: mean(&delays),
                max_jitter_ms: max_jitter,
                mean_jitter_ms: mean(&jitter),
                delay_ok: !(max_delay > limit.delay_ms),
                jitter_ok: max_jitter <= limit.jitter_ms,
            });
        }
    }
    if media.is_empty() {
        return Err(AnalysisError::EmptyWindow);
    }
    let mut streams: Vec<(Stream, StreamMetrics)> = Vec::new();
    for p in trace.packets.iter().filter(|p| in_window(p.send_ms)) {
        let entry = match streams.iter_mut().find(|(s, _)| *s == p.stream) {
            Some((_, m)) => m,
            None => {
                streams.push((
                    p.stream,
                    StreamMetrics {
                        stream: p.stream.label(),
                        sent: 0,
                        delivered: 0,
                        dropped: 0,
                        throughput_kbps: 0.0,
                        loss_fraction: 0.0,
                    },
                ));
                &mut streams.last_mut().expect("just pushed").1
            }
        };
        entry.sent += 1;
        match p.outcome {
            PacketOutcome::Delivered => {
                entry.delivered += 1;
                entry.throughput_kbps += f64::from(p.wire_bytes) * 8.0;
            }
            PacketOutcome::Dropped => entry.dropped += 1,
            PacketOutcome::InFlight => {}
        }
    }
    let span = (end - start).max(f64::MIN_POSITIVE);
    streams.sort_by_key(|(s, _)| *s);
    let streams = streams
        .into_iter()
        .map(|(_, mut m)| {
            // bits per ms is kbps
            m.throughput_kbps /= span;
            let settled = m.delivered + m.dropped;
            m.loss_fraction = if settled == 0 {
                0.0
            } else {
                m.dropped as f64 / settled as f64
            };
            m
        })
        .collect();
    Ok(Summary {
        window_ms,
        media,
        streams,
    })
}

/// Metrics over the scenario's configured window, up to the end of the
/// run.
pub fn scenario_metrics(trace: &Trace) -> Result<Summary, AnalysisError> {
    let sc = &trace.scenario;
    metrics(
        trace,
        (sc.metrics_start_ms, sc.duration_ms as f64),
        &QosSpec::default(),
    )
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Reconstruction quality in dB; `+inf` for a perfect copy.
pub fn snr_db(reference: &[f64], reconstructed: &[f64]) -> Result<f64, AnalysisError> {
    if reference.len() != reconstructed.len() {
        return Err(AnalysisError::LengthMismatch(reference.len(), reconstructed.len()));
    }
    let signal: f64 = reference.iter().map(|x| x * x).sum();
    if signal == 0.0 {
        return Err(AnalysisError::ZeroEnergyReference);
    }
    let noise: f64 = reference
        .iter()
        .zip(reconstructed)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / noise).log10())
}

/// Zero-order-hold reconstruction of the backward force signal as
/// displayed at the operator, on ticks `0..len`.
pub fn displayed_force(trace: &Trace, len: usize) -> Vec<f64> {
    let rx: Vec<(f64, f64, f64)> = trace
        .samples_of(Channel::Backward, SampleMedia::Haptic)
        .filter_map(|s| s.recv_ms.map(|r| (s.gen_ms as f64, r, s.value)))
        .collect();
    let initial = rx.first().map(|r| r.2).unwrap_or(0.0);
    crate::baselines::zoh_reconstruct(&rx, len, initial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_opt_examples() {
        assert_eq!(k_opt(&BoundInputs::reference(660.0)), Ok(2));
        assert_eq!(k_opt(&BoundInputs::reference(800.0)), Ok(4));
        assert_eq!(k_opt(&BoundInputs::reference(400.0)), Ok(1));
        assert!(matches!(
            k_opt(&BoundInputs::reference(900.0)),
            Err(AnalysisError::Infeasible { .. })
        ));
    }

    #[test]
    fn d_hap_examples() {
        // rho = 0 leaves tau + packetization
        let mut i = BoundInputs::reference(0.0);
        i.r_cross_kbps = 1500.0 - 1096.0;
        assert_eq!(k_opt(&i), Ok(1));
        i.r_cross_kbps += 1.0;
        // now k_opt = 2, rho = 1 / 1500
        let b = d_hap_bound(&i).unwrap();
        assert!(b > 16.0 && b < 16.1);

        // hand arithmetic: rho = (660 + 1096 - 1500) / 1500
        let rho: f64 = 256.0 / 1500.0;
        let want = 15.0 + 1.0 + (8.0 + 30.0 + 1.0) * rho + 8.0 * rho * rho;
        let got = d_hap_bound(&BoundInputs::reference(660.0)).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 22.889).abs() < 1e-3);

        let rho: f64 = (800.0 + 1096.0 - 1500.0 + 536.0 / 3.0 - 536.0) / 1500.0;
        let want = 15.0 + 3.0 + (24.0 + 31.0) * rho + 24.0 * rho * rho;
        let got = d_hap_bound(&BoundInputs::reference(800.0)).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 19.43).abs() < 0.01, "{got}");
    }

    #[test]
    fn d_hap_equals_components() {
        for r in [500.0, 600.0, 660.0, 700.0, 800.0] {
            let i = BoundInputs::reference(r);
            let k = f64::from(k_opt(&i).unwrap());
            let via_parts = i.tau_ms + q_inc(&i).unwrap() / i.mu_kbps + (k - 1.0);
            assert!((via_parts - d_hap_bound(&i).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn av_bound_examples() {
        let (a, v) = av_bounds(&MediaConfig::backward(), 4, 30.0).unwrap();
        assert!((a - (30.0 + 160.0 / 58.0 + 3.0)).abs() < 1e-12);
        assert_eq!((a * 100.0).trunc() / 100.0, 35.75);
        assert_eq!(v, 73.0);
        let tiny = MediaConfig {
            s_a: 0,
            f_a: 0,
            ..MediaConfig::backward()
        };
        // no audio bytes and no packetization: audio bound is d_hap
        assert_eq!(av_bounds(&tiny, 1, 30.0).unwrap().0, 30.0);
    }

    #[test]
    fn jitter_bound_examples() {
        let m = RateModel::for_media(&MediaConfig::backward()).unwrap();
        let g = gamma1(&m, 1500.0);
        assert!((g - 137.0 * 8.0 / 1500.0).abs() < 1e-12);
        assert!((jitter_bound(&m, 1500.0) - 5.192).abs() < 1e-3);
        assert!((jitter_bound(&m, 1e12) - 3.0).abs() < 1e-6);
    }

    #[test]
    fn snr_examples() {
        let r = [1.0, -1.0, 0.5];
        assert_eq!(snr_db(&r, &r), Ok(f64::INFINITY));
        // unit-energy reference, constant error e: SNR = -10 log10(n e^2)
        let unit = [0.6, 0.8];
        let e: f64 = 0.1;
        let rec = [0.6 + e, 0.8 + e];
        let want = -10.0 * (2.0 * e * e).log10();
        assert!((snr_db(&unit, &rec).unwrap() - want).abs() < 1e-9);
        assert_eq!(snr_db(&[0.0, 0.0], &[1.0, 1.0]), Err(AnalysisError::ZeroEnergyReference));
        assert_eq!(snr_db(&[1.0], &[1.0, 2.0]), Err(AnalysisError::LengthMismatch(1, 2)));
    }

    #[test]
    fn jitter_definition() {
        let constant: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, i as f64 + 20.0)).collect();
        assert!(jitter_series(&constant).iter().all(|&j| j == 0.0));
        let mut gap = constant.clone();
        for s in gap.iter_mut().skip(5) {
            s.1 += 3.0;
        }
        let j = jitter_series(&gap);
        assert_eq!(j.iter().copied().fold(0.0, f64::max), 3.0);
    }

    #[test]
    fn bound_table_csv() {
        let i = BoundInputs::reference(660.0);
        let o = bounds(&i, &MediaConfig::backward()).unwrap();
        let mut buf = Vec::new();
        write_bound_table(&mut buf, &[(i, o)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("1500,15,8,660,2,"));
    }
}
