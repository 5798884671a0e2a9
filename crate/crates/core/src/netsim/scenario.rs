use serde::{Deserialize, Serialize};

use crate::baselines::{ForceSource, WeberParams};
use crate::dpm::{DpmParams, RatePolicy};
use crate::error::ConfigError;
use crate::feedback::FeedbackParams;
use crate::mux::{derive_rates, MediaConfig};

use super::traffic::TrafficSource;

/// Transmitter/feedback policy run by both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Dpm,
    DpmHoldup,
    NoMerge,
    Multistep,
    RtpFeedback,
    Nafcah,
    WeberMux,
}

impl Protocol {
    pub const ALL: [Protocol; 7] = [
        Protocol::Dpm,
        Protocol::DpmHoldup,
        Protocol::NoMerge,
        Protocol::Multistep,
        Protocol::RtpFeedback,
        Protocol::Nafcah,
        Protocol::WeberMux,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Dpm => "dpm",
            Protocol::DpmHoldup => "dpm_holdup",
            Protocol::NoMerge => "no_merge",
            Protocol::Multistep => "multistep",
            Protocol::RtpFeedback => "rtp_feedback",
            Protocol::Nafcah => "nafcah",
            Protocol::WeberMux => "weber_mux",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Protocol::ALL.into_iter().find(|p| p.name() == s)
    }

    /// Rate policy applied to `k` by the packetizer.
    pub fn rate_policy(self) -> RatePolicy {
        match self {
            Protocol::Dpm | Protocol::DpmHoldup => RatePolicy::StepIncrease,
            Protocol::Multistep | Protocol::Nafcah => RatePolicy::MultistepIncrease,
            Protocol::NoMerge | Protocol::RtpFeedback | Protocol::WeberMux => RatePolicy::Fixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Capacity of each bottleneck link, kbps.
    pub mu_kbps: f64,
    /// Propagation delay of each of the three hops, ms.
    pub link_prop_ms: f64,
    /// Droptail limit of each bottleneck queue, bytes.
    pub queue_capacity_bytes: u64,
    pub media_fwd: MediaConfig,
    pub media_bwd: MediaConfig,
    pub cross_fwd: Vec<TrafficSource>,
    pub cross_bwd: Vec<TrafficSource>,
    pub protocol: Protocol,
    pub k_max: u8,
    /// Hold-up duration used by `dpm_holdup`, ms.
    pub hold_up_ms: f64,
    pub feedback: FeedbackParams,
    /// After changing `k`, ignore notifications for one measured round
    /// trip and restart the delay filter.
    pub settle_after_switch: bool,
    pub duration_ms: u64,
    pub seed: u64,
    /// Receiver clock minus true time, ms.
    pub clock_offset_ms: f64,
    /// Start of the interval metrics are computed over, ms.
    pub metrics_start_ms: f64,
    /// Backward-channel force signal.
    pub force: ForceSource,
    pub weber: WeberParams,
    pub nafcah_probe_hz: u32,
    pub nafcah_probe_bytes: u32,
    pub rtp_report_interval_ms: u64,
    pub rtp_report_bytes: u32,
    /// Largest A/V payload per packet for `weber_mux`, bytes.
    pub weber_av_packet_bytes: u32,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "default".into(),
            mu_kbps: 1500.0,
            link_prop_ms: 5.0,
            queue_capacity_bytes: 100_000,
            media_fwd: MediaConfig::forward(),
            media_bwd: MediaConfig::backward(),
            cross_fwd: Vec::new(),
            cross_bwd: Vec::new(),
            protocol: Protocol::Dpm,
            k_max: 4,
            hold_up_ms: 500.0,
            feedback: FeedbackParams::default(),
            settle_after_switch: true,
            duration_ms: 50_000,
            seed: 1,
            clock_offset_ms: 0.0,
            metrics_start_ms: 500.0,
            force: ForceSource::default(),
            weber: WeberParams::default(),
            nafcah_probe_hz: 100,
            nafcah_probe_bytes: 64,
            rtp_report_interval_ms: 500,
            rtp_report_bytes: 86,
            weber_av_packet_bytes: 1000,
        }
    }
}

impl Scenario {
    /// One-way propagation delay across the three hops, ms.
    pub fn tau_ms(&self) -> f64 {
        3.0 * self.link_prop_ms
    }

    pub fn dpm_params(&self) -> DpmParams {
        DpmParams {
            k_max: self.k_max,
            hold_up_ms: if self.protocol == Protocol::DpmHoldup {
                self.hold_up_ms
            } else {
                0.0
            },
            policy: self.protocol.rate_policy(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Scenario(m));
        if !(self.mu_kbps > 0.0 && self.mu_kbps.is_finite()) {
            return bad(format!("mu_kbps must be positive, got {}", self.mu_kbps));
        }
        if self.duration_ms == 0 {
            return bad("duration_ms must be positive".into());
        }
        if !(self.link_prop_ms >= 0.0) {
            return bad("link_prop_ms must be non-negative".into());
        }
        if self.queue_capacity_bytes == 0 {
            return bad("queue_capacity_bytes must be positive".into());
        }
        if self.k_max == 0 || self.k_max > crate::wire::MAX_MERGE {
            return Err(ConfigError::KMax(self.k_max));
        }
        if !(self.hold_up_ms >= 0.0) {
            return bad("hold_up_ms must be non-negative".into());
        }
        if self.protocol == Protocol::Nafcah && self.nafcah_probe_hz == 0 {
            return bad("nafcah_probe_hz must be positive".into());
        }
        if self.protocol == Protocol::RtpFeedback && self.rtp_report_interval_ms == 0 {
            return bad("rtp_report_interval_ms must be positive".into());
        }
        if self.weber_av_packet_bytes == 0 {
            return bad("weber_av_packet_bytes must be positive".into());
        }
        self.feedback.validate()?;
        self.weber.validate()?;
        derive_rates(&self.media_fwd)?;
        derive_rates(&self.media_bwd)?;
        for (dir, sources) in [("cross_fwd", &self.cross_fwd), ("cross_bwd", &self.cross_bwd)] {
            for (i, s) in sources.iter().enumerate() {
                s.validate()
                    .map_err(|m| ConfigError::Scenario(format!("{dir}[{i}]: {m}")))?;
            }
            for (i, a) in sources.iter().enumerate() {
                for b in &sources[i + 1..] {
                    if a.id == b.id && a.overlaps(b) {
                        return bad(format!("{dir}: overlapping schedules for source id {:?}", a.id));
                    }
                }
            }
        }
        Ok(())
    }
}
