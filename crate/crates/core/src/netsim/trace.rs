use std::io::Write;

use serde::{Deserialize, Serialize};

use super::queue::QueueStats;
use super::{Channel, Scenario};
use crate::feedback::Trigger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMedia {
    Haptic,
    Audio,
    Video,
}

impl SampleMedia {
    pub const ALL: [SampleMedia; 3] = [SampleMedia::Haptic, SampleMedia::Audio, SampleMedia::Video];

    pub fn name(self) -> &'static str {
        match self {
            SampleMedia::Haptic => "haptic",
            SampleMedia::Audio => "audio",
            SampleMedia::Video => "video",
        }
    }
}

/// One haptic sample or one A/V frame.
///
/// For haptic samples `recv_ms` is the display time: samples of a merged
/// packet are played out 1 ms apart starting at the packet's arrival. For
/// frames it is the arrival of the packet that completed the frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRecord {
    pub channel: Channel,
    pub media: SampleMedia,
    pub gen_ms: u64,
    pub recv_ms: Option<f64>,
    /// Merge count of the packet that carried (the end of) the sample.
    pub k: u8,
    pub value: f64,
    pub dropped: bool,
}

impl SampleRecord {
    pub fn delay_ms(&self) -> Option<f64> {
        self.recv_ms.map(|r| r - self.gen_ms as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stream {
    Telehaptic(Channel),
    /// Cross source by index within its channel's list.
    Cross(Channel, usize),
    Probe(Channel),
    Report(Channel),
}

impl Stream {
    pub fn channel(self) -> Channel {
        match self {
            Stream::Telehaptic(c) | Stream::Cross(c, _) | Stream::Probe(c) | Stream::Report(c) => c,
        }
    }

    pub fn label(self) -> String {
        match self {
            Stream::Telehaptic(c) => format!("telehaptic_{}", c.name()),
            Stream::Cross(c, i) => format!("cross_{}_{i}", c.name()),
            Stream::Probe(c) => format!("probe_{}", c.name()),
            Stream::Report(c) => format!("report_{}", c.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketOutcome {
    Delivered,
    Dropped,
    /// Still in the network when the run ended.
    InFlight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub stream: Stream,
    pub send_ms: f64,
    pub wire_bytes: u32,
    pub k: u8,
    pub outcome: PacketOutcome,
    pub recv_ms: Option<f64>,
}

/// `k` of the transmitter on `channel` became `k` at `t_ms`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KChange {
    pub channel: Channel,
    pub t_ms: f64,
    pub k: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerRecord {
    /// Channel whose transmitter received the trigger.
    pub channel: Channel,
    pub t_ms: f64,
    pub trigger: Trigger,
}

/// A delay report about `channel` reaching its transmitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRecord {
    pub channel: Channel,
    pub t_ms: f64,
    pub reported_delay_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueSample {
    pub t_ms: u64,
    pub fwd_pkts: u32,
    pub fwd_bytes: u64,
    pub bwd_pkts: u32,
    pub bwd_bytes: u64,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub scenario: Scenario,
    /// Sorted by `(gen_ms, channel, media)`.
    pub samples: Vec<SampleRecord>,
    pub packets: Vec<PacketRecord>,
    pub k_changes: Vec<KChange>,
    pub triggers: Vec<TriggerRecord>,
    pub reports: Vec<ReportRecord>,
    pub queue: Vec<QueueSample>,
    /// Indexed by channel.
    pub queue_stats: [QueueStats; 2],
    /// Delay measurements clamped to zero by clock offset.
    pub clamped_measurements: u64,
}

impl Trace {
    pub fn samples_of(
        &self,
        channel: Channel,
        media: SampleMedia,
    ) -> impl Iterator<Item = &SampleRecord> + '_ {
        self.samples
            .iter()
            .filter(move |s| s.channel == channel && s.media == media)
    }

    /// `k` timeline of one transmitter, starting with `(0, 1)`.
    pub fn k_timeline(&self, channel: Channel) -> Vec<(f64, u8)> {
        std::iter::once((0.0, 1))
            .chain(
                self.k_changes
                    .iter()
                    .filter(|c| c.channel == channel)
                    .map(|c| (c.t_ms, c.k)),
            )
            .collect()
    }

    /// `k` in force on `channel` at `t_ms`.
    pub fn k_at(&self, channel: Channel, t_ms: f64) -> u8 {
        self.k_timeline(channel)
            .into_iter()
            .take_while(|&(t, _)| t <= t_ms)
            .last()
            .map(|(_, k)| k)
            .unwrap_or(1)
    }

    /// Writes the per-sample CSV
    /// `t_gen_ms,t_recv_ms,channel,media,delay_ms,k,dropped`.
    /// Undelivered samples leave the time and delay columns empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_gen_ms", "t_recv_ms", "channel", "media", "delay_ms", "k", "dropped"])?;
        for s in &self.samples {
            let (recv, delay) = match s.recv_ms {
                Some(r) => (format!("{r:.6}"), format!("{:.6}", r - s.gen_ms as f64)),
                None => (String::new(), String::new()),
            };
            w.write_record([
                s.gen_ms.to_string(),
                recv,
                s.channel.name().to_string(),
                s.media.name().to_string(),
                delay,
                s.k.to_string(),
                u8::from(s.dropped).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `t_ms,channel,k` rows, one per change.
    pub fn write_k_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_ms", "channel", "k"])?;
        for c in &self.k_changes {
            w.write_record([format!("{:.6}", c.t_ms), c.channel.name().into(), c.k.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Queue occupancy every millisecond.
    pub fn write_queue_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_ms", "fwd_pkts", "fwd_bytes", "bwd_pkts", "bwd_bytes"])?;
        for q in &self.queue {
            w.write_record([
                q.t_ms.to_string(),
                q.fwd_pkts.to_string(),
                q.fwd_bytes.to_string(),
                q.bwd_pkts.to_string(),
                q.bwd_bytes.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
