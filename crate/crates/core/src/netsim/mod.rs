//! Deterministic discrete-event simulator of a dumbbell network.
//!
//! ```text
//!  OP --prop--> [n1 queue] ==mu, prop==> n2 --prop--> TOP     (forward)
//!  OP <--prop-- n1 <==mu, prop== [n2 queue] <--prop-- TOP     (backward)
//! ```
//!
//! Only the two bottleneck ingress queues hold packets; the access links
//! add propagation delay only. Cross traffic joins and leaves at the
//! bottleneck. Time advances in integer nanoseconds; at equal timestamps
//! arrivals are processed before departures, and departures before
//! generation events.

mod engine;
mod queue;
mod scenario;
mod trace;
mod traffic;

pub use engine::run;
pub use queue::{DropTailQueue, QueueStats};
pub use scenario::{Protocol, Scenario};
pub use trace::{
    KChange, PacketOutcome, PacketRecord, QueueSample, ReportRecord, SampleMedia, SampleRecord,
    Stream, Trace, TriggerRecord,
};
pub use traffic::{source_seed, stepped_cbr_schedule, SourceClock, TrafficKind, TrafficSource};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// OP to TOP.
    Forward = 0,
    /// TOP to OP.
    Backward = 1,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::Forward, Channel::Backward];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Forward => "fwd",
            Channel::Backward => "bwd",
        }
    }

    pub fn reverse(self) -> Channel {
        match self {
            Channel::Forward => Channel::Backward,
            Channel::Backward => Channel::Forward,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Total instantaneous cross-traffic rate `(forward, backward)` in kbps at
/// `t_ms`.
pub fn offered_cross_traffic(scenario: &Scenario, t_ms: f64) -> (f64, f64) {
    let sum = |channel: Channel, sources: &[TrafficSource]| -> f64 {
        sources
            .iter()
            .enumerate()
            .map(|(i, s)| s.rate_at(t_ms, source_seed(scenario.seed, channel, i)))
            .sum()
    };
    (
        sum(Channel::Forward, &scenario.cross_fwd),
        sum(Channel::Backward, &scenario.cross_bwd),
    )
}
