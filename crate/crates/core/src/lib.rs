//! Dynamic packetization congestion control for telehaptic streams.
//!
//! A telehaptic session multiplexes a 1 kHz haptic stream with audio and
//! video into one packet stream per direction. When the network congests,
//! the transmitter merges `k` consecutive fragments into one packet,
//! trading a few milliseconds of packetization delay for a large cut in
//! header overhead. The pieces:
//!
//! * [`wire`]: the application-layer header codec.
//! * [`mux`]: priority multiplexing of haptic, audio and video.
//! * [`feedback`]: in-header delay notification and trigger detection.
//! * [`dpm`]: the `k` controller and packet assembly.
//! * [`netsim`]: a deterministic dumbbell simulator.
//! * [`baselines`]: the protocols DPM is compared against.
//! * [`analysis`]: delay bounds and trace metrics.
//! * [`presets`]: ready-made experiments with machine-checked assertions.

pub mod analysis;
pub mod baselines;
pub mod dpm;
pub mod error;
pub mod feedback;
pub mod mux;
pub mod netsim;
pub mod presets;
pub mod wire;

pub use error::{AnalysisError, ConfigError, PresetError, WireError};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/header.md")]
    pub struct Header;
    #[doc = include_str!("../../../book/src/rates.md")]
    pub struct Rates;
    #[doc = include_str!("../../../book/src/feedback.md")]
    pub struct Feedback;
    #[doc = include_str!("../../../book/src/dpm.md")]
    pub struct Dpm;
    #[doc = include_str!("../../../book/src/bounds.md")]
    pub struct Bounds;
    #[doc = include_str!("../../../book/src/simulator.md")]
    pub struct Simulator;
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub struct Experiments;
    #[doc = include_str!("../../../book/src/gaps.md")]
    pub struct Gaps;
}
