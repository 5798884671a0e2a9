use thiserror::Error;

use crate::wire::MediaKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("invalid media code {0} (expected 0, 1 or 2)")]
    InvalidMediaCode(u8),
    #[error("merge count {0} outside 1..=7")]
    MergeCountOutOfRange(u8),
    #[error("notification delay {0} us does not fit in 24 bits")]
    NotificationDelayOverflow(u32),
    #[error("A/V sub-header presence does not match media kind {0:?}")]
    AvHeaderMismatch(MediaKind),
    #[error("truncated header: need {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("haptic sampling rate must be 1000 Hz, got {0}")]
    HapticRate(u32),
    #[error("haptic sample size must be at least 1 byte")]
    EmptyHapticSample,
    #[error("payload rate {0} kbps gives a non-integral fragment size")]
    FractionalFragment(f64),
    #[error("haptic sample ({s_h} B) exceeds the fragment size ({p} B)")]
    HapticExceedsFragment { s_h: u32, p: u32 },
    #[error("channel has no A/V budget per fragment")]
    NoAvBudget,
    #[error("{kind} frame of {size} B exceeds the configured maximum of {max} B")]
    FrameTooLarge {
        kind: &'static str,
        size: usize,
        max: u32,
    },
    #[error("k_max must lie in 1..=7, got {0}")]
    KMax(u8),
    #[error("merge count {k} outside 1..={k_max}")]
    MergeCount { k: u8, k_max: u8 },
    #[error("invalid feedback parameters: {0}")]
    Feedback(&'static str),
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("network overloaded: R_kmax + R_cross = {load:.2} kbps exceeds capacity {mu:.2} kbps")]
    Infeasible { load: f64, mu: f64 },
    #[error("no samples fall inside the metrics window")]
    EmptyWindow,
    #[error("reference signal has zero energy")]
    ZeroEnergyReference,
    #[error("signals differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("A/V bound requires a positive per-fragment A/V budget")]
    NoAvBudget,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PresetError {
    #[error("unknown preset {0:?}")]
    Unknown(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}
