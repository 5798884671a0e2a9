//! In-header delay notification and trigger generation.
//!
//! Each endpoint measures the one-way delay of packets it receives and
//! echoes the latest value in the headers it sends back. The peer feeds
//! fresh echoes through an EWMA and looks at the last `N` filtered values:
//! `N` strictly increasing values raise [`Trigger::Congestion`]; a window
//! that has no strict trend and stays inside a relative band around its
//! first entry raises [`Trigger::Steady`].

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::wire::{PacketHeader, MAX_NOTIFICATION_DELAY_US};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackParams {
    pub alpha: f64,
    pub window: usize,
    pub tolerance: f64,
}

impl Default for FeedbackParams {
    fn default() -> Self {
        FeedbackParams {
            alpha: 0.2,
            window: 8,
            tolerance: 0.10,
        }
    }
}

impl FeedbackParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ConfigError::Feedback("alpha must lie in (0, 1)"));
        }
        if self.window < 2 {
            return Err(ConfigError::Feedback("window must hold at least 2 values"));
        }
        if !(self.tolerance > 0.0) {
            return Err(ConfigError::Feedback("tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Trigger {
    /// Delays are building up (I_C).
    Congestion,
    /// Delays are flat (I_S).
    Steady,
}

/// Feedback state of one endpoint.
///
/// The measurement half tracks the channel this endpoint receives on; the
/// estimator half tracks the channel it transmits on, as reported back by
/// the peer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackState {
    params: FeedbackParams,
    d_avg: Option<f64>,
    window: VecDeque<f64>,
    last_measured_us: Option<u32>,
    fresh: bool,
    clamped: u64,
    last_notified_ms: Option<f64>,
}

impl FeedbackState {
    pub fn new(params: FeedbackParams) -> Result<Self, ConfigError> {
        params.validate()?;
        Ok(FeedbackState {
            params,
            d_avg: None,
            window: VecDeque::with_capacity(params.window),
            last_measured_us: None,
            fresh: false,
            clamped: 0,
            last_notified_ms: None,
        })
    }

    pub fn params(&self) -> &FeedbackParams {
        &self.params
    }

    pub fn d_avg(&self) -> Option<f64> {
        self.d_avg
    }

    pub fn window(&self) -> &VecDeque<f64> {
        &self.window
    }

    /// Number of measurements clamped to zero because the receiver clock
    /// ran behind the sender's timestamp.
    pub fn clamped_count(&self) -> u64 {
        self.clamped
    }

    /// One-way delay of a received packet, in ms, measured against the
    /// earliest haptic sample it carries. The value becomes the next
    /// piggybacked notification.
    pub fn measure_delay(
        &mut self,
        recv_time_ms: f64,
        header: &PacketHeader,
        clock_offset_ms: f64,
    ) -> f64 {
        let mut delay = recv_time_ms + clock_offset_ms - f64::from(header.haptic_timestamp_ms);
        if delay < 0.0 {
            delay = 0.0;
            self.clamped += 1;
        }
        let us = (delay * 1000.0).round().min(f64::from(MAX_NOTIFICATION_DELAY_US)) as u32;
        self.last_measured_us = Some(us);
        self.fresh = true;
        delay
    }

    /// Notification fields for the next outgoing header:
    /// `(delay_us, delay_indicator)`. The first packet after a measurement
    /// carries the indicator cleared; repeats carry it set.
    pub fn piggyback(&mut self) -> (u32, bool) {
        match self.last_measured_us {
            None => (0, true),
            Some(us) => {
                let repeat = !self.fresh;
                self.fresh = false;
                (us, repeat)
            }
        }
    }

    /// Forgets the filter state and the window.
    pub fn restart(&mut self) {
        self.d_avg = None;
        self.window.clear();
    }

    /// Latest fresh notification seen, ms.
    pub fn last_notified_ms(&self) -> Option<f64> {
        self.last_notified_ms
    }

    /// Applies a received notification. Repeats are ignored outright.
    pub fn ingest_notification(&mut self, delay_us: u32, repeat: bool) -> Option<Trigger> {
        if repeat {
            return None;
        }
        let d = f64::from(delay_us) / 1000.0;
        self.last_notified_ms = Some(d);
        let a = self.params.alpha;
        let avg = match self.d_avg {
            None => d,
            Some(prev) => a * d + (1.0 - a) * prev,
        };
        self.d_avg = Some(avg);
        if self.window.len() == self.params.window {
            self.window.pop_front();
        }
        self.window.push_back(avg);
        let trigger = evaluate_triggers(self.window.make_contiguous(), &self.params);
        if trigger.is_some() {
            self.window.clear();
        }
        trigger
    }
}

/// Classifies a window of filtered delays. Windows shorter than `N`
/// never trigger.
pub fn evaluate_triggers(window: &[f64], params: &FeedbackParams) -> Option<Trigger> {
    let n = params.window;
    if window.len() < n {
        return None;
    }
    let w = &window[window.len() - n..];
    let increasing = w.windows(2).all(|p| p[1] > p[0]);
    if increasing {
        return Some(Trigger::Congestion);
    }
    let decreasing = w.windows(2).all(|p| p[1] < p[0]);
    if decreasing {
        return None;
    }
    let anchor = w[0];
    let band = params.tolerance * anchor.abs();
    if w[1..].iter().all(|v| (v - anchor).abs() <= band) {
        Some(Trigger::Steady)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::PacketHeader;

    fn state() -> FeedbackState {
        FeedbackState::new(FeedbackParams::default()).unwrap()
    }

    #[test]
    fn delay_measurement() {
        let mut s = state();
        let h = PacketHeader::haptic(1, 100);
        assert_eq!(s.measure_delay(115.0, &h, 0.0), 15.0);
        assert_eq!(s.measure_delay(115.0, &h, 2.0), 17.0);
        assert_eq!(s.clamped_count(), 0);
        assert_eq!(s.measure_delay(115.0, &h, -20.0), 0.0);
        assert_eq!(s.clamped_count(), 1);
    }

    #[test]
    fn piggyback_freshness() {
        let mut s = state();
        assert_eq!(s.piggyback(), (0, true));
        let h = PacketHeader::haptic(1, 100);
        s.measure_delay(115.0, &h, 0.0);
        assert_eq!(s.piggyback(), (15_000, false));
        assert_eq!(s.piggyback(), (15_000, true));
        s.measure_delay(112.0, &h, 0.0);
        s.measure_delay(118.5, &h, 0.0);
        assert_eq!(s.piggyback(), (18_500, false));
    }

    #[test]
    fn ewma_update() {
        let mut s = state();
        s.ingest_notification(10_000, false);
        assert_eq!(s.d_avg(), Some(10.0));
        for _ in 0..20 {
            s.ingest_notification(10_000, false);
        }
        assert_eq!(s.d_avg(), Some(10.0));
        s.ingest_notification(20_000, false);
        assert!((s.d_avg().unwrap() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn repeats_leave_state_alone() {
        let mut s = state();
        s.ingest_notification(10_000, false);
        let before = s.clone();
        assert_eq!(s.ingest_notification(99_000, true), None);
        assert_eq!(s, before);
    }

    #[test]
    fn trigger_examples() {
        let p = FeedbackParams::default();
        let up = [10.0, 11.0, 12.0, 13.0, 14.0, 15.0, 16.0, 17.0];
        assert_eq!(evaluate_triggers(&up, &p), Some(Trigger::Congestion));
        let flat = [10.0, 10.2, 9.9, 10.1, 10.0, 10.3, 9.8, 10.1];
        assert_eq!(evaluate_triggers(&flat, &p), Some(Trigger::Steady));
        let bent = [10.0, 11.0, 12.0, 13.0, 14.0, 15.0, 16.0, 15.0];
        assert_eq!(evaluate_triggers(&bent, &p), None);
        let down = [17.0, 16.9, 16.8, 16.7, 16.6, 16.5, 16.4, 16.3];
        assert_eq!(evaluate_triggers(&down, &p), None);
        assert_eq!(evaluate_triggers(&up[..7], &p), None);
    }

    #[test]
    fn constant_window_is_steady() {
        let p = FeedbackParams::default();
        assert_eq!(evaluate_triggers(&[5.0; 8], &p), Some(Trigger::Steady));
    }

    #[test]
    fn ties_break_congestion_runs() {
        let p = FeedbackParams::default();
        let w = [10.0, 10.5, 11.0, 11.0, 11.5, 12.0, 12.5, 13.0];
        assert_ne!(evaluate_triggers(&w, &p), Some(Trigger::Congestion));
    }

    #[test]
    fn window_clears_after_trigger() {
        let mut s = state();
        let mut fired = None;
        for i in 0..8 {
            fired = s.ingest_notification(10_000 + 5_000 * i, false);
        }
        assert_eq!(fired, Some(Trigger::Congestion));
        assert!(s.window().is_empty());
        // one more rising sample does not re-fire
        assert_eq!(s.ingest_notification(60_000, false), None);
    }

    #[test]
    fn bad_params() {
        for p in [
            FeedbackParams { alpha: 0.0, ..Default::default() },
            FeedbackParams { alpha: 1.0, ..Default::default() },
            FeedbackParams { window: 1, ..Default::default() },
            FeedbackParams { tolerance: 0.0, ..Default::default() },
        ] {
            assert!(FeedbackState::new(p).is_err());
        }
    }
}
