use proptest::prelude::*;

use telehaptic::dpm::{DpmParams, DpmState};
use telehaptic::feedback::{evaluate_triggers, FeedbackParams, FeedbackState, Trigger};
use telehaptic::mux::{HapticSample, TelehapticFragment};
use telehaptic::netsim::{self, DropTailQueue, Scenario, TrafficSource};
use telehaptic::wire::{decode_header, encode_header, AvHeader, MediaKind, PacketHeader};

pub fn arb_header() -> impl Strategy<Value = PacketHeader> {
    (
        0u8..3,
        1u8..=7,
        any::<bool>(),
        0u32..(1 << 24),
        any::<u32>(),
        any::<(u16, u16, u8)>(),
    )
        .prop_map(|(m, k, d, delay, ts, (frame, size, frag))| {
            let media = MediaKind::from_code(m).unwrap();
            PacketHeader {
                media,
                k,
                delay_indicator: d,
                reserved_x: false,
                notification_delay_us: delay,
                haptic_timestamp_ms: ts,
                av_header: (media != MediaKind::Haptic).then_some(AvHeader {
                    frame_no: frame,
                    payload_size_bytes: size,
                    fragment_no: frag,
                }),
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn header_round_trip(h in arb_header()) {
        let bytes = encode_header(&h).unwrap();
        let want = if h.media == MediaKind::Haptic { 8 } else { 13 };
        prop_assert_eq!(bytes.len(), want);
        let (back, used) = decode_header(&bytes).unwrap();
        prop_assert_eq!(used, want);
        prop_assert_eq!(back, h);
    }
}

/// Filtered value after feeding `d` in order, summed term by term.
fn ewma_oracle(d: &[f64], alpha: f64) -> f64 {
    let n = d.len();
    let mut total = (1.0 - alpha).powi(n as i32 - 1) * d[0];
    for (i, &x) in d.iter().enumerate().skip(1) {
        total += alpha * (1.0 - alpha).powi((n - 1 - i) as i32) * x;
    }
    total
}

proptest! {
    #[test]
    fn ewma_matches_closed_form(
        delays in prop::collection::vec(0u32..200_000, 1..60),
        alpha in 0.05f64..0.95,
    ) {
        let mut s = FeedbackState::new(FeedbackParams { alpha, ..Default::default() }).unwrap();
        for &d in &delays {
            s.ingest_notification(d, false);
        }
        let ms: Vec<f64> = delays.iter().map(|&d| f64::from(d) / 1000.0).collect();
        let want = ewma_oracle(&ms, alpha);
        let got = s.d_avg().unwrap();
        prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn repeats_change_nothing(
        delays in prop::collection::vec(0u32..100_000, 1..40),
        repeats in prop::collection::vec((0u32..100_000, 0usize..5), 1..40),
    ) {
        let mut plain = FeedbackState::new(FeedbackParams::default()).unwrap();
        let mut noisy = plain.clone();
        for (i, &d) in delays.iter().enumerate() {
            let a = plain.ingest_notification(d, false);
            let (junk, times) = repeats[i % repeats.len()];
            for _ in 0..times {
                prop_assert_eq!(noisy.ingest_notification(junk, true), None);
            }
            let b = noisy.ingest_notification(d, false);
            prop_assert_eq!(a, b);
        }
        prop_assert_eq!(plain, noisy);
    }

    #[test]
    fn congestion_ignores_offsets(
        window in prop::collection::vec(0i64..50, 8),
        offset in -1000i64..1000,
    ) {
        let p = FeedbackParams::default();
        let base: Vec<f64> = window.iter().map(|&x| x as f64 + 2000.0).collect();
        let shifted: Vec<f64> = base.iter().map(|x| x + offset as f64).collect();
        let c = |w: &[f64]| evaluate_triggers(w, &p) == Some(Trigger::Congestion);
        prop_assert_eq!(c(&base), c(&shifted));
    }
}

/// Independent statement of the trigger rule.
fn classify(w: &[i32], tolerance: f64) -> Option<Trigger> {
    let mut up = true;
    let mut down = true;
    for i in 1..w.len() {
        up &= w[i] > w[i - 1];
        down &= w[i] < w[i - 1];
    }
    if up {
        return Some(Trigger::Congestion);
    }
    let first = f64::from(w[0]);
    let in_band = w[1..].iter().all(|&v| (f64::from(v) - first).abs() <= tolerance * first.abs());
    (!down && in_band).then_some(Trigger::Steady)
}

#[test]
fn exhaustive_trigger_search() {
    // every 5-long window over 8..=12 with a 10% band, and over 1..=5 where
    // the band is narrower than one step
    for (lo, hi) in [(8, 12), (1, 5)] {
        let n = 5;
        let p = FeedbackParams {
            window: n,
            ..Default::default()
        };
        let span = (hi - lo + 1) as usize;
        for code in 0..span.pow(n as u32) {
            let mut c = code;
            let w: Vec<i32> = (0..n)
                .map(|_| {
                    let v = lo + (c % span) as i32;
                    c /= span;
                    v
                })
                .collect();
            let wf: Vec<f64> = w.iter().map(|&v| f64::from(v)).collect();
            let got = evaluate_triggers(&wf, &p);
            assert_eq!(got, classify(&w, p.tolerance), "{w:?}");
            // a strictly increasing window whose steps leave the band can
            // never also look steady
            let strictly_up = w.windows(2).all(|x| x[1] > x[0]);
            if strictly_up {
                assert_eq!(got, Some(Trigger::Congestion));
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Submit,
    Congestion,
    Steady,
}

fn arb_ops() -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(
        prop_oneof![6 => Just(Op::Submit), 1 => Just(Op::Congestion), 2 => Just(Op::Steady)],
        0..300,
    )
}

fn frag(t: u64) -> TelehapticFragment {
    TelehapticFragment::haptic_only(HapticSample {
        gen_ms: t,
        value: t as f64,
        size_bytes: 12,
    })
}

proptest! {
    #[test]
    fn dpm_never_loses_or_reorders(ops in arb_ops(), hold in prop::bool::ANY) {
        let params = if hold { DpmParams::with_hold_up(50.0) } else { DpmParams::default() };
        let mut dpm = DpmState::new(params).unwrap();
        let mut out: Vec<u64> = Vec::new();
        let mut next = 0u64;
        for (t, op) in ops.iter().enumerate() {
            let now = t as f64;
            let emitted = match op {
                Op::Submit => {
                    next += 1;
                    let k = dpm.k();
                    let e = dpm.submit_fragment(frag(next - 1));
                    if let Some(ref b) = e {
                        prop_assert_eq!(b.len(), usize::from(k));
                    }
                    e
                }
                Op::Congestion => dpm.on_trigger(Trigger::Congestion, now),
                Op::Steady => dpm.on_trigger(Trigger::Steady, now),
            };
            if let Some(batch) = emitted {
                prop_assert!(!batch.is_empty());
                out.extend(batch.iter().map(|f| f.haptic.gen_ms));
            }
            prop_assert!(dpm.pending() < usize::from(dpm.k()));
            prop_assert!((1..=4).contains(&dpm.k()));
        }
        out.extend((out.len() as u64..next).collect::<Vec<_>>());
        prop_assert_eq!(out.len() as u64, next);
        prop_assert!(out.iter().enumerate().all(|(i, &g)| g == i as u64));
    }

    #[test]
    fn queue_conserves(
        cap in 1u64..5000,
        ops in prop::collection::vec(prop::option::of(1u32..1500), 0..400),
    ) {
        let mut q = DropTailQueue::new(cap);
        for (i, op) in ops.into_iter().enumerate() {
            match op {
                Some(b) => { let _ = q.offer(i, b); }
                None => { q.pop(); }
            }
            prop_assert!(q.conserved());
            prop_assert!(q.bytes() <= cap);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn runs_are_deterministic(seed in any::<u64>(), cbr in 0.0f64..500.0) {
        let sc = Scenario {
            seed,
            duration_ms: 1500,
            cross_bwd: vec![
                TrafficSource::vbr("v", 320.0, 480.0, 0.0, f64::INFINITY),
                TrafficSource::cbr("c", cbr.max(1.0), 300.0, f64::INFINITY),
            ],
            ..Default::default()
        };
        let csv = |sc: &Scenario| {
            let t = netsim::run(sc).unwrap();
            let mut a = Vec::new();
            t.write_csv(&mut a).unwrap();
            t.write_k_csv(&mut a).unwrap();
            t.write_queue_csv(&mut a).unwrap();
            a
        };
        prop_assert_eq!(csv(&sc), csv(&sc));
    }
}
