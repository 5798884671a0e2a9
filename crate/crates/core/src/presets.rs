//! Ready-made experiments.
//!
//! Each preset is a list of labelled scenarios plus an evaluator that turns
//! their traces into tables and pass/fail checks. [`scenarios`] and
//! [`evaluate`] are split so callers can run the scenarios however they
//! like (the CLI runs them in parallel); [`run`] does both in sequence.
//!
//! ```
//! let (_, report) = telehaptic::presets::run_with("fig10", 1, |sc| {
//!     sc.duration_ms = 3000;
//!     Ok(())
//! })
//! .unwrap();
//! assert!(!report.checks.is_empty());
//! ```

use std::io::Write;

use crate::analysis::{self, BoundInputs, QosSpec, Summary};
use crate::baselines::ForceSource;
use crate::dpm::RateModel;
use crate::error::{ConfigError, PresetError};
use crate::feedback::Trigger;
use crate::mux::MediaConfig;
use crate::netsim::{
    self, stepped_cbr_schedule, Channel, Protocol, SampleMedia, Scenario, Trace, TrafficSource,
};

pub const NAMES: [&str; 10] = [
    "fig8a",
    "fig8b",
    "fig9",
    "fig10",
    "fig13",
    "fig15",
    "fig16",
    "fig17",
    "table3",
    "bounds-sweep",
];

pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig8a" => "CBR 260 kbps: k-cycles through 4, delay under 30 ms; hold-up reduces churn",
        "fig8b" => "CBR 400 kbps: DPM settles into a 4/3 oscillation",
        "fig9" => "CBR 400 kbps: multistep increase breaches 30 ms, DPM does not",
        "fig10" => "stepped CBR schedule: modal k per phase equals k_opt",
        "fig13" => "CBR sweep: DPM lossless, no-merge loss grows with R_cbr",
        "fig15" => "CBR 400 kbps: RTP-report feedback breaches 30 ms before 1 s, DPM does not",
        "fig16" => "force reconstruction SNR, DPM against Weber sampling",
        "fig17" => "forward CBR 780 kbps: RTT-based NAFCAH breaches 30 ms, DPM does not",
        "table3" => "CBR 400 kbps: per-media QoS, A/V bounds, jitter at k switches",
        "bounds-sweep" => "analytical bounds against CBR-only simulations",
        _ => return None,
    })
}

/// Start of the steady-state window used for bound checks, ms.
pub const STEADY_FROM_MS: f64 = 5000.0;

const FOREVER: f64 = f64::INFINITY;
const ONSET_MS: f64 = 500.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Labeled {
    pub label: String,
    pub scenario: Scenario,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub label: String,
    pub trace: Trace,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub preset: String,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// `PASS|FAIL name: detail`, one line per check.
    pub fn write_checks<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for c in &self.checks {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            writeln!(w, "{verdict} {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

fn vbr() -> TrafficSource {
    TrafficSource::vbr("vbr", 320.0, 480.0, 0.0, FOREVER)
}

fn cbr(rate_kbps: f64, start_ms: f64) -> TrafficSource {
    TrafficSource::cbr("cbr", rate_kbps, start_ms, FOREVER)
}

/// VBR cross traffic throughout plus CBR from 500 ms on the backward
/// channel.
pub fn congested(name: &str, cbr_kbps: f64, protocol: Protocol, seed: u64) -> Scenario {
    Scenario {
        name: name.into(),
        protocol,
        seed,
        cross_bwd: vec![vbr(), cbr(cbr_kbps, ONSET_MS)],
        ..Default::default()
    }
}

fn labeled(label: impl Into<String>, scenario: Scenario) -> Labeled {
    Labeled {
        label: label.into(),
        scenario,
    }
}

/// Link rate of the reference run the SNR is measured against; the queue
/// never holds anything long enough to matter.
pub const IDEAL_MU_KBPS: f64 = 1e6;

const SWEEP_CBR: [f64; 5] = [50.0, 150.0, 250.0, 350.0, 400.0];
const BOUND_CROSS: [f64; 5] = [500.0, 600.0, 660.0, 700.0, 800.0];
const BATCH: u64 = 5;

/// Scenarios of preset `name`, seeded from `seed`.
pub fn scenarios(name: &str, seed: u64) -> Result<Vec<Labeled>, PresetError> {
    let list = match name {
        "fig8a" => vec![
            labeled("dpm", congested("fig8a", 260.0, Protocol::Dpm, seed)),
            labeled("dpm_holdup", congested("fig8a", 260.0, Protocol::DpmHoldup, seed)),
        ],
        "fig8b" => vec![labeled("dpm", congested("fig8b", 400.0, Protocol::Dpm, seed))],
        "fig9" | "fig15" => {
            let other = if name == "fig9" {
                Protocol::Multistep
            } else {
                Protocol::RtpFeedback
            };
            [Protocol::Dpm, other]
                .into_iter()
                .map(|p| {
                    let mut sc = congested(name, 400.0, p, seed);
                    sc.duration_ms = 2000;
                    labeled(p.name(), sc)
                })
                .collect()
        }
        "fig10" => {
            let mut cross = stepped_cbr_schedule();
            cross.push(vbr());
            vec![labeled(
                "dpm",
                Scenario {
                    name: "fig10".into(),
                    seed,
                    duration_ms: 8500,
                    cross_bwd: cross,
                    ..Default::default()
                },
            )]
        }
        "fig13" => SWEEP_CBR
            .iter()
            .flat_map(|&r| {
                [Protocol::Dpm, Protocol::NoMerge]
                    .into_iter()
                    .map(move |p| labeled(format!("{}_{r}", p.name()), congested("fig13", r, p, seed)))
            })
            .collect(),
        "fig16" => (seed..seed + BATCH)
            .flat_map(|s| {
                let force = ForceSource::SyntheticSeeded { seed: s };
                let ideal = Scenario {
                    name: "fig16".into(),
                    seed: s,
                    mu_kbps: IDEAL_MU_KBPS,
                    force: force.clone(),
                    ..Default::default()
                };
                let congested_runs = [Protocol::Dpm, Protocol::WeberMux].into_iter().map(move |p| {
                    let mut sc = congested("fig16", 400.0, p, s);
                    sc.force = force.clone();
                    labeled(format!("{}_seed{s}", p.name()), sc)
                });
                std::iter::once(labeled(format!("ideal_seed{s}"), ideal)).chain(congested_runs)
            })
            .collect(),
        "fig17" => [Protocol::Nafcah, Protocol::Dpm]
            .into_iter()
            .map(|p| {
                let sc = Scenario {
                    name: "fig17".into(),
                    protocol: p,
                    seed,
                    cross_fwd: vec![vbr(), cbr(780.0, ONSET_MS)],
                    cross_bwd: vec![vbr()],
                    ..Default::default()
                };
                labeled(p.name(), sc)
            })
            .collect(),
        "table3" => vec![labeled("dpm", congested("table3", 400.0, Protocol::Dpm, seed))],
        "bounds-sweep" => BOUND_CROSS
            .iter()
            .flat_map(|&r| {
                (seed..seed + BATCH).map(move |s| {
                    let sc = Scenario {
                        name: "bounds-sweep".into(),
                        seed: s,
                        metrics_start_ms: STEADY_FROM_MS,
                        cross_bwd: vec![cbr(r, 0.0)],
                        ..Default::default()
                    };
                    labeled(format!("cbr{r}_seed{s}"), sc)
                })
            })
            .collect(),
        other => return Err(PresetError::Unknown(other.into())),
    };
    Ok(list)
}

/// Runs every scenario of `name` after applying `tweak`, then evaluates.
pub fn run_with(
    name: &str,
    seed: u64,
    tweak: impl Fn(&mut Scenario) -> Result<(), ConfigError>,
) -> Result<(Vec<RunResult>, Report), PresetError> {
    let mut runs = Vec::new();
    for mut l in scenarios(name, seed)? {
        tweak(&mut l.scenario)?;
        runs.push(RunResult {
            label: l.label,
            trace: netsim::run(&l.scenario)?,
        });
    }
    let report = evaluate(name, &runs)?;
    Ok((runs, report))
}

pub fn run(name: &str, seed: u64) -> Result<(Vec<RunResult>, Report), PresetError> {
    run_with(name, seed, |_| Ok(()))
}

/// Tables and checks for finished runs of preset `name`.
pub fn evaluate(name: &str, runs: &[RunResult]) -> Result<Report, PresetError> {
    let mut report = Report {
        preset: name.into(),
        tables: Vec::new(),
        checks: Vec::new(),
    };
    let mut summaries = Table::new(
        "summary",
        &[
            "run", "channel", "media", "delivered", "lost", "max_delay_ms", "mean_delay_ms",
            "max_jitter_ms", "mean_jitter_ms", "delay_ok", "jitter_ok",
        ],
    );
    for r in runs {
        let m = analysis::scenario_metrics(&r.trace)?;
        for x in &m.media {
            summaries.rows.push(vec![
                r.label.clone(),
                x.channel.name().into(),
                x.media.name().into(),
                x.delivered.to_string(),
                x.lost.to_string(),
                format!("{:.4}", x.max_delay_ms),
                format!("{:.4}", x.mean_delay_ms),
                format!("{:.4}", x.max_jitter_ms),
                format!("{:.4}", x.mean_jitter_ms),
                x.delay_ok.to_string(),
                x.jitter_ok.to_string(),
            ]);
        }
    }
    report.tables.push(summaries);
    match name {
        "fig8a" => fig8a(runs, &mut report)?,
        "fig8b" => fig8b(runs, &mut report)?,
        "fig9" => onset_comparison(runs, "multistep", None, &mut report)?,
        "fig15" => onset_comparison(runs, "rtp_feedback", Some(1000.0), &mut report)?,
        "fig10" => fig10(runs, &mut report)?,
        "fig13" => fig13(runs, &mut report)?,
        "fig16" => fig16(runs, &mut report)?,
        "fig17" => fig17(runs, &mut report)?,
        "table3" => table3(runs, &mut report)?,
        "bounds-sweep" => bounds_sweep(runs, &mut report)?,
        other => return Err(PresetError::Unknown(other.into())),
    }
    Ok(report)
}

fn find<'a>(runs: &'a [RunResult], label: &str) -> Result<&'a Trace, PresetError> {
    runs.iter()
        .find(|r| r.label == label)
        .map(|r| &r.trace)
        .ok_or_else(|| ConfigError::Scenario(format!("run {label:?} missing")).into())
}

fn window_metrics(trace: &Trace, from_ms: f64) -> Result<Summary, PresetError> {
    Ok(analysis::metrics(
        trace,
        (from_ms, trace.scenario.duration_ms as f64),
        &QosSpec::default(),
    )?)
}

fn haptic_max(trace: &Trace, channel: Channel, from_ms: f64) -> Result<f64, PresetError> {
    let m = window_metrics(trace, from_ms)?;
    Ok(m.get(channel, SampleMedia::Haptic)
        .map(|x| x.max_delay_ms)
        .unwrap_or(f64::NAN))
}

/// Time spent at each `k` in `[from_ms, to_ms)`, indexed by `k`.
pub fn k_time_share(trace: &Trace, channel: Channel, from_ms: f64, to_ms: f64) -> Vec<f64> {
    let tl = trace.k_timeline(channel);
    let mut share = vec![0.0; usize::from(trace.scenario.k_max) + 1];
    for (i, &(t, k)) in tl.iter().enumerate() {
        let end = tl.get(i + 1).map(|x| x.0).unwrap_or(f64::INFINITY);
        let a = t.max(from_ms);
        let b = end.min(to_ms);
        if b > a {
            share[usize::from(k)] += b - a;
        }
    }
    share
}

/// `k` held longest in `[from_ms, to_ms)`.
pub fn modal_k(trace: &Trace, channel: Channel, from_ms: f64, to_ms: f64) -> u8 {
    let share = k_time_share(trace, channel, from_ms, to_ms);
    let mut best = 1;
    for k in 1..share.len() {
        if share[k] > share[best] {
            best = k;
        }
    }
    best as u8
}

/// Shape of the `k` timeline after `from_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleShape {
    /// Changes that raised `k` to `k_max`.
    pub jumps_to_max: usize,
    /// Every raise went straight to `k_max`.
    pub raises_to_max: bool,
    /// Every drop was by exactly one.
    pub unit_drops: bool,
    pub min_k: u8,
    /// Congestion triggers after which `k` was not `k_max`.
    pub missed_congestion: usize,
}

pub fn cycle_shape(trace: &Trace, channel: Channel, from_ms: f64) -> CycleShape {
    let k_max = trace.scenario.k_max;
    let tl = trace.k_timeline(channel);
    let mut shape = CycleShape {
        jumps_to_max: 0,
        raises_to_max: true,
        unit_drops: true,
        min_k: trace.k_at(channel, from_ms),
        missed_congestion: 0,
    };
    for w in tl.windows(2) {
        let ((_, before), (t, after)) = (w[0], w[1]);
        if t < from_ms {
            continue;
        }
        if after > before {
            if after == k_max {
                shape.jumps_to_max += 1;
            } else {
                shape.raises_to_max = false;
            }
        } else if before - after != 1 {
            shape.unit_drops = false;
        }
        shape.min_k = shape.min_k.min(after);
    }
    shape.missed_congestion = trace
        .triggers
        .iter()
        .filter(|r| r.channel == channel && r.t_ms >= from_ms && r.trigger == Trigger::Congestion)
        .filter(|r| trace.k_at(channel, r.t_ms) != k_max)
        .count();
    shape
}

fn k_changes_in(trace: &Trace, channel: Channel, from_ms: f64) -> usize {
    trace
        .k_changes
        .iter()
        .filter(|c| c.channel == channel && c.t_ms >= from_ms)
        .count()
}

/// Jitter of the first sample sent at `k_max` after each `1 -> k_max`
/// switch, against the sample before it.
pub fn switch_jitters(trace: &Trace, channel: Channel) -> Vec<(f64, f64)> {
    let k_max = trace.scenario.k_max;
    let samples: Vec<_> = trace.samples_of(channel, SampleMedia::Haptic).collect();
    let tl = trace.k_timeline(channel);
    let mut out = Vec::new();
    for w in tl.windows(2) {
        let ((_, before), (t, after)) = (w[0], w[1]);
        if before != 1 || after != k_max {
            continue;
        }
        let i = samples.partition_point(|s| (s.gen_ms as f64) < t);
        let (Some(cur), Some(prev)) = (samples.get(i), i.checked_sub(1).and_then(|j| samples.get(j)))
        else {
            continue;
        };
        let (Some(rc), Some(rp)) = (cur.recv_ms, prev.recv_ms) else {
            continue;
        };
        let gap = (cur.gen_ms - prev.gen_ms) as f64;
        out.push((t, ((rc - rp) - gap).abs()));
    }
    out
}

fn fmt(x: f64) -> String {
    format!("{x:.3}")
}

fn fig8a(runs: &[RunResult], report: &mut Report) -> Result<(), PresetError> {
    let dpm = find(runs, "dpm")?;
    let hold = find(runs, "dpm_holdup")?;
    let shape = cycle_shape(dpm, Channel::Backward, ONSET_MS);
    report.checks.push(Check::new(
        "k-cycles",
        shape.jumps_to_max >= 10
            && shape.raises_to_max
            && shape.unit_drops
            && shape.missed_congestion == 0
            && shape.min_k == 1,
        format!(
            "{} jumps to k_max, raises to k_max only: {}, unit drops: {}, congestion not at k_max: {}, lowest k {}",
            shape.jumps_to_max, shape.raises_to_max, shape.unit_drops, shape.missed_congestion, shape.min_k
        ),
    ));
    let max = haptic_max(dpm, Channel::Backward, ONSET_MS)?;
    report.checks.push(Check::new(
        "delay-30ms",
        max <= 30.0,
        format!("max backward haptic delay {} ms", fmt(max)),
    ));
    let (dc, hc) = (
        k_changes_in(dpm, Channel::Backward, ONSET_MS),
        k_changes_in(hold, Channel::Backward, ONSET_MS),
    );
    report.checks.push(Check::new(
        "holdup-fewer-switches",
        hc < dc,
        format!("k changes: dpm {dc}, hold-up {hc}"),
    ));
    let jit = |t: &Trace| -> Result<f64, PresetError> {
        let m = window_metrics(t, ONSET_MS)?;
        Ok(m.get(Channel::Backward, SampleMedia::Haptic)
            .map(|x| x.mean_jitter_ms)
            .unwrap_or(f64::NAN))
    };
    let (dj, hj) = (jit(dpm)?, jit(hold)?);
    let cut = 1.0 - hj / dj;
    report.checks.push(Check::new(
        "holdup-jitter",
        cut >= 0.10,
        format!(
            "mean haptic jitter dpm {:.4} ms, hold-up {:.4} ms, reduction {:.1}%",
            dj,
            hj,
            100.0 * cut
        ),
    ));
    Ok(())
}

fn fig8b(runs: &[RunResult], report: &mut Report) -> Result<(), PresetError> {
    let t = find(runs, "dpm")?;
    let end = t.scenario.duration_ms as f64;
    let share = k_time_share(t, Channel::Backward, STEADY_FROM_MS, end);
    let total: f64 = share.iter().sum();
    let k_max = usize::from(t.scenario.k_max);
    let top_two = (share[k_max] + share[k_max - 1]) / total;
    let tl = t.k_timeline(Channel::Backward);
    let steps = |a: usize, b: usize| {
        tl.windows(2)
            .filter(|w| w[1].0 >= STEADY_FROM_MS)
            .filter(|w| usize::from(w[0].1) == a && usize::from(w[1].1) == b)
            .count()
    };
    let (down, up) = (steps(k_max, k_max - 1), steps(k_max - 1, k_max));
    report.checks.push(Check::new(
        "oscillation-4-3",
        top_two >= 0.9 && down > 0 && up > 0,
        format!(
            "time at k in {{{},{}}}: {:.1}%, transitions down {down}, up {up}",
            k_max - 1,
            k_max,
            100.0 * top_two
        ),
    ));
    let max = haptic_max(t, Channel::Backward, ONSET_MS)?;
    report.checks.push(Check::new(
        "delay-30ms",
        max <= 30.0,
        format!("max backward haptic delay {} ms", fmt(max)),
    ));
    Ok(())
}

/// DPM against a baseline on the same onset scenario: the baseline
/// breaches 30 ms (before `before_ms` if given) and DPM never does.
fn onset_comparison(
    runs: &[RunResult],
    baseline: &str,
    before_ms: Option<f64>,
    report: &mut Report,
) -> Result<(), PresetError> {
    let dpm = find(runs, "dpm")?;
    let base = find(runs, baseline)?;
    let first_breach = base
        .samples_of(Channel::Backward, SampleMedia::Haptic)
        .find(|s| s.delay_ms().is_some_and(|d| d > 30.0))
        .map(|s| s.gen_ms as f64);
    let ok = match (first_breach, before_ms) {
        (Some(t), Some(limit)) => t < limit,
        (Some(_), None) => true,
        (None, _) => false,
    };
    let when = first_breach.map_or("never".to_string(), |t| format!("at {t} ms"));
    report.checks.push(Check::new(
        format!("{baseline}-breaches"),
        ok,
        format!("{baseline} first exceeds 30 ms {when}"),
    ));
    let max = haptic_max(dpm, Channel::Backward, ONSET_MS)?;
    report.checks.push(Check::new(
        "dpm-within-30ms",
        max <= 30.0,
        format!("max backward haptic delay under DPM {} ms", fmt(max)),
    ));
    Ok(())
}

fn fig10(runs: &[RunResult], report: &mut Report) -> Result<(), PresetError> {
    let t = find(runs, "dpm")?;
    let end = t.scenario.duration_ms as f64;
    let cuts = [0.0, 500.0, 2500.0, 4500.0, 6500.0, end];
    let model = RateModel::for_media(&t.scenario.media_bwd)?;
    let mut table = Table::new(
        "phases",
        &["from_ms", "to_ms", "r_cross_kbps", "k_opt", "modal_k", "modal_rate_kbps"],
    );
    let mut all = true;
    let mut seen = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        // offered CBR plus the VBR mean
        let r_cross: f64 = t
            .scenario
            .cross_bwd
            .iter()
            .filter(|s| s.is_active(mid))
            .map(|s| s.mean_kbps())
            .sum();
        let inputs = BoundInputs {
            mu_kbps: t.scenario.mu_kbps,
            tau_ms: t.scenario.tau_ms(),
            n: t.scenario.feedback.window,
            r_cross_kbps: r_cross,
            rate_model: model,
            k_max: t.scenario.k_max,
        };
        let k_opt = analysis::k_opt(&inputs)?;
        let modal = modal_k(t, Channel::Backward, a, b);
        let rate = model.rate_kbps(modal, t.scenario.k_max)?;
        all &= modal == k_opt;
        seen.push(format!("{modal}/{k_opt}"));
        table.rows.push(vec![
            a.to_string(),
            b.to_string(),
            r_cross.to_string(),
            k_opt.to_string(),
            modal.to_string(),
            format!("{rate:.2}"),
        ]);
    }
    report.tables.push(table);
    report.checks.push(Check::new(
        "staircase",
        all,
        format!("modal k / k_opt per phase: {}", seen.join(", ")),
    ));
    Ok(())
}

fn fig13(runs: &[RunResult], report: &mut Report) -> Result<(), PresetError> {
    let mut table = Table::new(
        "loss",
        &[
            "r_cbr_kbps", "protocol", "telehaptic_loss", "cross_loss", "telehaptic_kbps", "cross_kbps",
        ],
    );
    let mut dpm_ok = true;
    let mut dpm_detail = Vec::new();
    let mut nm_losses = Vec::new();
    for r in SWEEP_CBR {
        for p in [Protocol::Dpm, Protocol::NoMerge] {
            let t = find(runs, &format!("{}_{r}", p.name()))?;
            let m = analysis::scenario_metrics(t)?;
            let th = m.telehaptic_loss();
            let cl = m.cross_loss();
            let kbps = |prefix: &str| -> f64 {
                m.streams
                    .iter()
                    .filter(|s| s.stream.starts_with(prefix))
                    .map(|s| s.throughput_kbps)
                    .sum()
            };
            table.rows.push(vec![
                r.to_string(),
                p.name().into(),
                format!("{th:.6}"),
                format!("{cl:.6}"),
                format!("{:.2}", kbps("telehaptic_bwd")),
                format!("{:.2}", kbps("cross_bwd")),
            ]);
            match p {
                Protocol::Dpm => {
                    dpm_ok &= th == 0.0 && cl == 0.0;
                    dpm_detail.push(format!("{r}: {th:.4}/{cl:.4}"));
                }
                _ => nm_losses.push(th),
            }
        }
    }
    report.tables.push(table);
    report.checks.push(Check::new(
        "dpm-lossless",
        dpm_ok,
        format!("telehaptic/cross loss by R_cbr: {}", dpm_detail.join(", ")),
    ));
    let positive = nm_losses.iter().all(|&l| l > 0.0);
    let monotone = nm_losses.windows(2).all(|w| w[1] >= w[0]);
    report.checks.push(Check::new(
        "no-merge-loss-grows",
        positive && monotone,
        format!(
            "no-merge telehaptic loss: {}",
            nm_losses.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>().join(", ")
        ),
    ));
    Ok(())
}

fn fig16(runs: &[RunResult], report: &mut Report) -> Result<(), PresetError> {
    let mut table = Table::new("snr", &["seed", "snr_dpm_db", "snr_weber_db", "gap_db"]);
    let mut ordered = true;
    let mut gaps = Vec::new();
    let mut seeds: Vec<u64> = runs
        .iter()
        .filter(|r| r.label.starts_with("dpm_"))
        .map(|r| r.trace.scenario.seed)
        .collect();
    seeds.sort_unstable();
    for s in seeds {
        let ideal = find(runs, &format!("ideal_seed{s}"))?;
        let len = ideal.scenario.duration_ms as usize;
        let reference = analysis::displayed_force(ideal, len);
        let snr = |p: Protocol| -> Result<f64, PresetError> {
            let t = find(runs, &format!("{}_seed{s}", p.name()))?;
            Ok(analysis::snr_db(&reference, &analysis::displayed_force(t, len))?)
        };
        let (d, w) = (snr(Protocol::Dpm)?, snr(Protocol::WeberMux)?);
        ordered &= d > w;
        gaps.push(d - w);
        table.rows.push(vec![s.to_string(), fmt(d), fmt(w), fmt(d - w)]);
    }
    report.tables.push(table);
    report.checks.push(Check::new(
        "snr-ordering",
        ordered && !gaps.is_empty(),
        format!(
            "SNR(DPM) - SNR(Weber) per seed: {} dB",
            gaps.iter().map(|g| fmt(*g)).collect::<Vec<_>>().join(", ")
        ),
    ));
    Ok(())
}

fn fig17(runs: &[RunResult], report: &mut Report) -> Result<(), PresetError> {
    let naf = haptic_max(find(runs, "nafcah")?, Channel::Forward, ONSET_MS)?;
    let dpm = haptic_max(find(runs, "dpm")?, Channel::Forward, ONSET_MS)?;
    report.checks.push(Check::new(
        "nafcah-breaches",
        naf > 30.0,
        format!("max forward haptic delay under NAFCAH {} ms", fmt(naf)),
    ));
    report.checks.push(Check::new(
        "dpm-within-30ms",
        dpm <= 30.0,
        format!("max forward haptic delay under DPM {} ms", fmt(dpm)),
    ));
    Ok(())
}

fn table3(runs: &[RunResult], report: &mut Report) -> Result<(), PresetError> {
    let t = find(runs, "dpm")?;
    let m = window_metrics(t, ONSET_MS)?;
    let qos = QosSpec::default();
    let mut table = Table::new(
        "qos",
        &["media", "qos_delay_ms", "max_delay_ms", "qos_jitter_ms", "max_jitter_ms"],
    );
    let mut all = true;
    let mut parts = Vec::new();
    for kind in SampleMedia::ALL {
        let Some(x) = m.get(Channel::Backward, kind) else {
            continue;
        };
        let lim = qos.limit(kind);
        all &= x.delay_ok && x.jitter_ok;
        parts.push(format!(
            "{} {}/{} ms",
            kind.name(),
            fmt(x.max_delay_ms),
            fmt(x.max_jitter_ms)
        ));
        table.rows.push(vec![
            kind.name().into(),
            lim.delay_ms.to_string(),
            fmt(x.max_delay_ms),
            lim.jitter_ms.to_string(),
            fmt(x.max_jitter_ms),
        ]);
    }
    report.tables.push(table);
    report.checks.push(Check::new(
        "qos",
        all,
        format!("max delay/jitter: {}", parts.join(", ")),
    ));
    let loss = m.telehaptic_loss();
    report.checks.push(Check::new(
        "zero-loss",
        loss == 0.0,
        format!("telehaptic packet loss {loss:.6}"),
    ));

    let hap = m
        .get(Channel::Backward, SampleMedia::Haptic)
        .map(|x| x.max_delay_ms)
        .unwrap_or(f64::NAN);
    let (aud_bound, vid_bound) = analysis::av_bounds(&t.scenario.media_bwd, t.scenario.k_max, hap)?;
    let get = |k| m.get(Channel::Backward, k).map(|x| x.max_delay_ms).unwrap_or(f64::NAN);
    let (aud, vid) = (get(SampleMedia::Audio), get(SampleMedia::Video));
    report.checks.push(Check::new(
        "av-bounds",
        aud <= aud_bound && vid <= vid_bound,
        format!(
            "audio {} <= {}, video {} <= {} (haptic max {})",
            fmt(aud),
            fmt(aud_bound),
            fmt(vid),
            fmt(vid_bound),
            fmt(hap)
        ),
    ));

    let model = RateModel::for_media(&t.scenario.media_bwd)?;
    let bound = analysis::jitter_bound(&model, t.scenario.mu_kbps);
    let jitters = switch_jitters(t, Channel::Backward);
    let worst = jitters.iter().map(|j| j.1).fold(0.0, f64::max);
    report.checks.push(Check::new(
        "switch-jitter",
        !jitters.is_empty() && worst <= bound,
        format!(
            "{} switches 1->{}, worst jitter {} ms, bound {} ms",
            jitters.len(),
            t.scenario.k_max,
            fmt(worst),
            fmt(bound)
        ),
    ));
    Ok(())
}

/// Audio and video bounds at `d_hap = 30`, truncated to two decimals.
pub fn reference_av_bounds() -> Result<(f64, f64), PresetError> {
    let (a, v) = analysis::av_bounds(&MediaConfig::backward(), 4, 30.0)?;
    let trunc = |x: f64| (x * 100.0).floor() / 100.0;
    Ok((trunc(a), trunc(v)))
}

fn bounds_sweep(runs: &[RunResult], report: &mut Report) -> Result<(), PresetError> {
    let media = MediaConfig::backward();
    let mut rows = Vec::new();
    let mut table = Table::new(
        "bounds",
        &["r_cross_kbps", "k_opt", "d_inc_ms", "q_inc_bits", "d_hap_ms", "d_aud_ms", "d_vid_ms"],
    );
    for r in [410.0, 500.0, 600.0, 660.0, 700.0, 800.0] {
        let i = BoundInputs::reference(r);
        let o = analysis::bounds(&i, &media)?;
        table.rows.push(vec![
            r.to_string(),
            o.k_opt.to_string(),
            format!("{:.4}", o.d_inc_ms),
            format!("{:.4}", o.q_inc_bits),
            format!("{:.4}", o.d_hap_ms),
            format!("{:.4}", o.d_aud_ms),
            format!("{:.4}", o.d_vid_ms),
        ]);
        rows.push((i, o));
    }
    report.tables.push(table);

    let mut sim = Table::new(
        "simulated",
        &["run", "r_cross_kbps", "d_hap_ms", "slack_ms", "max_delay_ms", "ok"],
    );
    let mut all = true;
    let mut worst_margin = f64::INFINITY;
    for r in runs {
        let t = &r.trace;
        let r_cross: f64 = t.scenario.cross_bwd.iter().map(|s| s.mean_kbps()).sum();
        let inputs = BoundInputs {
            mu_kbps: t.scenario.mu_kbps,
            tau_ms: t.scenario.tau_ms(),
            n: t.scenario.feedback.window,
            r_cross_kbps: r_cross,
            rate_model: RateModel::for_media(&t.scenario.media_bwd)?,
            k_max: t.scenario.k_max,
        };
        let d_hap = analysis::d_hap_bound(&inputs)?;
        let biggest = t
            .packets
            .iter()
            .filter(|p| p.stream.channel() == Channel::Backward)
            .map(|p| p.wire_bytes)
            .max()
            .unwrap_or(0);
        let slack = f64::from(biggest) * 8.0 / t.scenario.mu_kbps;
        let max = haptic_max(t, Channel::Backward, STEADY_FROM_MS)?;
        let ok = max <= d_hap + slack;
        all &= ok;
        worst_margin = worst_margin.min(d_hap + slack - max);
        sim.rows.push(vec![
            r.label.clone(),
            r_cross.to_string(),
            format!("{d_hap:.4}"),
            format!("{slack:.4}"),
            format!("{max:.4}"),
            ok.to_string(),
        ]);
    }
    report.tables.push(sim);
    report.checks.push(Check::new(
        "bound-holds",
        all && !runs.is_empty(),
        format!(
            "{} runs, smallest margin to d_hap + one packet {} ms",
            runs.len(),
            fmt(worst_margin)
        ),
    ));
    let (a, v) = reference_av_bounds()?;
    report.checks.push(Check::new(
        "av-bounds-at-30ms",
        a == 35.75 && v == 73.0,
        format!("audio {a} ms, video {v} ms"),
    ));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_builds_valid_scenarios() {
        for name in NAMES {
            let list = scenarios(name, 1).unwrap();
            assert!(!list.is_empty(), "{name}");
            assert!(describe(name).is_some());
            for l in list {
                l.scenario.validate().unwrap();
            }
        }
        assert!(matches!(scenarios("nope", 1), Err(PresetError::Unknown(_))));
    }

    #[test]
    fn k_share_and_mode() {
        let mut sc = Scenario::default();
        sc.duration_ms = 10;
        let mut trace = netsim::run(&sc).unwrap();
        trace.k_changes = vec![
            netsim::KChange { channel: Channel::Backward, t_ms: 2.0, k: 4 },
            netsim::KChange { channel: Channel::Backward, t_ms: 8.0, k: 3 },
        ];
        let share = k_time_share(&trace, Channel::Backward, 0.0, 10.0);
        assert_eq!(share, vec![0.0, 2.0, 0.0, 2.0, 6.0]);
        assert_eq!(modal_k(&trace, Channel::Backward, 0.0, 10.0), 4);
        assert_eq!(modal_k(&trace, Channel::Backward, 0.0, 3.0), 1);
        let shape = cycle_shape(&trace, Channel::Backward, 0.0);
        assert_eq!(shape.jumps_to_max, 1);
        assert!(shape.raises_to_max && shape.unit_drops);
        assert_eq!(shape.min_k, 1);
    }

    #[test]
    fn reference_av_bounds_truncate() {
        assert_eq!(reference_av_bounds().unwrap(), (35.75, 73.0));
    }
}
