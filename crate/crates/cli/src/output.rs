use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use telehaptic::analysis::scenario_metrics;
use telehaptic::netsim::SampleMedia;
use telehaptic::presets::{Report, RunResult, Table};

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Per-run traces and summaries, preset tables, and `checks.txt`.
pub fn write_run(dir: &Path, runs: &[RunResult], report: &Report) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for r in runs {
        let sub = dir.join(&r.label);
        fs::create_dir_all(&sub).with_context(|| format!("creating {}", sub.display()))?;
        r.trace.write_csv(create(&sub.join("samples.csv"))?)?;
        r.trace.write_k_csv(create(&sub.join("k.csv"))?)?;
        r.trace.write_queue_csv(create(&sub.join("queue.csv"))?)?;
        scenario_metrics(&r.trace)?.write_report(create(&sub.join("summary.csv"))?)?;
        let toml = toml::to_string(&r.trace.scenario).context("serializing scenario")?;
        fs::write(sub.join("scenario.toml"), toml)?;
    }
    for t in &report.tables {
        t.write_csv(create(&dir.join(format!("{}.csv", t.name)))?)?;
    }
    report.write_checks(create(&dir.join("checks.txt"))?)?;
    Ok(())
}

/// Sort key: numeric when every value parses as a number.
fn order(rows: &mut [(String, RunResult)]) {
    let numeric = rows.iter().all(|(v, _)| v.parse::<f64>().is_ok());
    rows.sort_by(|(a, ra), (b, rb)| {
        let by_value = if numeric {
            a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap())
        } else {
            a.cmp(b)
        };
        by_value
            .then_with(|| ra.label.cmp(&rb.label))
            .then_with(|| ra.trace.scenario.seed.cmp(&rb.trace.scenario.seed))
    });
}

/// One row per value, run and stream in `<dir>/sweep_<param>.csv`.
pub fn write_sweep(dir: &Path, param: &str, mut rows: Vec<(String, RunResult)>) -> Result<PathBuf> {
    order(&mut rows);
    let mut table = Table {
        name: format!("sweep_{param}"),
        header: [
            param, "run", "seed", "stream", "sent", "delivered", "dropped", "throughput_kbps",
            "loss_fraction", "max_haptic_delay_ms",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        rows: Vec::new(),
    };
    for (v, r) in &rows {
        let m = scenario_metrics(&r.trace)?;
        for s in &m.streams {
            let haptic = m
                .media
                .iter()
                .find(|x| x.media == SampleMedia::Haptic && s.stream == format!("telehaptic_{}", x.channel.name()))
                .map(|x| format!("{:.4}", x.max_delay_ms))
                .unwrap_or_default();
            table.rows.push(vec![
                v.clone(),
                r.label.clone(),
                r.trace.scenario.seed.to_string(),
                s.stream.clone(),
                s.sent.to_string(),
                s.delivered.to_string(),
                s.dropped.to_string(),
                format!("{:.3}", s.throughput_kbps),
                format!("{:.6}", s.loss_fraction),
                haptic,
            ]);
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("{}.csv", table.name));
    table.write_csv(create(&path)?)?;
    Ok(path)
}
