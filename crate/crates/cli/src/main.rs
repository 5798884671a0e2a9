//! Command-line front end: runs presets and scenario files, sweeps one
//! parameter, and writes traces, summaries and check results as CSV.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 on a
//! configuration or I/O error.

mod output;
mod overrides;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use telehaptic::netsim;
use telehaptic::presets::{self, Labeled, RunResult};

pub const SCHEMA: &str = include_str!("../schema.toml");

#[derive(Parser, Debug)]
#[command(name = "telehaptic", version, about = "Telehaptic dynamic packetization simulator")]
struct Cli {
    /// Print the annotated scenario file reference and exit.
    #[arg(long)]
    print_schema: bool,

    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run a preset or a scenario file.
    Run(Common),
    /// Run once per value of one parameter and aggregate per-stream results.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted parameter path, or r_cbr for the backward CBR rate.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
    /// List presets.
    List,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    preset: Option<String>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory; defaults to a subdirectory of $TELEHAPTIC_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override a scenario value, e.g. --set feedback.alpha=0.3. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = overrides::parse_pair)]
    sets: Vec<(String, String)>,
    /// Repeat with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    reps: u64,
}

#[derive(Debug)]
enum Outcome {
    Pass,
    Fail,
}

fn out_root() -> PathBuf {
    std::env::var_os("TELEHAPTIC_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("results"))
}

impl Common {
    fn target(&self) -> String {
        match (&self.preset, &self.scenario) {
            (Some(p), _) => p.clone(),
            (None, Some(s)) => s
                .file_stem()
                .map(|x| x.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".into()),
            (None, None) => unreachable!("clap requires one of them"),
        }
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| out_root().join(self.target()))
    }

    /// Labelled scenarios for one seed, overrides applied.
    fn build(&self, seed: Option<u64>, extra: &[(String, String)]) -> Result<Vec<Labeled>> {
        let mut list = match (&self.preset, &self.scenario) {
            (Some(p), _) => presets::scenarios(p, seed.unwrap_or(1))?,
            (None, Some(path)) => {
                let mut sc = overrides::load(path)?;
                if let Some(s) = seed {
                    sc.seed = s;
                }
                vec![Labeled {
                    label: self.target(),
                    scenario: sc,
                }]
            }
            (None, None) => unreachable!(),
        };
        let sets: Vec<_> = self.sets.iter().chain(extra).cloned().collect();
        for l in &mut list {
            l.scenario = overrides::apply(&l.scenario, &sets)
                .with_context(|| format!("run {:?}", l.label))?;
        }
        Ok(list)
    }

    fn seeds(&self) -> Result<Vec<Option<u64>>> {
        if self.reps == 0 {
            bail!("--reps must be at least 1");
        }
        if self.reps == 1 {
            return Ok(vec![self.seed]);
        }
        let base = self.seed.unwrap_or(1);
        Ok((0..self.reps).map(|i| Some(base + i)).collect())
    }
}

fn simulate(list: Vec<Labeled>) -> Result<Vec<RunResult>> {
    list.into_par_iter()
        .map(|l| {
            let trace = netsim::run(&l.scenario).with_context(|| format!("run {:?}", l.label))?;
            Ok(RunResult {
                label: l.label,
                trace,
            })
        })
        .collect()
}

/// QoS over the metrics window is the assertion a bare scenario carries.
fn scenario_report(runs: &[RunResult]) -> Result<presets::Report> {
    let mut checks = Vec::new();
    for r in runs {
        let m = telehaptic::analysis::scenario_metrics(&r.trace)?;
        let failing: Vec<String> = m
            .media
            .iter()
            .filter(|x| !(x.delay_ok && x.jitter_ok))
            .map(|x| format!("{} {}", x.channel.name(), x.media.name()))
            .collect();
        checks.push(presets::Check::new(
            format!("{}-qos", r.label),
            failing.is_empty(),
            if failing.is_empty() {
                "all media within their delay and jitter limits".to_string()
            } else {
                format!("outside limits: {}", failing.join(", "))
            },
        ));
    }
    Ok(presets::Report {
        preset: "scenario".into(),
        tables: Vec::new(),
        checks,
    })
}

fn run(c: &Common) -> Result<Outcome> {
    let root = c.out_dir();
    let seeds = c.seeds()?;
    let mut all_pass = true;
    for seed in &seeds {
        let dir = match (seeds.len(), seed) {
            (1, _) | (_, None) => root.clone(),
            (_, Some(s)) => root.join(format!("seed{s}")),
        };
        let runs = simulate(c.build(*seed, &[])?)?;
        let report = match &c.preset {
            Some(p) => presets::evaluate(p, &runs)?,
            None => scenario_report(&runs)?,
        };
        output::write_run(&dir, &runs, &report)?;
        report.write_checks(std::io::stdout().lock())?;
        println!("wrote {}", dir.display());
        all_pass &= report.passed();
    }
    Ok(if all_pass { Outcome::Pass } else { Outcome::Fail })
}

fn sweep(c: &Common, param: &str, values: &[String]) -> Result<Outcome> {
    let dir = c.out_dir();
    let mut jobs = Vec::new();
    for v in values.iter().filter(|v| !v.trim().is_empty()) {
        for seed in c.seeds()? {
            let extra = [(param.to_string(), v.clone())];
            for l in c.build(seed, &extra)? {
                jobs.push((v.clone(), l));
            }
        }
    }
    let rows: Vec<(String, RunResult)> = jobs
        .into_par_iter()
        .map(|(v, l)| {
            let trace = netsim::run(&l.scenario).with_context(|| format!("{param}={v}"))?;
            Ok((
                v,
                RunResult {
                    label: l.label,
                    trace,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let path = output::write_sweep(&dir, param, rows)?;
    println!("wrote {}", path.display());
    Ok(Outcome::Pass)
}

fn real_main(cli: Cli) -> Result<Outcome> {
    if cli.print_schema {
        print!("{SCHEMA}");
        return Ok(Outcome::Pass);
    }
    match cli.cmd {
        None => bail!("nothing to do; try --help"),
        Some(Cmd::List) => {
            for n in presets::NAMES {
                println!("{n:<13} {}", presets::describe(n).unwrap_or(""));
            }
            Ok(Outcome::Pass)
        }
        Some(Cmd::Run(c)) => run(&c),
        Some(Cmd::Sweep {
            common,
            param,
            values,
        }) => sweep(&common, &param, &values),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match real_main(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
