//! `inflaton`: run scenarios, audit potentials, sweep parameters and plot
//! time series.
//!
//! Exit codes: 0 pass, 1 bad input, 2 verdict failed, 3 run aborted.

mod config;
mod schema;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use inflaton::experiments::{
    centered_rate, read_csv, run_scenario_outcome, write_csv, RunOutcome, RunReport,
};
use inflaton::potentials::{audit, expected_class, AuditOptions, PotentialAuditReport};
use inflaton::PotentialSpec;
use rayon::prelude::*;

use crate::config::{RunConfig, SweepConfig};

const EXIT_PASS: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_FAIL: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Parser)]
#[command(name = "inflaton", version, about = "Radial de Sitter Klein-Gordon simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write series.csv and verdict.json.
    Simulate {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a potential family against the theorem hypotheses.
    Audit {
        family: String,
        #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        hi: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
    },
    /// Run the Cartesian product of amplitudes and Hubble rates.
    Sweep { config: PathBuf },
    /// Render SVG plots from a series.csv.
    Plot {
        series: PathBuf,
        /// Defaults to the directory containing the CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the JSON schema of a config file.
    Schema {
        #[arg(value_enum, default_value_t = SchemaKind::Run)]
        kind: SchemaKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaKind {
    Run,
    Sweep,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out } => cmd_simulate(&config, out),
        Command::Audit {
            family,
            lo,
            hi,
            samples,
            delta,
        } => cmd_audit(&family, lo, hi, samples, delta),
        Command::Sweep { config } => cmd_sweep(&config),
        Command::Plot { series, out } => cmd_plot(&series, out).map(|_| EXIT_PASS),
        Command::Schema { kind } => {
            let v = match kind {
                SchemaKind::Run => schema::run_config(),
                SchemaKind::Sweep => schema::sweep_config(),
            };
            println!("{}", serde_json::to_string_pretty(&v).expect("schema serialises"));
            Ok(EXIT_PASS)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn write_outputs(dir: &Path, report: &RunReport, plots: bool) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv = dir.join("series.csv");
    fs::write(&csv, write_csv(&report.records))?;
    fs::write(dir.join("verdict.json"), serde_json::to_string_pretty(report)? + "\n")?;
    if plots {
        cmd_plot(&csv, None)?;
    }
    Ok(())
}

fn write_abort(dir: &Path, scenario: &str, error: &inflaton::Error) -> Result<()> {
    fs::create_dir_all(dir)?;
    let v = serde_json::json!({"scenario": scenario, "aborted": true, "error": error.to_string()});
    fs::write(dir.join("verdict.json"), serde_json::to_string_pretty(&v)? + "\n")?;
    Ok(())
}

fn cmd_simulate(path: &Path, out: Option<PathBuf>) -> Result<u8> {
    let cfg: RunConfig = config::load(path)?;
    cfg.scenario.validate().context("invalid scenario")?;
    let dir = out
        .or(cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(&cfg.scenario.name));
    match run_scenario_outcome(&cfg.scenario)? {
        RunOutcome::Completed(report) => {
            write_outputs(&dir, &report, cfg.emit_plots)?;
            let v = &report.verdict;
            println!(
                "{}: {} (W_ratio {:.3e}, localE_ratio {:.3e}, coneE_ratio {:.3e}, monotone_I {})",
                report.scenario.name,
                if v.pass { "pass" } else { "fail" },
                v.W_ratio,
                v.localE_ratio,
                v.coneE_ratio,
                v.monotone_I
            );
            for f in &v.failures {
                println!("  - {f}");
            }
            Ok(if v.pass { EXIT_PASS } else { EXIT_FAIL })
        }
        RunOutcome::Aborted { scenario, error } => {
            write_abort(&dir, &scenario, &error)?;
            eprintln!("{scenario}: aborted: {error}");
            Ok(EXIT_ABORT)
        }
    }
}

fn print_audit(r: &PotentialAuditReport, expected: Option<inflaton::TheoremClass>) {
    let rows: [(&str, String); 11] = [
        ("potential", r.potential.to_string()),
        ("interval", format!("[{}, {}]", r.interval.0, r.interval.1)),
        ("samples", format!("{} (spacing {:.3e})", r.samples, r.spacing)),
        ("min F", format!("{:.6e}", r.potential_min)),
        ("min 2F - s f", format!("{:.6e}", r.virial_sign_min)),
        ("min 2F - s f near 0", format!("{:.6e}", r.local_virial_sign_min)),
        ("quartic constant", r.quartic_constant.to_string()),
        ("sup |f'|", format!("{:.6e}", r.lipschitz_bound)),
        ("min s f", format!("{:.6e}", r.defocusing_min)),
        ("class", r.theorem_class.to_string()),
        (
            "expected",
            expected.map_or_else(|| "(none)".to_string(), |c| c.to_string()),
        ),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        println!("{k:<width$}  {v}");
    }
}

fn cmd_audit(family: &str, lo: f64, hi: f64, samples: usize, delta: f64) -> Result<u8> {
    let spec: PotentialSpec = family.parse()?;
    let options = AuditOptions {
        interval: (lo, hi),
        delta,
        samples,
        ..AuditOptions::default()
    };
    let report = audit(&spec, &options)?;
    let expected = expected_class(&spec);
    print_audit(&report, expected);
    println!("{}", serde_json::to_string(&report)?);
    Ok(if expected == Some(report.theorem_class) {
        EXIT_PASS
    } else {
        EXIT_FAIL
    })
}

enum MemberStatus {
    Done(Box<RunReport>),
    Aborted(String),
    Error(String),
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("INFLATON_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("INFLATON_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            anyhow::bail!("INFLATON_THREADS must be a positive integer, got 0");
        }
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

fn cmd_sweep(path: &Path) -> Result<u8> {
    let cfg: SweepConfig = config::load(path)?;
    let members = cfg.expand()?;
    for m in &members {
        m.scenario
            .validate()
            .with_context(|| format!("sweep member {}", m.scenario.name))?;
    }
    let pool = worker_pool()?;
    let results: Vec<MemberStatus> = pool.install(|| {
        members
            .par_iter()
            .map(|m| {
                let dir = cfg.output_dir.join(&m.scenario.name);
                match run_scenario_outcome(&m.scenario) {
                    Ok(RunOutcome::Completed(r)) => match write_outputs(&dir, &r, cfg.emit_plots) {
                        Ok(()) => MemberStatus::Done(r),
                        Err(e) => MemberStatus::Error(format!("{e:#}")),
                    },
                    Ok(RunOutcome::Aborted { scenario, error }) => {
                        let _ = write_abort(&dir, &scenario, &error);
                        MemberStatus::Aborted(error.to_string())
                    }
                    Err(e) => MemberStatus::Error(e.to_string()),
                }
            })
            .collect()
    });

    let mut summary = String::from(
        "name,amplitude,hubble,status,pass,W_ratio,localE_ratio,coneE_ratio,monotone_I,integrability_saturation\n",
    );
    let mut code = EXIT_PASS;
    for (m, r) in members.iter().zip(&results) {
        let row = match r {
            MemberStatus::Done(rep) => {
                let v = &rep.verdict;
                if !v.pass {
                    code = code.max(EXIT_FAIL);
                }
                format!(
                    "completed,{},{:e},{:e},{:e},{},{:e}",
                    v.pass,
                    v.W_ratio,
                    v.localE_ratio,
                    v.coneE_ratio,
                    v.monotone_I,
                    v.integrability_saturation
                )
            }
            MemberStatus::Aborted(e) => {
                code = code.max(EXIT_ABORT);
                eprintln!("{}: aborted: {e}", m.scenario.name);
                "aborted,false,,,,,".to_string()
            }
            MemberStatus::Error(e) => {
                code = code.max(EXIT_ABORT);
                eprintln!("{}: error: {e}", m.scenario.name);
                "error,false,,,,,".to_string()
            }
        };
        summary.push_str(&format!("{},{},{},{row}\n", m.scenario.name, m.amplitude, m.hubble));
    }
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(cfg.output_dir.join("summary.csv"), &summary)?;
    print!("{summary}");
    Ok(code)
}

fn column<'a>(cols: &'a [(String, Vec<f64>)], name: &str) -> Result<&'a [f64]> {
    cols.iter()
        .find(|(h, _)| h == name)
        .map(|(_, v)| v.as_slice())
        .with_context(|| format!("series has no column {name:?}"))
}

fn cmd_plot(series: &Path, out: Option<PathBuf>) -> Result<()> {
    let text = fs::read_to_string(series).with_context(|| format!("reading {}", series.display()))?;
    let cols = read_csv(&text)?;
    let dir = out.unwrap_or_else(|| {
        series
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    fs::create_dir_all(&dir)?;
    let t = column(&cols, "t")?;
    let single = |name: &str, file: &str| -> Result<()> {
        let ys = column(&cols, name)?;
        let svg = svg::line_plot(name, "t", &[svg::Series { label: name, xs: t, ys }]);
        fs::write(dir.join(file), svg)?;
        Ok(())
    };
    single("E", "energy.svg")?;
    single("W", "weighted_energy.svg")?;
    single("I", "virial_I.svg")?;
    let i = column(&cols, "I")?;
    let rate = column(&cols, "I_rate")?;
    let fd: Vec<f64> = centered_rate(t, i)
        .into_iter()
        .map(|v| v.unwrap_or(f64::NAN))
        .collect();
    let svg = svg::line_plot(
        "dI/dt",
        "t",
        &[
            svg::Series {
                label: "I_rate",
                xs: t,
                ys: rate,
            },
            svg::Series {
                label: "finite difference of I",
                xs: t,
                ys: &fd,
            },
        ],
    );
    fs::write(dir.join("virial_rate.svg"), svg)?;
    Ok(())
}
