//! Command-line front end over scenario files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{compute_constants, report_pairs, report_text, residual_bound};
use crate::error::{Error, Result};
use crate::gains::certify;
use crate::graph::SpectralCertificate;
use crate::keymat::fmt17;
use crate::scenario::Scenario;

#[derive(Debug, Parser)]
#[command(name = "consensus-sim", version, about = "Adaptive consensus protocol simulator")]
pub struct Cli {
    /// Scenario file; repeat to run a batch in parallel.
    #[arg(long = "scenario", global = true)]
    pub scenarios: Vec<PathBuf>,
    /// Output directory; each scenario writes to `<out>/<name>/`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long = "t-end", global = true)]
    pub t_end: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand, PartialEq, Eq)]
pub enum Command {
    /// Synthesize gains and write them with their certificate.
    Design,
    /// Run the simulation and write the trace and metrics.
    Simulate,
    /// Certify gains and graph without simulating.
    Check,
    /// Evaluate the residual-set bound.
    Bound,
    /// Aggregate per-scenario reports under the output directory.
    Report,
}

/// Result of one command on one scenario.
#[derive(Debug)]
pub struct Outcome {
    pub name: String,
    pub stdout: String,
    pub warnings: Vec<String>,
    pub error: Option<Error>,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        self.error.as_ref().map_or(0, Error::exit_code)
    }
}

fn load(path: &Path, cli: &Cli) -> Result<Scenario> {
    let mut sc = Scenario::from_file(path)?;
    if let Some(seed) = cli.seed {
        sc.seed = seed;
    }
    if let Some(dt) = cli.dt {
        sc.sim.dt = dt;
    }
    if let Some(t) = cli.t_end {
        sc.sim.t_end = t;
    }
    sc.sim.validate()?;
    Ok(sc)
}

fn out_dir(cli: &Cli, sc: &Scenario) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| sc.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
        .join(&sc.name)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn pairs_csv(pairs: &[(String, f64)]) -> String {
    let mut s = String::from("key,value\n");
    for (k, v) in pairs {
        let _ = writeln!(s, "{k},{}", fmt17(*v));
    }
    s
}

fn run_one(command: Command, path: &Path, cli: &Cli) -> Outcome {
    let mut out = Outcome {
        name: path.display().to_string(),
        stdout: String::new(),
        warnings: Vec::new(),
        error: None,
    };
    if let Err(e) = run_inner(command, path, cli, &mut out) {
        out.error = Some(e);
    }
    out
}

fn run_inner(command: Command, path: &Path, cli: &Cli, out: &mut Outcome) -> Result<()> {
    let sc = load(path, cli)?;
    out.name = sc.name.clone();
    let dir = out_dir(cli, &sc);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    match command {
        Command::Design => {
            let gains = sc.gains()?;
            gains.write(dir.join("gains.txt"))?;
            let cert = certify(&sc.model, &gains, sc.omega)?;
            write(&dir.join("certificate.txt"), &cert.to_string())?;
            out.stdout = format!("{}: gains written to {}\n{cert}", sc.name, dir.display());
            if !cert.all_passed() {
                let names: Vec<_> = cert.failures().iter().map(|c| c.name).collect();
                return Err(Error::Certification(names.join(", ")));
            }
        }
        Command::Check => {
            let gains = sc.gains()?;
            let cert = certify(&sc.model, &gains, sc.omega)?;
            let mut text = cert.to_string();
            match SpectralCertificate::for_graph(&sc.graph)? {
                SpectralCertificate::Leaderless(c) => {
                    let _ = writeln!(text, "PASS {:<34} margin {:+.6e}", "lambda2(Lhat) > 0", c.lambda2);
                }
                SpectralCertificate::Leader(c) => {
                    let _ = writeln!(text, "PASS {:<34} margin {:+.6e}", "lambda0 > 0", c.lambda0);
                }
            }
            write(&dir.join("certificate.txt"), &text)?;
            out.stdout = format!("{}\n{text}", sc.name);
            if !cert.all_passed() {
                let names: Vec<_> = cert.failures().iter().map(|c| c.name).collect();
                return Err(Error::Certification(names.join(", ")));
            }
        }
        Command::Bound => {
            let net = sc.network()?;
            let constants = compute_constants(&net, sc.omega)?;
            let bound = residual_bound(&net, &constants)?;
            let text = report_text(&sc.name, Some(&constants), Some(&bound), None);
            write(&dir.join("bound.txt"), &text)?;
            write(
                &dir.join("bound.csv"),
                &pairs_csv(&report_pairs(Some(&constants), Some(&bound), None)),
            )?;
            out.stdout = text;
        }
        Command::Simulate => {
            let run = sc.run().inspect_err(|e| {
                if let Error::Divergence { last_finite, .. } = e {
                    let dump: Vec<String> = last_finite.as_slice().iter().map(|v| fmt17(*v)).collect();
                    let _ = write(&dir.join("last_finite_state.txt"), &dump.join("\n"));
                }
            })?;
            run.trace.write_csv_file(dir.join("trace.csv"))?;
            write(&dir.join("trace.meta"), &run.trace.metadata_text())?;
            let c = run.constants.as_ref();
            let b = run.bound.as_ref();
            let m = Some(&run.metrics);
            let text = report_text(&sc.name, c, b, m);
            write(&dir.join("report.txt"), &text)?;
            write(&dir.join("report.csv"), &pairs_csv(&report_pairs(c, b, m)))?;
            out.warnings = run.trace.warnings.clone();
            out.stdout = text;
        }
        Command::Report => unreachable!("report does not load scenarios"),
    }
    Ok(())
}

/// Collects `<out>/*/report.csv` into `<out>/summary.csv`, one row per scenario.
pub fn aggregate_reports(out: &Path) -> Result<PathBuf> {
    let entries = std::fs::read_dir(out).map_err(|e| Error::io(out, e))?;
    let mut rows: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(out, e))?;
        let path = entry.path().join("report.csv");
        if !path.is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        let mut rdr = csv::Reader::from_path(&path)
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        let mut row = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
            if rec.len() != 2 {
                return Err(Error::Input(format!("{}: expected key,value rows", path.display())));
            }
            row.insert(rec[0].to_string(), rec[1].to_string());
        }
        rows.insert(name, row);
    }
    if rows.is_empty() {
        return Err(Error::Input(format!("no report.csv under {}", out.display())));
    }
    let mut keys: Vec<&String> = rows.values().flat_map(|r| r.keys()).collect();
    keys.sort();
    keys.dedup();
    let dest = out.join("summary.csv");
    let mut w = csv::Writer::from_path(&dest).map_err(|e| Error::Input(e.to_string()))?;
    let header: Vec<&str> = std::iter::once("scenario").chain(keys.iter().map(|k| k.as_str())).collect();
    w.write_record(&header).map_err(|e| Error::Input(e.to_string()))?;
    for (name, row) in &rows {
        let rec: Vec<&str> = std::iter::once(name.as_str())
            .chain(keys.iter().map(|k| row.get(*k).map_or("", |v| v.as_str())))
            .collect();
        w.write_record(&rec).map_err(|e| Error::Input(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&dest, e))?;
    Ok(dest)
}

/// Runs `cli`, printing to stdout/stderr, and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    if cli.command == Command::Report {
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        return match aggregate_reports(&out) {
            Ok(p) => {
                println!("{}", p.display());
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        };
    }
    if cli.scenarios.is_empty() {
        eprintln!("error: at least one --scenario is required");
        return 2;
    }
    let outcomes: Vec<Outcome> = std::thread::scope(|s| {
        let handles: Vec<_> = cli
            .scenarios
            .iter()
            .map(|p| s.spawn(move || run_one(cli.command, p, cli)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    });
    let mut code = 0;
    for o in &outcomes {
        print!("{}", o.stdout);
        for w in &o.warnings {
            eprintln!("warning: {}: {w}", o.name);
        }
        if let Some(e) = &o.error {
            let msg = e.to_string();
            if msg.starts_with(&o.name) {
                eprintln!("error: {msg}");
            } else {
                eprintln!("error: {}: {msg}", o.name);
            }
        }
        code = code.max(o.exit_code());
    }
    code
}
