//! Command-line front end.
//!
//! Exit codes carry the verdict: 0 nuclear, 1 not nuclear, 2 inconclusive,
//! and anything above 2 is an error (bad usage, unreadable file, failed
//! gallery run). Help and version requests exit 0.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use lpnuclear::{
    analyze, check_all, noncompact_witness, parse_spec, render_json, render_text, InstanceSpec,
    Overrides, ResolvedOptions, Verdict, GALLERY,
};

const EXIT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lpnuclear",
    version,
    about = "Decide nuclearity of weighted composition operators between L^p spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze an instance file; the exit code carries the verdict.
    Analyze {
        /// Instance file (JSON).
        spec_file: PathBuf,
        /// Run the independent oracles (pushforward identity, brute-force
        /// norms, representation residuals).
        #[arg(long)]
        oracle: bool,
        /// Number of atoms kept as explicit representation terms.
        #[arg(long)]
        truncation: Option<u64>,
        /// Seed for sampled inputs and multistart searches.
        #[arg(long)]
        seed: Option<u64>,
        /// Output format.
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// List the built-in gallery; with --run, re-analyze every entry and
    /// compare against its recorded outcome.
    Gallery {
        #[arg(long)]
        run: bool,
    },
    /// Build the non-compactness witness family for an instance whose weight
    /// survives on the non-atomic part (p = q only).
    Witness {
        /// Instance file (JSON).
        spec_file: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Refinement depth of the witness family printed by `witness`.
const WITNESS_LEVELS: u32 = 10;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful outcomes; anything else is a
            // usage error, pushed above the verdict range.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_ERROR,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut out = String::new();
    let code = match run(cli, &mut out) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    };
    // One flush at the end; a reader that hangs up early (head, a closed
    // pipe) must not turn a computed verdict into a panic.
    let _ = std::io::stdout().write_all(out.as_bytes());
    ExitCode::from(code)
}

fn run(cli: Cli, out: &mut String) -> Result<u8, String> {
    match cli.command {
        Command::Analyze { spec_file, oracle, truncation, seed, format } => {
            let spec = load_spec(&spec_file)?;
            let over = Overrides { truncation, oracle: oracle.then_some(true), samples: None, seed };
            let opts = ResolvedOptions::resolve(&spec, &over).map_err(|e| e.to_string())?;
            let report = analyze(&spec, &opts).map_err(|e| e.to_string())?;
            match format {
                Format::Text => out.push_str(&render_text(&report)),
                Format::Json => out.push_str(&render_json(&report)),
            }
            Ok(match report.verdict {
                Verdict::Nuclear => 0,
                Verdict::NotNuclear => 1,
                Verdict::Inconclusive => 2,
            })
        }
        Command::Gallery { run } => {
            if !run {
                for entry in GALLERY {
                    let spec = parse_spec(entry.source).map_err(|e| e.to_string())?;
                    let expect = spec
                        .expected
                        .as_ref()
                        .map(|e| format!("{:?}", e.verdict))
                        .unwrap_or_else(|| "?".into());
                    let _ = writeln!(
                        out,
                        "{:<28} p = {}, q = {}, expected {}",
                        entry.name, spec.p, spec.q, expect
                    );
                }
                return Ok(0);
            }
            let checks = check_all().map_err(|e| e.to_string())?;
            let mut failures = 0usize;
            for check in &checks {
                let status = if check.passed { "ok  " } else { "FAIL" };
                let _ = writeln!(out, "{status} {:<28} {}", check.name, check.detail);
                if !check.passed {
                    failures += 1;
                }
            }
            if failures == 0 {
                let _ = writeln!(out, "all {} entries match their recorded outcomes", checks.len());
                Ok(0)
            } else {
                let _ = writeln!(out, "{failures} of {} entries regressed", checks.len());
                Ok(EXIT_ERROR)
            }
        }
        Command::Witness { spec_file } => {
            let spec = load_spec(&spec_file)?;
            let op = spec.build().map_err(|e| e.to_string())?;
            let w = noncompact_witness(&op, WITNESS_LEVELS).map_err(|e| e.to_string())?;
            let _ = writeln!(out, "block {}", w.block.0);
            let _ = writeln!(out, "certified ratio floor {:.12}", w.lower_bound);
            for (k, (set, ratio)) in w.sets.iter().zip(&w.ratios).enumerate() {
                let _ = writeln!(
                    out,
                    "level {:>2}: mass {:.6e}, suffix start {:>4}, ratio {:.12}",
                    k + 1,
                    set.mass,
                    set.start,
                    ratio
                );
            }
            Ok(0)
        }
    }
}

fn load_spec(path: &Path) -> Result<InstanceSpec, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_spec(&text).map_err(|e| e.to_string())
}
