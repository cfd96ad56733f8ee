use antiwindup_cli::compare::{compare_files, render_table};
use antiwindup_cli::run::run;
use antiwindup_cli::scenario::{bundled, ScenarioFile, BUNDLED};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "antiwindup", version, about = "Anti-windup synthesis and simulation scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or a bundled scenario by id.
    Run {
        scenario: String,
        /// Output directory for design, traces, metrics and plots.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare two metrics.json files.
    Compare {
        a: String,
        b: String,
        /// Print JSON rows instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// List the bundled scenarios.
    ListScenarios,
}

fn load(scenario: &str) -> Result<ScenarioFile> {
    let text = if Path::new(scenario).exists() {
        std::fs::read_to_string(scenario).with_context(|| format!("cannot read {scenario}"))?
    } else if let Some(t) = bundled(scenario) {
        t.to_string()
    } else {
        anyhow::bail!("no scenario file or bundled scenario named `{scenario}`");
    };
    ScenarioFile::from_json(&text).with_context(|| format!("cannot load scenario `{scenario}`"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, out, seed } => (|| {
            let s = match load(&scenario) {
                Ok(s) => s,
                Err(e) => {
                    let _ = std::fs::create_dir_all(&out);
                    let _ = std::fs::write(out.join("error.txt"), format!("{e:#}\n"));
                    return Err(e);
                }
            };
            let t0 = Instant::now();
            let m = run(&s, &out, seed)?;
            let e = (m.nominal.saturation_error_energy, m.compensated.saturation_error_energy);
            println!(
                "{}: method {}, saturation-error energy {:.6} -> {:.6}, {:.1} s, artifacts in {}",
                s.id,
                m.method,
                e.0,
                e.1,
                t0.elapsed().as_secs_f64(),
                out.display()
            );
            Ok(())
        })(),
        Command::Compare { a, b, json } => compare_files(&a, &b).map(|rows| {
            if json {
                println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize"));
            } else {
                print!("{}", render_table(&rows));
            }
        }),
        Command::ListScenarios => {
            for (id, text) in BUNDLED {
                let s = ScenarioFile::from_json(text).expect("bundled scenarios are valid");
                println!("{id:<18} {:<16} {}", s.method.name(), s.description);
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
