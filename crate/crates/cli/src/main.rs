use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use dcsim::config::ScenarioConfig;
use dcsim::error::{HarnessError, RunError};
use dcsim::harness::{self, RunReport, SweepRow};

#[derive(Parser)]
#[command(name = "dcsim", version, about = "Multi-connectivity user-plane simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum, Default)]
enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario file (TOML) or canned scenario name
    config: String,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for traces and reports
    #[arg(long, env = "DCSIM_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// Summary format on stdout
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace and report
    Run(RunArgs),
    /// Run an availability sweep over the scenario's psi/gamma grid
    Sweep(RunArgs),
    /// List canned scenarios
    List {
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Check a scenario without running it
    Validate { config: String },
    /// Print a canned scenario as TOML
    Show { name: String },
}

fn load(arg: &str, seed: Option<u64>) -> Result<Vec<ScenarioConfig>, HarnessError> {
    let mut cfgs = harness::load(arg)?;
    if let Some(s) = seed {
        cfgs.iter_mut().for_each(|c| c.seed = s);
    }
    Ok(cfgs)
}

fn print_run(out: &mut impl Write, reports: &[RunReport], format: Format) -> anyhow::Result<()> {
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(reports)?)?,
        Format::Csv => {
            writeln!(out, "scenario,path_id,useful_bytes,redundant_bytes,availability,max_delivery_gap_s")?;
            for r in reports {
                for p in &r.paths {
                    writeln!(
                        out,
                        "{},{},{},{},{:.6},{:.6}",
                        r.config.name,
                        p.path_id,
                        p.useful_bytes,
                        p.redundant_bytes,
                        p.availability,
                        p.max_delivery_gap_s
                    )?;
                }
            }
        }
    }
    Ok(())
}

fn write_sweep(out: &mut impl Write, rows: &[SweepRow]) -> anyhow::Result<()> {
    out.write_all(harness::render_sweep_csv(rows).as_bytes())?;
    Ok(())
}

fn sweep(args: &RunArgs, stdout: &mut impl Write) -> Result<anyhow::Result<()>, HarnessError> {
    let mut all = Vec::new();
    for cfg in load(&args.config, args.seed)? {
        let rows = harness::run_availability_sweep(&cfg)?;
        std::fs::create_dir_all(&args.out)
            .map_err(|source| RunError::Io { path: args.out.display().to_string(), source })?;
        let path = args.out.join(format!("{}.csv", harness::output_stem(&cfg.name)));
        let written = std::fs::File::create(&path)
            .map_err(anyhow::Error::from)
            .and_then(|mut f| write_sweep(&mut f, &rows))
            .with_context(|| path.display().to_string());
        if let Err(e) = written {
            return Ok(Err(e));
        }
        all.extend(rows);
    }
    Ok(match args.format {
        Format::Csv => write_sweep(stdout, &all),
        Format::Json => serde_json::to_string_pretty(&all)
            .map_err(anyhow::Error::from)
            .and_then(|s| writeln!(stdout, "{s}").map_err(Into::into)),
    })
}

fn run(args: &RunArgs, stdout: &mut impl Write) -> Result<anyhow::Result<()>, HarnessError> {
    let cfgs = load(&args.config, args.seed)?;
    let mut reports = Vec::new();
    for cfg in &cfgs {
        if cfg.sweep.is_some() {
            eprintln!("note: {} defines a sweep grid; running the base scenario only", cfg.name);
        }
        reports.push(harness::run_scenario(cfg, Path::new(&args.out))?);
    }
    Ok(print_run(stdout, &reports, args.format))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let result = match &cli.command {
        Command::Run(a) => run(a, &mut stdout),
        Command::Sweep(a) => sweep(a, &mut stdout),
        Command::List { format } => Ok(match format {
            Format::Json => serde_json::to_string_pretty(harness::list_scenarios())
                .map_err(anyhow::Error::from)
                .and_then(|s| writeln!(stdout, "{s}").map_err(Into::into)),
            Format::Csv => harness::list_scenarios().iter().try_for_each(|e| {
                writeln!(stdout, "{:<26} {}\n{:<26} anchor: {}", e.name, e.description, "", e.anchor)
                    .map_err(Into::into)
            }),
        }),
        Command::Validate { config } => load(config, None).and_then(|cfgs| {
            for c in &cfgs {
                harness::validate(c)?;
            }
            Ok(writeln!(stdout, "ok: {}", cfgs.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(", "))
                .map_err(Into::into))
        }),
        Command::Show { name } => match harness::canned(name) {
            Some(cfgs) => Ok(cfgs.iter().enumerate().try_for_each(|(i, c)| {
                let sep = if i > 0 { "\n# ----\n\n" } else { "" };
                write!(stdout, "{sep}{}", c.to_toml_string()).map_err(Into::into)
            })),
            None => Err(dcsim::error::ConfigError::new(name.as_str(), "unknown canned scenario").into()),
        },
    };
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
