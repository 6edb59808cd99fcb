use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use steenlab::dirac::LambdaGrid;
use steenlab::report::RunReport;
use steenlab::scenario::{run_scenarios, AlphaGridSpec, RunConfig, RunOptions, Scenario};
use steenlab::traces::{emit_traces, write_trace};

#[derive(Parser)]
#[command(name = "steenlab", version, about = "Residual verification of superposition, monodromy and deformation identities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario of a config file or a bundled suite.
    Run(RunArgs),
    /// Oscillator and Pinney superposition checks.
    Steen {
        #[command(subcommand)]
        command: SteenCommand,
    },
    /// Monodromy and invariants of the linear Dirac system.
    Dirac {
        #[command(subcommand)]
        command: DiracCommand,
    },
    /// Partial solutions and deformed flows.
    Deform {
        #[command(subcommand)]
        command: DeformCommand,
    },
}

#[derive(Subcommand)]
enum SteenCommand {
    Verify(RunArgs),
}

#[derive(Subcommand)]
enum DiracCommand {
    /// Scan λ and write γ₁, det and Novikov diagnostics as CSV.
    Monodromy {
        #[command(flatten)]
        run: RunArgs,
        /// `re_min:re_max:n,im_min:im_max:m`
        #[arg(long)]
        lambda_grid: Option<String>,
    },
}

#[derive(Subcommand)]
enum DeformCommand {
    Verify(RunArgs),
    /// Re-run the ᾱ scan on a custom grid.
    ScanAlpha {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        alpha_min: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        alpha_max: f64,
        #[arg(long, default_value_t = 41)]
        alpha_steps: usize,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scenario config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundled suite to use when no config is given.
    #[arg(long, default_value = "default")]
    suite: String,
    /// Directory for report.json and CSV traces.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write CSV traces (requires --out).
    #[arg(long)]
    traces: bool,
    /// Omit wall-clock timings so reports are byte-reproducible.
    #[arg(long)]
    no_timings: bool,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

fn load(args: &RunArgs) -> Result<RunConfig> {
    match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(RunConfig::from_json(&text)?)
        }
        None if args.suite == "default" => Ok(RunConfig::default_suite()),
        None => bail!("unknown suite {:?}", args.suite),
    }
}

fn execute(args: &RunArgs, mut config: RunConfig, keep: impl Fn(&Scenario) -> bool) -> Result<RunReport> {
    config.scenarios.retain(|s| keep(s));
    let options = RunOptions {
        jobs: args.jobs,
        timings: !args.no_timings,
    };
    let report = run_scenarios(&config, &options)?;
    let json = report.to_json();
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("report.json"), json + "\n")?;
            if args.traces {
                for p in emit_traces(&report, dir)? {
                    log::info!("wrote {}", p.display());
                }
            }
        }
        None => {
            if args.traces {
                bail!("--traces needs --out");
            }
            emit(&format!("{json}\n"))?;
        }
    }
    let s = &report.summary;
    eprintln!(
        "{} scenarios: {} pass, {} fail, {} reported-only, {} error",
        report.scenarios.len(),
        s.pass,
        s.fail,
        s.reported_only,
        s.error
    );
    Ok(report)
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn has_steen(s: &Scenario) -> bool {
    matches!(s, Scenario::Steen(_)) || matches!(s, Scenario::FullChain(fc) if fc.steen.is_some())
}

fn has_dirac(s: &Scenario) -> bool {
    matches!(s, Scenario::Dirac(_)) || matches!(s, Scenario::FullChain(fc) if fc.dirac.is_some())
}

fn has_deform(s: &Scenario) -> bool {
    matches!(s, Scenario::Deform(_)) || matches!(s, Scenario::FullChain(fc) if fc.deform.is_some())
}

fn write_lambda_scans(report: &RunReport, dir: Option<&Path>) -> Result<()> {
    for s in &report.scenarios {
        for t in s.traces.iter().filter(|t| t.name == "lambda-scan") {
            match dir {
                Some(d) => write_trace(t, &d.join(format!("{}.lambda-scan.csv", s.scenario)))?,
                None => {
                    let mut text = format!("# {}\n{}\n", s.scenario, t.columns.join(","));
                    for row in &t.rows {
                        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
                        text.push_str(&cells.join(","));
                        text.push('\n');
                    }
                    emit(&text)?;
                }
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<RunReport> {
    match cli.command {
        Command::Run(args) => execute(&args, load(&args)?, |_| true),
        Command::Steen {
            command: SteenCommand::Verify(args),
        } => execute(&args, load(&args)?, has_steen),
        Command::Dirac {
            command: DiracCommand::Monodromy { mut run, lambda_grid },
        } => {
            let mut config = load(&run)?;
            if let Some(g) = &lambda_grid {
                g.parse::<LambdaGrid>()?;
                for s in &mut config.scenarios {
                    let section = match s {
                        Scenario::Dirac(d) => Some(d),
                        Scenario::FullChain(fc) => fc.dirac.as_mut(),
                        _ => None,
                    };
                    if let Some(d) = section {
                        d.lambdas.clear();
                        d.lambda_grid = Some(g.clone());
                    }
                }
                config.validate()?;
            }
            // The CSV scan replaces the JSON report on stdout.
            let out = run.out.clone();
            if out.is_none() {
                run.out = Some(std::env::temp_dir().join(format!("steenlab-{}", std::process::id())));
            }
            let report = execute(&run, config, has_dirac)?;
            write_lambda_scans(&report, out.as_deref())?;
            if out.is_none() {
                if let Some(tmp) = run.out {
                    let _ = std::fs::remove_dir_all(tmp);
                }
            }
            Ok(report)
        }
        Command::Deform {
            command: DeformCommand::Verify(args),
        } => execute(&args, load(&args)?, has_deform),
        Command::Deform {
            command:
                DeformCommand::ScanAlpha {
                    run,
                    alpha_min,
                    alpha_max,
                    alpha_steps,
                },
        } => {
            if alpha_steps == 0 || alpha_max.partial_cmp(&alpha_min).is_none_or(|o| o.is_lt()) {
                bail!("need alpha_steps >= 1 and alpha_max >= alpha_min");
            }
            let mut config = load(&run)?;
            let grid = AlphaGridSpec {
                min: alpha_min,
                max: alpha_max,
                steps: alpha_steps,
            };
            for s in &mut config.scenarios {
                match s {
                    Scenario::Deform(d) => d.alpha_grid = grid,
                    Scenario::FullChain(fc) => {
                        if let Some(d) = fc.deform.as_mut() {
                            d.alpha_grid = grid;
                        }
                    }
                    _ => {}
                }
            }
            execute(&run, config, has_deform)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STEENLAB_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(report) => ExitCode::from(report.exit_status() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
