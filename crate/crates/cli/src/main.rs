use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use decoq::commands::{cmd_fig1, cmd_simulate, cmd_sweep, cmd_td, cmd_validate};
use decoq::report::{self, Report, Verdict};
use decoq::{apply_dim_cap_env, parse_config, CliError, ExperimentConfig, Format};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Closed-form decoherence time and limit formulas.
    Td,
    /// Exact entropy series s(t).
    Simulate,
    /// Cross-check s''(0) by three routes.
    Validate,
    /// Fock, thermal and squeezed curves of the dephasing figure.
    Fig1,
    /// Closed forms over a parameter sweep.
    Sweep,
}

#[derive(Debug, Parser)]
#[command(name = "decoq", version, about = "Decoherence-onset time scales")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config (not needed by fig1).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; for fig1 the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep worker threads (default: logical cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn load(path: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    let path = path.ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn emit(text: &str, out: Option<&Path>, cfg: Option<&ExperimentConfig>) -> Result<(), CliError> {
    let target = out.map(Path::to_path_buf).or_else(|| cfg.and_then(|c| c.output.path.as_ref().map(PathBuf::from)));
    match target {
        Some(p) => std::fs::write(&p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(args: &Args) -> Result<(), CliError> {
    apply_dim_cap_env()?;
    if matches!(args.workers, Some(0)) {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    let out = args.out.as_deref();
    match args.command {
        Command::Td => {
            let cfg = load(args.config.as_deref())?;
            let r = cmd_td(&cfg)?;
            emit(&report::to_json(&Report::Td(r)), out, Some(&cfg))
        }
        Command::Simulate => {
            let cfg = load(args.config.as_deref())?;
            let sim = cmd_simulate(&cfg)?;
            let text = match cfg.output.format {
                Format::Csv => report::series_csv(&sim.series),
                Format::Json => report::to_json(&Report::Series(sim.report(&cfg.model))),
            };
            emit(&text, out, Some(&cfg))?;
            for w in &sim.series.meta.warnings {
                eprintln!("warning: {w}");
            }
            sim.check_truncation()
        }
        Command::Validate => {
            let cfg = load(args.config.as_deref())?;
            let r = cmd_validate(&cfg)?;
            let verdict = r.verdict;
            let advice = r.advice.join("; ");
            emit(&report::to_json(&Report::Validate(r)), out, Some(&cfg))?;
            match verdict {
                Verdict::Pass => Ok(()),
                Verdict::Fail => Err(CliError::Validation(advice)),
            }
        }
        Command::Fig1 => {
            let dir = out.unwrap_or(Path::new("."));
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
            for curve in cmd_fig1()? {
                let path = dir.join(format!("{}.csv", curve.name));
                emit(&report::series_csv(&curve.simulation.series), Some(&path), None)?;
                match curve.simulation.estimate.crossing.time() {
                    Some(t) => eprintln!("{}: s(t) reaches {} at t = {t:.6}", curve.name, curve.simulation.estimate.eps_s),
                    None => eprintln!("{}: threshold not reached", curve.name),
                }
                curve.simulation.check_truncation()?;
            }
            Ok(())
        }
        Command::Sweep => {
            let cfg = load(args.config.as_deref())?;
            let r = cmd_sweep(&cfg, args.workers)?;
            let text = match cfg.output.format {
                Format::Csv => report::sweep_csv(&r),
                Format::Json => report::to_json(&Report::Sweep(r.clone())),
            };
            emit(&text, out, Some(&cfg))?;
            for (name, slope) in [("td_full", r.slopes.td_full), ("td_strong", r.slopes.td_strong), ("td_weak", r.slopes.td_weak)] {
                if let Some(s) = slope {
                    eprintln!("log-log slope of {name}: {s:.6}");
                }
            }
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("decoq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
