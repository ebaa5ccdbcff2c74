use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use durdet::{Execution, Hypothesis};
use durdet_cli::output::emit;
#[cfg(feature = "parallel")]
use durdet_cli::CliError;
use durdet_cli::{commands, experiments, Artifact, CliResult, ConfigSources};

#[derive(Parser)]
#[command(name = "durdet", version, about = "Detection of random-duration two-state signals in Gaussian noise")]
struct Cli {
    /// Master seed (run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output files into this directory instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the Monte Carlo kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Fraction of run.runs actually simulated (run.scale).
    #[arg(long, global = true)]
    scale: Option<f64>,
    /// Experiment preset.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Override any config key, e.g. --set model.sigma=12. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run the kernels on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum HypothesisArg {
    H0,
    H1,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Model,
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one observation trace.
    Simulate {
        #[arg(long, value_enum, default_value = "h1")]
        hypothesis: HypothesisArg,
        /// Trace length (defaults to run.horizon).
        #[arg(long)]
        length: Option<usize>,
    },
    /// Log-likelihood ratio trajectory of a trace.
    LrtRun {
        /// CSV with columns `t,x` (or a single `x` column). Generated when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        init_mode: Option<InitArg>,
        /// Also evaluate the brute-force ratio at every t.
        #[arg(long)]
        oracle: bool,
    },
    /// Counts of admissible phase sequences.
    Combinatorics {
        #[arg(long)]
        t_max: Option<usize>,
    },
    /// Empirical ROC at one horizon.
    Roc {
        #[arg(long)]
        t: Option<usize>,
    },
    /// Miss probability at the false-alarm budget for t = 1..T.
    Pmiss,
    /// Least-squares slope of -log P_miss.
    Slope {
        /// Fit only the last run.tail_fraction of the curve.
        #[arg(long)]
        tail: bool,
    },
    /// Monte Carlo estimate of the known-signal error exponent.
    Exponent {
        /// Horizons to evaluate (defaults to run.horizon).
        #[arg(long = "horizon", value_delimiter = ',')]
        horizons: Vec<usize>,
    },
    /// Lower bound on the miss exponent.
    Bound,
    /// Detectability condition for the zero-baseline case.
    Detectability,
    /// Run a preset experiment end to end.
    Reproduce,
    /// Detection report for a measured trace.
    Ingest {
        #[arg(long)]
        input: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        set_threads(n)?;
    }
    let mut src = ConfigSources::new();
    if let Some(path) = &cli.config {
        src = src.read_file(path)?;
    }
    if let Some(p) = &cli.preset {
        src = src.flag("preset", p.as_str());
    }
    if let Some(s) = cli.seed {
        src = src.flag("run.seed", s.to_string());
    }
    if let Some(s) = cli.scale {
        src = src.flag("run.scale", s.to_string());
    }
    if let Some(o) = &cli.out {
        src = src.flag("output.dir", o.display().to_string());
    }
    if let Command::LrtRun { init_mode: Some(m), .. } = &cli.command {
        let v = match m {
            InitArg::Model => "model",
            InitArg::Paper => "paper",
        };
        src = src.flag("run.init_mode", v);
    }
    for a in &cli.set {
        src = src.flag_assignment(a)?;
    }
    let cfg = src.resolve()?;
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };

    let artifacts: Vec<Artifact> = match &cli.command {
        Command::Simulate { hypothesis, length } => {
            let h = match hypothesis {
                HypothesisArg::H0 => Hypothesis::Null,
                HypothesisArg::H1 => Hypothesis::Alternative,
            };
            commands::simulate(&cfg, h, *length)?
        }
        Command::LrtRun { input, oracle, .. } => commands::lrt_run(&cfg, input.as_deref(), *oracle, exec)?,
        Command::Combinatorics { t_max } => commands::combinatorics(&cfg, *t_max)?,
        Command::Roc { t } => commands::roc(&cfg, *t, exec)?,
        Command::Pmiss => commands::pmiss(&cfg, exec)?,
        Command::Slope { tail } => commands::slope(&cfg, *tail, exec)?,
        Command::Exponent { horizons } => commands::exponent(&cfg, horizons, exec)?,
        Command::Bound => commands::bound(&cfg, exec)?,
        Command::Detectability => commands::detectability(&cfg)?,
        Command::Reproduce => experiments::reproduce(&cfg, exec)?,
        Command::Ingest { input } => commands::ingest(&cfg, input, exec)?,
    };

    // Preset runs produce several files and always go to the output directory.
    let to_dir = cli.out.is_some() || matches!(cli.command, Command::Reproduce);
    emit(&artifacts, to_dir.then_some(cfg.output_dir.as_path()))?;
    if to_dir {
        for a in &artifacts {
            eprintln!("wrote {}", cfg.output_dir.join(&a.name).display());
        }
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) -> CliResult<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config(format!("--threads: {e}")))
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_: usize) -> CliResult<()> {
    eprintln!("warning: built without the parallel feature; --threads ignored");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
