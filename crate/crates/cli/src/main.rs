use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hybridkinetics_cli::{
    cmd_bench, cmd_ensemble, cmd_export, cmd_simulate, cmd_validate, CliError, Engine,
    ModelSource, RunConfig,
};

/// Stochastic, deterministic and hybrid simulation of reaction networks.
#[derive(Parser)]
#[command(name = "hybridkinetics", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ModelArgs {
    /// Model file
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
    /// Builtin model: cook, lambda_phage_a, lambda_phage_b
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
}

impl ModelArgs {
    fn source(&self) -> ModelSource {
        match (&self.model, &self.builtin) {
            (Some(p), _) => ModelSource::Path(p.clone()),
            (None, Some(b)) => ModelSource::Builtin(b.clone()),
            (None, None) => unreachable!("clap requires one model source"),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Engine [default: ssa; pdmp for bench]
    #[arg(long, value_enum)]
    engine: Option<Engine>,
    /// Simulation horizon
    #[arg(long = "tmax", default_value_t = 10.0)]
    t_max: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Points on the uniform sampling grid over [0, tmax]
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Ensemble size
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Output CSV (standard output if omitted)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Also write every jump to <out>.jumps.csv
    #[arg(long)]
    record_jumps: bool,
    /// Do not displace continuous species when a hybrid jump fires
    #[arg(long)]
    no_displacement: bool,
    #[arg(long, default_value_t = 1e-6)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-9)]
    atol: f64,
    /// Also write a gnuplot script to <out>.gp
    #[arg(long)]
    gnuplot: bool,
}

impl RunArgs {
    fn config(&self, default_engine: Engine) -> RunConfig {
        RunConfig {
            source: self.model.source(),
            engine: self.engine.unwrap_or(default_engine),
            t_max: self.t_max,
            seed: self.seed,
            samples: self.samples,
            runs: self.runs,
            out: self.out.clone(),
            record_jumps: self.record_jumps,
            displacement: !self.no_displacement,
            rtol: self.rtol,
            atol: self.atol,
            gnuplot: self.gnuplot,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and write it as CSV
    Simulate(RunArgs),
    /// Run independent replicates and write per-time summary statistics
    Ensemble(RunArgs),
    /// Time one engine (--engine, default pdmp) against another (--baseline)
    Bench {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "ssa")]
        baseline: Engine,
        /// Timed repeats per engine
        #[arg(long, default_value_t = 5)]
        repeats: usize,
    },
    /// Parse a model and print classes and conservation laws
    Validate {
        #[command(flatten)]
        model: ModelArgs,
        /// Check requirements of this engine too
        #[arg(long, value_enum)]
        engine: Option<Engine>,
    },
    /// Print a model in canonical form
    Export {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = io::stdout().lock();
    let mut stderr = io::stderr();
    let result = match &cli.command {
        Command::Simulate(run) => cmd_simulate(&run.config(Engine::Ssa), &mut stdout, &mut stderr),
        Command::Ensemble(run) => cmd_ensemble(&run.config(Engine::Ssa), &mut stdout, &mut stderr),
        Command::Bench {
            run,
            baseline,
            repeats,
        } => cmd_bench(
            &run.config(Engine::Pdmp),
            *baseline,
            *repeats,
            &mut stdout,
            &mut stderr,
        )
        .map(|_| ()),
        Command::Validate { model, engine } => cmd_validate(
            &model.source(),
            *engine == Some(Engine::Pdmp),
            &mut stdout,
            &mut stderr,
        ),
        Command::Export { model, out } => cmd_export(&model.source(), out.as_deref(), &mut stdout),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Diagnostics(ds) => {
                    for d in ds {
                        eprintln!("{d}");
                    }
                }
                CliError::Runtime(err) => eprintln!("error: {err:#}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
