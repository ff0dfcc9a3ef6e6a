use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pouch_rig::control::{validate_program, Limits};
use pouch_rig::gateway::{
    load_source, run_headless, serve, ClockMode, ProgramSource, RigConfig, RunError, RunOptions,
};

#[derive(Parser)]
#[command(name = "pouch-rig", version, about = "Pneumatic pouch actuator rig twin")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a program headless and log pressures to CSV.
    Run {
        /// A .seq file or preset:NAME.
        #[arg(long)]
        program: ProgramSource,
        /// Simulated seconds [default: program duration].
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Samples per second.
        #[arg(long)]
        rate: Option<u32>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Serve the console line protocol on 127.0.0.1.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long)]
        config: Option<PathBuf>,
        /// realtime or fast [default: from config, else fast].
        #[arg(long)]
        clock: Option<ClockMode>,
    },
    /// Parse and validate a program without running it.
    Validate {
        #[arg(long)]
        program: ProgramSource,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<RigConfig, ExitCode> {
    match path {
        None => Ok(RigConfig::default()),
        Some(path) => RigConfig::from_file(path).map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }),
    }
}

fn source_label(source: &ProgramSource) -> String {
    match source {
        ProgramSource::File(path) => path.display().to_string(),
        ProgramSource::Preset(name) => format!("preset:{name}"),
    }
}

fn report(source: &ProgramSource, e: &RunError) -> ExitCode {
    match e {
        RunError::Program(diags) => {
            let label = source_label(source);
            for d in diags {
                eprintln!("{label}:{d}");
            }
        }
        other => eprintln!("error: {other}"),
    }
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Run {
            program,
            duration,
            out,
            seed,
            rate,
            config,
        } => {
            let config = match load_config(config.as_ref()) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let options = RunOptions {
                program: program.clone(),
                duration,
                out: out.clone(),
                seed,
                rate,
                config,
            };
            match run_headless(options) {
                Ok(summary) => {
                    println!(
                        "wrote {} rows ({} s) to {}",
                        summary.rows_written,
                        summary.duration,
                        out.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => report(&program, &e),
            }
        }
        Cmd::Serve {
            port,
            config,
            clock,
        } => {
            let mut config = match load_config(config.as_ref()) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(clock) = clock {
                config.clock_mode = clock;
            }
            match serve(config, port) {
                Ok(handle) => {
                    eprintln!("listening on {}", handle.local_addr());
                    handle.wait();
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(3)
                }
            }
        }
        Cmd::Validate { program, config } => {
            let config = match load_config(config.as_ref()) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let parsed = match load_source(&program, config.plant.n_channels) {
                Ok(p) => p,
                Err(e) => return report(&program, &e),
            };
            let diags = validate_program(&parsed, &Limits::from_config(&config.plant));
            if !diags.is_empty() {
                return report(&program, &RunError::Program(diags));
            }
            println!(
                "{}: ok, {} commands over {} s",
                source_label(&program),
                parsed.expand().len(),
                parsed.duration()
            );
            ExitCode::SUCCESS
        }
    }
}
