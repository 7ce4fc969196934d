mod args;
mod commands;
mod config;
mod error;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::de::DeserializeOwned;
use serde::Serialize;

use args::{Cli, Command};
use error::{CliError, CliResult};
use manifest::{config_hash, now_unix, RunManifest};

/// Run one command with its effective options and record the manifest.
fn run<T, F>(name: &str, opts: &T, out: &Path, seed: u64, body: F) -> CliResult<()>
where
    T: Serialize,
    F: FnOnce(&T) -> CliResult<commands::Outputs>,
{
    let started = now_unix();
    let outputs = body(opts)?;
    let args = serde_json::to_value(opts)?;
    std::fs::create_dir_all(out)?;
    RunManifest {
        command: name.to_string(),
        config_hash: config_hash(&args),
        seed,
        started_unix: started,
        finished_unix: now_unix(),
        outputs,
        version: env!("CARGO_PKG_VERSION").to_string(),
        args,
    }
    .write(out)
}

fn with_out<T: Serialize + DeserializeOwned>(value: serde_json::Value, out: Option<&PathBuf>) -> CliResult<T> {
    let mut value = value;
    if let Some(o) = out {
        value["out"] = serde_json::json!(o);
    }
    Ok(serde_json::from_value(value)?)
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let cfg = cli.config.as_deref();
    match &cli.command {
        Command::Simulate(a) => {
            let a = config::overlay(a, cfg)?;
            run("simulate", &a, &a.out, a.seed, commands::simulate)
        }
        Command::Fit(a) => {
            let a = config::overlay(a, cfg)?;
            run("fit", &a, &a.out, a.model.seed, commands::fit)
        }
        Command::Identify(a) => {
            let a = config::overlay(a, cfg)?;
            run("identify", &a, &a.out, a.seed, commands::identify_cmd)
        }
        Command::Marglik(a) => {
            let a = config::overlay(a, cfg)?;
            run("marglik", &a, &a.out, a.model.seed, commands::marglik)
        }
        Command::Study(a) => {
            let a = config::overlay(a, cfg)?;
            run("study", &a, &a.out, a.seed, commands::study)
        }
        Command::Replay(r) => {
            let m = RunManifest::read(&r.manifest)?;
            let out = r.out.as_ref();
            match m.command.as_str() {
                "simulate" => {
                    let a: args::SimulateArgs = with_out(m.args, out)?;
                    run("simulate", &a, &a.out, a.seed, commands::simulate)
                }
                "fit" => {
                    let a: args::FitArgs = with_out(m.args, out)?;
                    run("fit", &a, &a.out, a.model.seed, commands::fit)
                }
                "identify" => {
                    let a: args::IdentifyArgs = with_out(m.args, out)?;
                    run("identify", &a, &a.out, a.seed, commands::identify_cmd)
                }
                "marglik" => {
                    let a: args::MarglikArgs = with_out(m.args, out)?;
                    run("marglik", &a, &a.out, a.model.seed, commands::marglik)
                }
                "study" => {
                    let a: args::StudyArgs = with_out(m.args, out)?;
                    run("study", &a, &a.out, a.seed, commands::study)
                }
                other => Err(CliError::Usage(format!("manifest has unknown command '{other}'"))),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
