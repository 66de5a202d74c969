//! `specsense` command-line harness.
//!
//! Every setting can come from a flat `key = value` file (`--config`) or a
//! flag (`--key value`, dashes or underscores); flags win. Exit status is 0
//! on success, 2 when `learn` finishes without learning, 1 on any error.

mod commands;
mod report;
mod settings;
mod threshold_file;

use std::fmt;
use std::panic;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use commands::{CommandSpec, COMMANDS};
use settings::{key, Settings};

#[derive(Debug)]
pub struct CliError(String);

impl CliError {
    pub fn new(msg: impl Into<String>) -> Self {
        CliError(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<specsense::Error> for CliError {
    fn from(e: specsense::Error) -> Self {
        CliError(e.to_string())
    }
}

pub enum Outcome {
    Success,
    /// A clean negative result, e.g. nothing learned.
    Negative,
}

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn subcommand(spec: &CommandSpec) -> Command {
    let mut cmd = Command::new(spec.name).about(spec.about).arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .value_parser(clap::value_parser!(PathBuf))
            .help("Flat key=value settings file"),
    );
    for name in spec.keys {
        let k = key(name).expect("command keys are in the key table");
        let long = flag_name(k.name);
        let mut arg = Arg::new(k.name)
            .long(long)
            .value_name(k.name.to_uppercase())
            .allow_hyphen_values(true)
            .action(ArgAction::Set)
            .help(k.help);
        if k.name.contains('_') {
            arg = arg.alias(k.name);
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

fn cli() -> Command {
    Command::new("specsense")
        .about("Covariance-based spectrum sensing: learning, calibration, detection and sweeps")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .subcommands(COMMANDS.iter().map(subcommand))
}

fn settings_from(spec: &CommandSpec, m: &ArgMatches) -> Result<Settings, CliError> {
    let flags = spec
        .keys
        .iter()
        .filter_map(|k| m.get_one::<String>(k).map(|v| (*k, v.clone())))
        .collect();
    Settings::resolve(
        spec.name,
        spec.keys,
        spec.defaults,
        m.get_one::<PathBuf>("config").map(PathBuf::as_path),
        flags,
    )
}

fn dispatch(args: Vec<std::ffi::OsString>) -> Result<Outcome, CliError> {
    let matches = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let informational = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if informational {
                Ok(Outcome::Success)
            } else {
                Err(CliError::new("invalid command line"))
            };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let spec = COMMANDS
        .iter()
        .find(|c| c.name == name)
        .expect("clap only accepts known subcommands");
    let settings = settings_from(spec, sub)?;
    commands::run(&settings)
}

fn main() -> ExitCode {
    let args: Vec<std::ffi::OsString> = std::env::args_os().collect();
    panic::set_hook(Box::new(|info| eprintln!("specsense: internal error: {info}")));
    match panic::catch_unwind(|| dispatch(args)) {
        Ok(Ok(Outcome::Success)) => ExitCode::SUCCESS,
        Ok(Ok(Outcome::Negative)) => ExitCode::from(2),
        Ok(Err(e)) => {
            eprintln!("specsense: {e}");
            ExitCode::from(1)
        }
        Err(_) => ExitCode::from(1),
    }
}
