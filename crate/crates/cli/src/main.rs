mod commands;
mod config;
mod error;
mod staging;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, Command};

use config::{Settings, ENV_PREFIX, KEYS};
use error::{CliError, CliResult};
use staging::Staging;

fn cli() -> Command {
    let mut cmd = Command::new("iolrt")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Linear response analysis of input-output economies")
        .after_help(format!(
            "Settings resolve as flags > {ENV_PREFIX}<KEY> environment variables > --config file > defaults.\n\
             Config files hold `key = value` lines with the flag names as keys.\n\
             Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error."
        ))
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .global(true)
                .help("flat key = value settings file"),
        );
    for key in KEYS {
        let help = match key.default {
            Some(d) => format!("{} [default: {d}]", key.help),
            None => key.help.to_string(),
        };
        cmd = cmd.arg(
            Arg::new(key.name)
                .long(key.name)
                .value_name("VALUE")
                .global(true)
                .action(ArgAction::Set)
                .help(help),
        );
    }
    for (name, about) in commands::COMMANDS {
        cmd = cmd.subcommand(Command::new(*name).about(*about));
    }
    cmd
}

fn execute(matches: &clap::ArgMatches) -> CliResult<PathBuf> {
    let (command, sub) = matches.subcommand().expect("subcommand required");
    let mut flags = BTreeMap::new();
    for key in KEYS {
        if let Some(v) = sub.get_one::<String>(key.name) {
            flags.insert(key.name.to_string(), v.clone());
        }
    }
    let config_path = sub
        .get_one::<String>("config")
        .cloned()
        .or_else(|| std::env::var(format!("{ENV_PREFIX}CONFIG")).ok())
        .map(PathBuf::from);
    let settings = Settings::resolve(&flags, config_path.as_deref(), std::env::vars())?;

    let workers: usize = settings.parse("workers")?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {workers} workers: {e}")))?;

    let out_dir = PathBuf::from(settings.require("out")?);
    let mut staging = Staging::new(&out_dir)?;
    pool.install(|| commands::run(command, &settings, &mut staging))?;

    let files = staging.files();
    let manifest = commands::manifest(command, &settings, &files);
    {
        let mut w = staging.create("manifest.json")?;
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        writeln!(w)?;
        let mut w = staging.create("resolved.conf")?;
        w.write_all(settings.to_config_text().as_bytes())?;
    }
    staging.commit()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("IOLRT_LOG", "warn")).init();
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[Usage]: {line}");
            return ExitCode::from(2);
        }
    };
    match execute(&matches) {
        Ok(dir) => {
            log::info!("outputs written to {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
