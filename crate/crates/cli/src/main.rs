//! `gph`: command-line runner for the gph-core experiments.
//!
//! Parameters resolve as defaults, then the `--config` file, then explicit flags. Every
//! run writes its outputs and a `manifest.json` into `--out`. Exit codes: 0 success,
//! 2 validation failure, 3 numerical-guard abort.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};
use serde::Serialize;

mod commands;
mod config;

use commands::{CommandSpec, Outcome, COMMANDS};
use config::{normalize_key, read_config_file, Params};
use gph_core::spectral::ORDERING_VERSION;
use gph_core::Error;

const MANIFEST_SCHEMA: u32 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_GUARD: u8 = 3;

fn cli() -> Command {
    let mut root = Command::new("gph")
        .about("Numerical experiments for the cubic Gross-Pitaevskii hierarchy on the 3-torus")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(Arg::new("config").long("config").global(true).value_name("FILE").help("flat key=value parameter file"))
        .arg(Arg::new("out").long("out").global(true).value_name("DIR").default_value("gph-out").help("output directory"))
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_name("N")
                .value_parser(clap::value_parser!(usize))
                .help("worker threads (falls back to GPH_THREADS, then 1)"),
        )
        .arg(Arg::new("verbose").short('v').long("verbose").global(true).action(ArgAction::Count).help("more logging"));
    for spec in COMMANDS {
        let mut sub = Command::new(spec.name).about(spec.about).after_help(format!("Outputs:\n  {}", spec.columns));
        for k in spec.keys {
            let mut arg = Arg::new(k.name).long(k.name).help(k.help);
            arg = if k.flag {
                arg.action(ArgAction::SetTrue)
            } else {
                let arg = arg.value_name("VALUE");
                match k.default {
                    Some(d) => arg.default_value(d),
                    None => arg,
                }
            };
            sub = sub.arg(arg);
        }
        root = root.subcommand(sub);
    }
    root
}

fn resolve(spec: &CommandSpec, m: &ArgMatches) -> Result<Params, Error> {
    let mut values = BTreeMap::new();
    for k in spec.keys {
        if let Some(d) = k.default {
            values.insert(k.name.to_string(), d.to_string());
        }
    }
    if let Some(path) = m.get_one::<String>("config") {
        for (key, v) in read_config_file(Path::new(path))? {
            if key == "command" {
                if v != spec.name {
                    return Err(Error::Config(format!("config is for `{v}`, not `{}`", spec.name)));
                }
                continue;
            }
            if !spec.keys.iter().any(|k| k.name == key) {
                return Err(Error::Config(format!("`{key}` is not a parameter of {}", spec.name)));
            }
            values.insert(key, v);
        }
    }
    for k in spec.keys {
        if m.value_source(k.name) != Some(ValueSource::CommandLine) {
            continue;
        }
        let v = if k.flag { m.get_flag(k.name).to_string() } else { m.get_one::<String>(k.name).cloned().unwrap_or_default() };
        values.insert(normalize_key(k.name), v);
    }
    Ok(Params::new(values))
}

fn thread_count(m: &ArgMatches) -> Result<usize, Error> {
    let n = match m.get_one::<usize>("threads") {
        Some(&n) => n,
        None => match std::env::var("GPH_THREADS") {
            Ok(s) => s.trim().parse().map_err(|_| Error::Config(format!("GPH_THREADS = `{s}` is not a number")))?,
            Err(_) => 1,
        },
    };
    if n == 0 {
        return Err(Error::Config("thread count must be positive".into()));
    }
    Ok(n)
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    command: &'a str,
    config: &'a BTreeMap<String, String>,
    seed: Option<u64>,
    threads: usize,
    versions: BTreeMap<&'static str, String>,
    wall_time_s: f64,
    status: &'a str,
    error: Option<String>,
    outputs: Vec<String>,
    summary: serde_json::Value,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical_guard() {
        EXIT_GUARD
    } else {
        EXIT_VALIDATION
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { 0 });
        }
    };
    let level = match matches.get_count("verbose") {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let spec = commands::find(name).expect("subcommands come from the table");
    let out = PathBuf::from(sub.get_one::<String>("out").expect("has a default"));

    let setup = (|| {
        let threads = thread_count(sub)?;
        let params = resolve(spec, sub)?;
        std::fs::create_dir_all(&out)?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok::<_, Error>((threads, params))
    })();
    let (threads, params) = match setup {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };

    let start = Instant::now();
    let result = (spec.run)(&params, &out);
    let wall = start.elapsed().as_secs_f64();
    let (status, error, outcome) = match result {
        Ok(o) => ("ok", None, o),
        Err(e) => {
            let status = if exit_code(&e) == EXIT_GUARD { "numerical_guard" } else { "validation_error" };
            (status, Some(e), Outcome { files: Vec::new(), summary: serde_json::Value::Null })
        }
    };
    let versions = BTreeMap::from([
        ("gph", env!("CARGO_PKG_VERSION").to_string()),
        ("mode_ordering", ORDERING_VERSION.to_string()),
    ]);
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA,
        command: spec.name,
        config: params.values(),
        seed: params.opt("seed").ok().flatten(),
        threads,
        versions,
        wall_time_s: wall,
        status,
        error: error.as_ref().map(|e| e.to_string()),
        outputs: outcome.files,
        summary: outcome.summary,
    };
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Format(e.to_string()))
        .and_then(|s| std::fs::write(out.join("manifest.json"), s + "\n").map_err(Error::from));
    if let Err(e) = written {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(EXIT_VALIDATION);
    }
    match error {
        None => ExitCode::SUCCESS,
        Some(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
