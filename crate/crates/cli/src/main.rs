use std::path::PathBuf;
use std::process::ExitCode;

use actherm::harness::{Config, DirSink, MotorSelector, ScenarioRegistry};
use actherm::Error;
use anyhow::Context;
use clap::{value_parser, Arg, ArgMatches, Command};

fn cli(registry: &ScenarioRegistry) -> Command {
    let mut cmd = Command::new("actherm")
        .about("Thermal model learning, control and replay for tendon-driven actuators")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("PATH")
                .value_parser(value_parser!(PathBuf))
                .help("TOML configuration file"),
        )
        .arg(
            Arg::new("seed")
                .long("seed")
                .global(true)
                .value_parser(value_parser!(u64))
                .help("Override the RNG seed"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .global(true)
                .value_name("DIR")
                .value_parser(value_parser!(PathBuf))
                .help("Artifact directory [default: out/<scenario>]"),
        )
        .arg(
            Arg::new("motor")
                .long("motor")
                .global(true)
                .value_name("ID")
                .help("ec4pole_90w, ec16_60w or a motor spec file"),
        )
        .arg(
            Arg::new("duration")
                .long("duration")
                .global(true)
                .value_name("S")
                .value_parser(value_parser!(f64))
                .help("Override the scenario duration (s)"),
        )
        .subcommand(Command::new("dump-config").about("Print the effective configuration as TOML"));
    for name in registry.names() {
        let scenario = registry.get(name).expect("registered");
        let mut sub = Command::new(name).about(scenario.description());
        if name == "replay" {
            sub = sub.arg(
                Arg::new("input")
                    .value_name("TELEMETRY")
                    .value_parser(value_parser!(PathBuf))
                    .help("CSV with header t,c2,f"),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn build_config(registry: &ScenarioRegistry, name: &str, m: &ArgMatches) -> anyhow::Result<Config> {
    let mut cfg = match m.get_one::<PathBuf>("config") {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = m.get_one::<u64>("seed") {
        cfg.seed = *seed;
    }
    if let Some(motor) = m.get_one::<String>("motor") {
        cfg.motor = motor.parse::<MotorSelector>()?;
    }
    if let Some(duration) = m.get_one::<f64>("duration") {
        if let Ok(scenario) = registry.get(name) {
            scenario.set_duration(&mut cfg, *duration);
        }
    }
    if let Ok(Some(input)) = m.try_get_one::<PathBuf>("input") {
        cfg.replay.input = Some(input.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(registry: &ScenarioRegistry, matches: &ArgMatches) -> anyhow::Result<()> {
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let cfg = build_config(registry, name, sub)?;
    if name == "dump-config" {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let out = sub
        .get_one::<PathBuf>("out")
        .cloned()
        .unwrap_or_else(|| PathBuf::from("out").join(name));
    let mut sink = DirSink::new(&out);
    let report = registry
        .run(name, &cfg, &mut sink)
        .with_context(|| format!("scenario `{name}` failed"))?;
    print!("{report}");
    println!("artifacts: {}", out.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::InvalidArgument(_) | Error::InvalidSpec(_)) => 2,
        Some(Error::Parse { .. }) => 3,
        Some(Error::Io(_) | Error::File { .. } | Error::Csv(_) | Error::Json(_)) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let registry = ScenarioRegistry::with_builtins();
    let matches = cli(&registry).get_matches();
    match run(&registry, &matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
