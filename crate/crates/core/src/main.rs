use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};

use thz_fdrl::experiment::{
    emit_csv, run_monte_carlo, self_check, sweep, ExperimentConfig, Method, MonteCarloResult, SweepAxis, SweepPoint,
};
use thz_fdrl::{Error, Result};

fn common_args(cmd: Command) -> Command {
    let cmd = cmd
        .arg(Arg::new("config").long("config").value_name("FILE").help("key = value config file"))
        .arg(
            Arg::new("out")
                .long("out")
                .value_name("DIR")
                .help("directory for traces.csv and summary.csv"),
        );
    ExperimentConfig::KEYS.iter().fold(cmd, |cmd, key| {
        cmd.arg(
            Arg::new(*key)
                .long(*key)
                .value_name("VALUE")
                .help(format!("override config key '{key}'")),
        )
    })
}

fn cli() -> Command {
    Command::new("thz-fdrl")
        .about("Federated DDPG beam search for multi-cell THz networks")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(common_args(Command::new("run").about("Monte Carlo runs of the configured method")))
        .subcommand(
            common_args(Command::new("sweep").about("Monte Carlo runs along one parameter axis"))
                .arg(
                    Arg::new("axis")
                        .long("axis")
                        .required(true)
                        .value_parser(["antennas", "cells", "neurons", "upload_ratio", "distance"]),
                )
                .arg(
                    Arg::new("values")
                        .long("values")
                        .required(true)
                        .value_name("V1,V2,..")
                        .help("comma-separated axis values; write neuron pairs as 30/30"),
                ),
        )
        .subcommand(
            common_args(Command::new("baseline").about("Compare non-federated methods on the same scenarios")).arg(
                Arg::new("methods")
                    .long("methods")
                    .value_name("M1,M2,..")
                    .default_value("zf,mmse,mrt,random"),
            ),
        )
        .subcommand(common_args(Command::new("check").about("Validate the configuration and run numerical self-checks")))
}

fn resolve_config(m: &ArgMatches) -> Result<ExperimentConfig> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(path) => ExperimentConfig::load(&PathBuf::from(path))?,
        None => ExperimentConfig::default(),
    };
    for key in ExperimentConfig::KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(label: &str, r: &MonteCarloResult) {
    println!(
        "{label}: mean {:.6} median {:.6} std {:.6} over {} runs, {:.0} bytes uploaded per run",
        r.stats.mean,
        r.stats.median,
        r.stats.std,
        r.runs.len(),
        r.mean_bytes_uploaded
    );
}

fn finish(m: &ArgMatches, points: &[SweepPoint]) -> Result<()> {
    if let Some(dir) = m.get_one::<String>("out") {
        emit_csv(&PathBuf::from(dir), points)?;
        println!("wrote {dir}/traces.csv and {dir}/summary.csv");
    }
    Ok(())
}

fn split_values(s: &str) -> Vec<String> {
    s.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect()
}

fn dispatch(matches: &ArgMatches) -> Result<()> {
    match matches.subcommand() {
        Some(("run", m)) => {
            let cfg = resolve_config(m)?;
            let result = run_monte_carlo(&cfg)?;
            report(cfg.method.name(), &result);
            finish(m, &[SweepPoint { axis_value: cfg.method.name().into(), result }])
        }
        Some(("sweep", m)) => {
            let cfg = resolve_config(m)?;
            let axis = SweepAxis::parse(m.get_one::<String>("axis").expect("required"))?;
            let values = split_values(m.get_one::<String>("values").expect("required"));
            if values.is_empty() {
                return Err(Error::Config("--values lists no values".into()));
            }
            let points = sweep(&cfg, axis, &values)?;
            for p in &points {
                report(&p.axis_value, &p.result);
            }
            finish(m, &points)
        }
        Some(("baseline", m)) => {
            let base = resolve_config(m)?;
            let methods = split_values(m.get_one::<String>("methods").expect("defaulted"))
                .iter()
                .map(|s| s.parse::<Method>())
                .collect::<Result<Vec<_>>>()?;
            let mut points = Vec::new();
            for method in methods {
                let mut cfg = base.clone();
                cfg.method = method;
                let result = run_monte_carlo(&cfg)?;
                report(method.name(), &result);
                points.push(SweepPoint { axis_value: method.name().into(), result });
            }
            finish(m, &points)
        }
        Some(("check", m)) => {
            let cfg = resolve_config(m)?;
            print!("{}", cfg.to_text());
            for line in self_check(&cfg)? {
                println!("ok: {line}");
            }
            Ok(())
        }
        _ => unreachable!("subcommand is required"),
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    match dispatch(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
