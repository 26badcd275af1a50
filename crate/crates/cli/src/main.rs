mod commands;
mod config;
mod output;

use std::path::Path;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command as App};

use commands::{Command, Outcome};
use config::{parse_document, CliError, Config};
use output::{to_json, write_atomic};

fn app() -> App {
    let mut app = App::new("nlgibbs")
        .about("Desk-scale quantum-to-classical limits of bosonic Gibbs states")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for cmd in Command::ALL {
        let mut sub = App::new(cmd.name())
            .about(cmd.about())
            .after_help("Numeric keys may also be given in the config file as `key = value`; flags take precedence.\nExit codes: 0 ok, 2 invalid input, 3 numerical failure, 4 property violation.")
            .arg(Arg::new("config").long("config").value_name("PATH").help("plain-text key = value file, # comments"));
        for k in cmd.keys() {
            let flag = k.name.replace('_', "-");
            let default = if k.default.is_empty() { "empty".to_string() } else { k.default.to_string() };
            sub = sub.arg(Arg::new(k.name).long(flag).value_name("VALUE").allow_hyphen_values(true).action(ArgAction::Set).help(format!("{} [default: {default}]", k.help)));
        }
        app = app.subcommand(sub);
    }
    app
}

fn configure(cmd: Command, m: &ArgMatches) -> Result<Config, CliError> {
    let file = match m.get_one::<String>("config") {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::invalid(format!("cannot read config {p}: {e}")))?;
            parse_document(&text)?
        }
        None => Vec::new(),
    };
    let keys = cmd.keys();
    let flags: Vec<(String, String)> = keys.iter().filter_map(|k| m.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone()))).collect();
    let cfg = Config::assemble(&keys, &file, &flags)?;
    if !Path::new(cfg.str("out")).is_dir() {
        return Err(CliError::invalid(format!("out: directory `{}` does not exist", cfg.str("out"))));
    }
    Ok(cfg)
}

fn emit(cmd: Command, cfg: &Config, out: &Outcome) -> Result<(), CliError> {
    let dir = Path::new(cfg.str("out"));
    let format = cfg.str("format");
    let name = cmd.name();
    if format != "json" {
        write_atomic(&dir.join(format!("{name}.csv")), &out.table.to_csv()?)?;
    }
    if format != "csv" {
        let config: serde_json::Map<String, serde_json::Value> = cfg.entries().filter(|(k, _)| *k != "out").map(|(k, v)| (k.to_string(), v.into())).collect();
        let doc = serde_json::json!({ "command": name, "config": config, "result": out.json, "violations": out.violations });
        write_atomic(&dir.join(format!("{name}.json")), &to_json(&doc)?)?;
    }
    write_atomic(&dir.join(format!("{name}.timings.json")), &to_json(&out.timings)?)
}

fn run(m: &ArgMatches) -> Result<i32, CliError> {
    let (name, sub) = m.subcommand().expect("subcommand required");
    let cmd = Command::ALL.into_iter().find(|c| c.name() == name).expect("registered subcommand");
    let cfg = configure(cmd, sub)?;
    let outcome = cmd.run(&cfg)?;
    emit(cmd, &cfg, &outcome)?;
    for v in &outcome.violations {
        eprintln!("property violation: {v}");
    }
    Ok(if outcome.violations.is_empty() { 0 } else { 4 })
}

fn main() -> ExitCode {
    let m = app().get_matches();
    match run(&m) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
