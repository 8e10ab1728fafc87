use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use kgwalk_cli::{ablate, evaluate, prepare, train_embedding, train_policy, CliError, ExperimentConfig, KEYS};

const COMMANDS: &[(&str, &str)] = &[
    ("prepare", "index the raw splits, drop held-out facts from train, write stats"),
    ("train-embedding", "train the reward-shaping scorer"),
    ("train-policy", "train one walk policy per seed"),
    ("evaluate", "rank a split with a trained policy or scorer"),
    ("ablate", "train and compare the full, -rs and -ad variants"),
];

fn cli() -> Command {
    let mut cmd = Command::new("kgwalk")
        .about("Multi-hop query answering with reward-shaped, action-dropout walkers")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about) in COMMANDS {
        let mut sub = Command::new(*name).about(*about).arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("key = value configuration file; flags override it"),
        );
        for (key, default, doc) in KEYS {
            sub = sub.arg(
                Arg::new(*key)
                    .long(key.replace('_', "-"))
                    .value_name("VALUE")
                    .action(ArgAction::Set)
                    .help(format!("{doc} [default: {default}]")),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn resolve(m: &ArgMatches) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match m.get_one::<PathBuf>("config") {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    for (key, _, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    let cfg = cfg.resolve()?;
    log::info!("resolved configuration:\n{}", cfg.echo());
    Ok(cfg)
}

fn run(name: &str, m: &ArgMatches) -> Result<(), CliError> {
    let cfg = resolve(m)?;
    match name {
        "prepare" => {
            let stats = prepare(&cfg)?;
            println!("{}\n{}", kgwalk::graph::GraphStats::TSV_HEADER, stats.tsv_row());
        }
        "train-embedding" => {
            train_embedding(&cfg)?;
        }
        "train-policy" => {
            for r in train_policy(&cfg)? {
                println!("seed {}\ttest MRR {:.1}\tHits@10 {:.1}", r.seed, 100.0 * r.test[0], 100.0 * r.test[3]);
            }
        }
        "evaluate" => {
            print!("{}", evaluate(&cfg)?.summary_tsv());
        }
        "ablate" => {
            for r in ablate(&cfg)? {
                println!("{}\tdev MRR {:.1}", r.variant.as_str(), 100.0 * r.dev[0]);
            }
        }
        _ => unreachable!("clap restricts subcommands"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { CliError::EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    match run(name, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
