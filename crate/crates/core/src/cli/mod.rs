//! The `flowdistill` command-line front end.
//!
//! Every configuration key is also a `--kebab-case` flag; `--config FILE`
//! loads `key = value` lines first and flags override them. Exit codes: 0
//! success, 1 usage or configuration error, 2 data error, 3 numeric failure.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::Path;

use clap::{Arg, ArgAction, ArgMatches};

pub use commands::{cmd_bench, cmd_distill, cmd_eval, cmd_gen, cmd_track, heavy_config, Latency};
pub use config::{key_spec, Command, KeySpec, RunConfig, KEYS};

use crate::Error;

const SCHEMAS: &str = "\
Output files:
  gen      NNNNNN.png (16-bit frames), gold/NNNNNN.flo, manifest.txt
  distill  student.ckpt, train_log.csv (epoch,train_loss,val_loss), train_summary.txt,
           timing.csv (epoch,elapsed_seconds)
  eval     metrics.csv (pair,epe), summary.txt, flow/NNNNNN_{pred,gold}.png,
           comparison.txt with --compare
  track    overlay/NNNNNN.png, drift.csv (frame,photometric_error,mesh_drift),
           trajectory.csv (frame,point_id,x,y), track_summary.txt
  bench    bench.csv (model,params,run,seconds), bench_summary.txt";

fn about(cmd: Command) -> &'static str {
    match cmd {
        Command::Gen => "generate a synthetic regime with exact gold flow",
        Command::Distill => "fine-tune the student on a dataset's gold flow",
        Command::Eval => "score a model on the test split, or compare two evaluations",
        Command::Track => "track a mesh through a sequence and report drift",
        Command::Bench => "time the student against a heavier reference network",
    }
}

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn build_cli() -> clap::Command {
    let mut app = clap::Command::new("flowdistill")
        .about("Teacher-student distillation for dense optical flow")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .after_help(SCHEMAS);
    for cmd in Command::ALL {
        let mut sub = clap::Command::new(cmd.name())
            .about(about(cmd))
            .after_help(SCHEMAS)
            .arg(Arg::new("config").long("config").value_name("FILE").help("key = value configuration file"));
        for k in KEYS.iter().filter(|k| k.commands.contains(&cmd)) {
            let help = match k.default {
                Some(d) => format!("{} [default: {d}]", k.help),
                None => k.help.to_string(),
            };
            sub = sub.arg(Arg::new(k.key).long(flag_name(k.key)).value_name("VALUE").action(ArgAction::Set).help(help));
        }
        app = app.subcommand(sub);
    }
    app
}

fn resolve(cmd: Command, m: &ArgMatches) -> crate::Result<RunConfig> {
    let mut cfg = RunConfig::new(cmd);
    if let Some(file) = m.get_one::<String>("config") {
        cfg.apply_file(Path::new(file))?;
    }
    for k in KEYS.iter().filter(|k| k.commands.contains(&cmd)) {
        if let Some(v) = m.get_one::<String>(k.key) {
            cfg.set(k.key, v)?;
        }
    }
    Ok(cfg)
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numeric() {
        3
    } else if matches!(err, Error::InvalidConfig(_)) {
        1
    } else {
        2
    }
}

/// Runs one parsed configuration, honouring `threads`.
pub fn execute(cfg: &RunConfig) -> crate::Result<String> {
    let threads = cfg.usize("threads")?;
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| match cfg.command() {
        Command::Gen => cmd_gen(cfg),
        Command::Distill => cmd_distill(cfg),
        Command::Eval => cmd_eval(cfg),
        Command::Track => cmd_track(cfg),
        Command::Bench => cmd_bench(cfg),
    })
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match build_cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let cmd = Command::ALL.into_iter().find(|c| c.name() == name).expect("registered subcommand");
    let result = resolve(cmd, sub).and_then(|cfg| execute(&cfg));
    match result {
        Ok(report) => {
            print!("{report}");
            if !report.ends_with('\n') {
                println!();
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::InvalidConfig(_)) {
                eprintln!("see `flowdistill {name} --help`");
            }
            exit_code(&e)
        }
    }
}
