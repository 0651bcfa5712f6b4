//! `vistile`: tiling plans, tile preprocessing, deterministic forward
//! traces, training manifests, schedule validation, and extraction
//! evaluation, over plain JSON/JSONL/CSV artifacts.
//!
//! Exit codes: 0 success, 1 operational or validation failure, 2 usage
//! error. Every failure prints one `error: ...` line to stderr.

mod args;
mod commands;
mod failure;
mod output;
mod settings;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command};
use crate::failure::Failure;
use crate::settings::Settings;

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let line = e
                .to_string()
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid invocation")
                .trim()
                .to_string();
            let line = line.strip_prefix("error: ").unwrap_or(&line);
            eprintln!("error: {line}");
            return 2;
        }
    };

    let settings = match Settings::load(cli.config.as_deref()) {
        Ok(s) => s,
        Err(f) => return fail(&f),
    };
    let outcome = match cli.command {
        Command::Plan(a) => commands::plan_cmd(a, settings),
        Command::Preprocess(a) => commands::preprocess_cmd(a, settings),
        Command::Forward(a) => commands::forward_cmd(a, settings),
        Command::Mixture(a) => commands::mixture_cmd(a, settings),
        Command::Schedule(a) => commands::schedule_cmd(a, settings),
        Command::Eval(a) => commands::eval_cmd(a, settings),
        Command::Report(a) => commands::report_cmd(a, settings),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => fail(&f),
    }
}

fn fail(f: &Failure) -> i32 {
    eprintln!("error: {}", f.message());
    f.exit_code()
}
