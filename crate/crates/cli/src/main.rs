mod args;
mod commands;
mod config;
mod error;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgMatches, CommandFactory, FromArgMatches};

use crate::args::Cli;
use crate::error::{CliError, CliResult};

fn command() -> clap::Command {
    fn override_self(cmd: clap::Command) -> clap::Command {
        let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_owned()).collect();
        let mut cmd = cmd.args_override_self(true);
        for n in names {
            cmd = cmd.mut_subcommand(n, override_self);
        }
        cmd
    }
    override_self(Cli::command())
}

fn subcommand_path(m: &ArgMatches) -> Vec<String> {
    let mut path = Vec::new();
    let mut cur = m;
    while let Some((name, sub)) = cur.subcommand() {
        path.push(name.to_owned());
        cur = sub;
    }
    path
}

enum Parsed {
    Run(Box<Cli>),
    Exit(ExitCode),
}

fn parse(argv: Vec<OsString>) -> CliResult<Parsed> {
    let cmd = command();
    let usage = |e: clap::Error| -> CliResult<Parsed> {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp
            | ErrorKind::DisplayVersion
            | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                let _ = e.print();
                Ok(Parsed::Exit(
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        ExitCode::from(2)
                    } else {
                        ExitCode::SUCCESS
                    },
                ))
            }
            _ => Err(CliError::usage(first_line(&e.to_string()))),
        }
    };
    let argv = match config::find_config(&argv)? {
        None => argv,
        Some(file) => {
            // A first pass only needs the subcommand path, so required flags
            // that the config file supplies may still be missing.
            let path = match cmd.clone().ignore_errors(true).try_get_matches_from(&argv) {
                Ok(m) => subcommand_path(&m),
                Err(e) => return usage(e),
            };
            let flags = config::config_flags(&PathBuf::from(file))?;
            config::splice(&argv, &path, flags)
        }
    };
    let matches = match cmd.try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => return usage(e),
    };
    Cli::from_arg_matches(&matches)
        .map(|cli| Parsed::Run(Box::new(cli)))
        .map_err(|e| CliError::usage(first_line(&e.to_string()).to_owned()))
}

fn first_line(s: &str) -> &str {
    let s = s.trim_start_matches("error: ");
    s.lines().next().unwrap_or("").trim()
}

fn report_peak_rss() {
    if std::env::var_os("QSCAN_REPORT_PEAK_RSS").is_some_and(|v| v == "1") {
        // Linux only; elsewhere nothing is printed.
        if let Ok(status) = std::fs::read_to_string("/proc/self/status") {
            if let Some(line) = status.lines().find(|l| l.starts_with("VmHWM:")) {
                let kb = line.split_whitespace().nth(1).unwrap_or("0");
                eprintln!("peak_rss_kb={kb}");
            }
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let result = parse(argv).and_then(|p| match p {
        Parsed::Exit(code) => Ok(Some(code)),
        Parsed::Run(cli) => commands::dispatch(cli.command).map(|()| None),
    });
    report_peak_rss();
    match result {
        Ok(Some(code)) => code,
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_line());
            ExitCode::from(e.category as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_is_consistent() {
        command().debug_assert();
    }

    #[test]
    fn later_flags_override_earlier_ones() {
        let argv: Vec<OsString> = [
            "qscan", "lm", "train", "--corpus", "c.txt", "--order", "2", "--out", "m", "--order", "4",
        ]
        .iter()
        .map(OsString::from)
        .collect();
        let Ok(Parsed::Run(cli)) = parse(argv) else {
            panic!("parse failed")
        };
        let args::Command::Lm(args::LmCommand::Train(a)) = cli.command else {
            panic!("wrong command")
        };
        assert_eq!(a.order, 4);
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        let argv: Vec<OsString> = ["qscan", "score", "--bogus"].iter().map(OsString::from).collect();
        let Err(e) = parse(argv) else {
            panic!("accepted unknown flag")
        };
        assert_eq!(e.category, error::Category::Usage);
    }
}
