mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;

use args::Cli;

pub const EXIT_FAIL: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl From<heston_svi::Error> for Failure {
    fn from(e: heston_svi::Error) -> Self {
        Self {
            code: if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INPUT
            },
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub inputs: serde_json::Value,
    pub outputs: serde_json::Value,
    pub pass: bool,
    pub max_deviation: Option<f64>,
    pub duration_ms: f64,
}

/// What a command produced: CSV text, or a JSON report.
pub enum Output {
    Csv(String),
    Report {
        outputs: serde_json::Value,
        pass: bool,
        max_deviation: Option<f64>,
    },
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("HESTON_SVI_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::input(format!("HESTON_SVI_THREADS={v} is not a positive integer"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::input(e.to_string()))
}

/// The flags that were set, after merging the config file.
fn given_flags(flags: &args::Flags) -> serde_json::Value {
    let mut v = serde_json::to_value(flags).expect("flags serialise");
    if let serde_json::Value::Object(m) = &mut v {
        m.retain(|_, x| !x.is_null());
    }
    v
}

fn emit(path: Option<&std::path::Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::input(format!("writing {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::input(e.to_string()))
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    configure_threads()?;
    let flags = cli.flags.resolve()?;
    let start = Instant::now();
    let output = commands::dispatch(cli.command, &flags)?;
    match output {
        Output::Csv(text) => {
            emit(flags.out.as_deref(), &text)?;
            Ok(0)
        }
        Output::Report {
            outputs,
            pass,
            max_deviation,
        } => {
            let report = RunReport {
                command: cli.command.name(),
                inputs: given_flags(&flags),
                outputs,
                pass,
                max_deviation,
                duration_ms: start.elapsed().as_secs_f64() * 1e3,
            };
            // Going through Value sorts the keys.
            let value = serde_json::to_value(&report).expect("report serialises");
            let mut text = serde_json::to_string_pretty(&value).expect("value serialises");
            text.push('\n');
            emit(flags.out.as_deref(), &text)?;
            Ok(if pass { 0 } else { EXIT_FAIL })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
