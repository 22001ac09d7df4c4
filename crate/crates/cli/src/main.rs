mod args;

use std::fs;
use std::panic;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use myograph::pipeline::Manifest;
use myograph::signal::save_trial;
use myograph::synth::{make_protocol_dataset, SynthFile};
use myograph::{analyze_session, analyze_trial, Error, ErrorClass, Result, TrialInput};

use args::{Cli, Command};

const THREADS_VAR: &str = "MYOGRAPH_THREADS";

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("{THREADS_VAR} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Invariant(format!("thread pool: {e}")))
}

fn run(command: Command) -> Result<()> {
    configure_threads()?;
    match command {
        Command::Analyze {
            meta,
            signal,
            options,
            out,
        } => {
            let config = options.resolve()?;
            let report = analyze_trial(&signal, &meta, &config)?;
            write(&out, &report.to_json())
        }
        Command::Session { manifest, options, out } => {
            let config = options.resolve()?;
            let manifest = Manifest::load(&manifest)?;
            let report = analyze_session(&manifest.trials, &config)?;
            create_dir(&out)?;
            write(&out.join("session_report.json"), &report.to_json())?;
            for (name, body) in report.csv_tables() {
                write(&out.join(name), &body)?;
            }
            Ok(())
        }
        Command::Synth { spec, protocol, out } => {
            if protocol {
                synth_protocol(&out)
            } else {
                // clap guarantees one of the two
                synth_one(&spec.expect("spec or protocol"), &out)
            }
        }
    }
}

fn synth_one(spec_path: &Path, out: &Path) -> Result<()> {
    let text = read_text(spec_path)?;
    let file: SynthFile =
        serde_json::from_str(&text).map_err(|e| Error::SpecInvalid(format!("{}: {e}", spec_path.display())))?;
    let rec = file.generate()?;
    create_dir(out)?;
    let stem = format!("mvc{:02}_{}", file.mvc_percent, file.condition);
    let (csv, json) = (out.join(format!("{stem}.csv")), out.join(format!("{stem}.json")));
    save_trial(&rec, &csv, &json)?;
    println!("wrote {}", csv.display());
    println!("wrote {}", json.display());
    Ok(())
}

fn synth_protocol(out: &Path) -> Result<()> {
    let files = make_protocol_dataset(out)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    let name = |p: &PathBuf| PathBuf::from(p.file_name().expect("generated file has a name"));
    let manifest = Manifest {
        trials: files
            .chunks(2)
            .map(|pair| TrialInput {
                signal: name(&pair[0]),
                meta: name(&pair[1]),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Invariant(e.to_string()))? + "\n";
    write(&out.join("session.json"), &text)
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Input => 2,
        ErrorClass::Analysis => 3,
        ErrorClass::Internal => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    panic::set_hook(Box::new(|info| eprintln!("error: internal failure: {info}")));
    match panic::catch_unwind(|| run(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            // the message already carries the stage and cause
            eprintln!("error: {err}");
            ExitCode::from(exit_code(err.class()))
        }
        Err(_) => ExitCode::from(4),
    }
}
