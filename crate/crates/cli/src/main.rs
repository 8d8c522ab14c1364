//! `mzi`: command-line driver for the interferometer engines.
//!
//! Exit status: 0 success, 2 usage error, 3 invalid input, 4 I/O failure.

mod args;
mod commands;
mod format;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{execute, Failure, Paths};
use manifest::RunManifest;

fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn run(cmd: &Command, paths: &Paths) -> Result<(), Failure> {
    let report = execute(cmd, paths)?;
    let output = cmd
        .output()
        .expect("runnable commands carry output options");
    let mut outputs = Vec::new();
    outputs.extend(output.out.clone());
    outputs.extend(report.extra_outputs.iter().cloned());
    let manifest = RunManifest::new(cmd, report.seed, outputs);
    let body = if output.json {
        let doc = serde_json::json!({ "manifest": manifest, "result": report.result });
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    } else if output.csv {
        report.csv
    } else {
        report.text
    };
    print!("{body}");
    if let Some(out) = &output.out {
        paths.write(out, body.as_bytes())?;
        paths.write(&sidecar(out), manifest.to_json().as_bytes())?;
    }
    Ok(())
}

fn replay(manifest_path: &Path, out_dir: Option<PathBuf>) -> Result<(), Failure> {
    let text = fs::read_to_string(manifest_path)
        .map_err(|e| Failure::Io(format!("{}: {e}", manifest_path.display())))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| Failure::Validation(format!("{}: {e}", manifest_path.display())))?;
    if manifest.tool_version != manifest::TOOL_VERSION {
        eprintln!(
            "warning: manifest was written by {}, replaying with {}",
            manifest.tool_version,
            manifest::TOOL_VERSION
        );
    }
    let cmd = manifest.command().map_err(Failure::Validation)?;
    run(&cmd, &Paths { redirect: out_dir })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot start {threads} threads: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match &cli.command {
        Command::Replay(a) => replay(&a.manifest, a.out_dir.clone()),
        cmd => run(cmd, &Paths::default()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
