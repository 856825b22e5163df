//! `photonlink` command-line tool.
//!
//! Exit status: 0 success, 2 usage error, 3 numerical failure, 4 no
//! crossover, 1 anything else (I/O).

mod args;
mod commands;
mod output;

use std::fs;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use args::{Cli, Command, ReplayArgs};
use commands::UsageError;
use output::{emit, unix_now, RunManifest, SCHEMA_VERSION, TOOL, VERSION};
use photonlink::Error;

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::InvalidParameter { .. }
                | Error::InvalidFormat(_)
                | Error::BitLength { .. }
                | Error::FrameShape { .. } => 2,
                Error::QuadratureFailed { .. } | Error::UnreachableTarget { .. } => 3,
                Error::NoCrossover { .. } => 4,
            };
        }
    }
    1
}

fn run(command: Command, argv: Vec<String>) -> anyhow::Result<u8> {
    if let Command::Replay(r) = &command {
        return replay(r);
    }
    let started_at = unix_now();
    let outcome = commands::execute(&command)?;
    let output = command
        .output()
        .expect("non-replay commands have output options");
    let text = outcome.report.render(command.name(), output.json);
    let manifest = RunManifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        schema_version: SCHEMA_VERSION,
        command: command.name().into(),
        argv,
        params: outcome.params,
        master_seed: outcome.master_seed,
        output: output.out.clone(),
        started_at,
        finished_at: unix_now(),
    };
    emit(&text, output, Some(&manifest))?;
    Ok(outcome.status)
}

fn replay(r: &ReplayArgs) -> anyhow::Result<u8> {
    let body = fs::read_to_string(&r.manifest)
        .with_context(|| format!("reading `{}`", r.manifest.display()))?;
    let manifest: RunManifest = serde_json::from_str(&body).map_err(|e| {
        UsageError(format!(
            "`{}` is not a run manifest: {e}",
            r.manifest.display()
        ))
    })?;
    if manifest.tool != TOOL {
        return Err(UsageError(format!("manifest was written by `{}`", manifest.tool)).into());
    }
    let mut cli =
        Cli::try_parse_from(std::iter::once(TOOL.to_string()).chain(manifest.argv.iter().cloned()))
            .map_err(|e| UsageError(format!("manifest arguments no longer parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(UsageError("replay manifests cannot be replayed".into()).into());
    }
    if let Some(out) = cli.command.output_mut() {
        out.out = r.out.clone();
    }
    run(cli.command, manifest.argv)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command, argv.into_iter().skip(1).collect()) {
        Ok(status) => ExitCode::from(status),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
