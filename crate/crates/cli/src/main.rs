mod commands;
mod config;
mod error;
mod output;
mod suites;

use std::io::Write;
use std::process::ExitCode;

use error::CliError;

/// Exit status for a run whose verification step failed.
const EXIT_VERIFICATION: u8 = 1;

fn emit_diagnostic(e: &CliError, command: Option<&str>) {
    eprintln!("{}", e.diagnostic(command));
}

fn execute(sub: &str, m: &clap::ArgMatches) -> Result<u8, CliError> {
    let spec = config::spec_for(sub);
    let p = config::Params::resolve(spec, m)?;
    let fmt = output::format(&p, commands::default_format(sub))?;
    let work = || -> Result<_, CliError> {
        let artifact = commands::run(&p)?;
        Ok((output::render(&p, fmt, &artifact)?, artifact.verified))
    };
    let (bytes, verified) = match p.threads()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Numeric(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    match p.out() {
        Some(path) => std::fs::write(&path, &bytes)
            .map_err(|e| CliError::invalid(format!("cannot write {}: {e}", path.display())))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes)?;
            out.flush()?;
        }
    }
    Ok(if verified { 0 } else { EXIT_VERIFICATION })
}

fn main() -> ExitCode {
    let matches = match config::cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if code != 0 {
                let msg = match e.kind() {
                    clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => "no command given".to_string(),
                    _ => {
                        let text = e.render().to_string();
                        text.lines().next().unwrap_or_default().trim_start_matches("error: ").to_string()
                    }
                };
                emit_diagnostic(&CliError::invalid(msg), None);
            }
            return ExitCode::from(code as u8);
        }
    };
    let (sub, m) = matches.subcommand().expect("subcommand is required");
    match execute(sub, m) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            emit_diagnostic(&e, Some(sub));
            ExitCode::from(e.exit_code())
        }
    }
}
