mod args;
mod output;
mod run;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Format};

fn main() -> ExitCode {
    // clap exits with status 2 on parse errors
    let cli = Cli::parse();
    qbound::par::init_from_env();
    let name = run::subcommand_name(&cli.command);
    let (table, ok) = match run::run(&cli) {
        Ok(v) => v,
        Err(f) => {
            eprintln!("{}", f.diagnostic(name));
            return ExitCode::from(f.exit_code() as u8);
        }
    };
    let text = match cli.common.format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    let written = match &cli.common.output {
        Some(path) => std::fs::write(path, text.as_bytes()).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        let f = run::Failure::Input(e);
        eprintln!("{}", f.diagnostic(name));
        return ExitCode::from(2);
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
