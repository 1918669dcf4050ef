use std::process::ExitCode;

use clap::Parser;
use persuasion_cli::{execute, write_files, Cli, EXIT_PRECONDITION};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = execute(&cli);
    print!("{}", output.stdout);
    eprint!("{}", output.stderr);
    if let Some(dir) = &cli.out {
        if let Err(e) = write_files(dir, &output.files) {
            eprintln!("error: cannot write to {}: {e}", dir.display());
            return ExitCode::from(EXIT_PRECONDITION);
        }
    }
    ExitCode::from(output.code)
}
