use std::io::Write;

use clap::Parser;
use renewal_lab_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            if !cli.quiet {
                // A closed stdout is not a failure of the run.
                let mut out = std::io::stdout().lock();
                let _ = writeln!(out, "{}: {}", cli.experiment.name(), report.summary);
                for f in &report.files {
                    let _ = writeln!(out, "  wrote {}", f.display());
                }
            }
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.exit_code());
        }
    }
}
