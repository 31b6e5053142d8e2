use clap::Parser;
use ludict_cli::commands::{run, Cli};
use ludict_cli::error::exit_code;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(exit_code(&e));
    }
}
