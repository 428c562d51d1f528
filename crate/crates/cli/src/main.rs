use clap::Parser;
use reporter_cli::{run, Cli};

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&argv);
    if let Err(e) = run(&cli, &argv) {
        eprintln!("qreporter: {e}");
        std::process::exit(e.exit_code());
    }
}
