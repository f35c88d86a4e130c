use clap::Parser;
use rfpuf::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(&cli) {
        eprintln!("rfpuf: {}", e);
        std::process::exit(e.exit_code());
    }
}
