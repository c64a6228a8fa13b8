use clap::Parser;
use rank2sr::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(Cli::parse()));
}
