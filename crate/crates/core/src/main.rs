use clap::Parser;

use thinhom::cli::{run, Cli};

fn main() {
    std::process::exit(run(&Cli::parse()));
}
