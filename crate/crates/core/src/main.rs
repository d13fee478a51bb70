use clap::Parser;

use phidrift::cli::{run, Cli};

fn main() {
    std::process::exit(run(&Cli::parse()));
}
