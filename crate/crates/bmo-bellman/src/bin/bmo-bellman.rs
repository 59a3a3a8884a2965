use bmo_bellman::cli::{run, Cli};
use clap::Parser;

fn main() {
    std::process::exit(run(&Cli::parse()));
}
