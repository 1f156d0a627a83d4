use clap::Parser;
use ymh_lab::cli::{run, CliArgs};

fn main() {
    let args = CliArgs::parse();
    std::process::exit(run(&args));
}
