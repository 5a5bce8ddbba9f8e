use clap::Parser;
use regdir_cli::{execute, Args};

fn main() {
    let args = Args::parse();
    std::process::exit(execute(&args, &mut std::io::stderr()));
}
