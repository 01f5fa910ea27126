use clap::Parser;
use mfrep::cli::{run, Cli, ExitCode, OUT_ENV};

fn main() {
    let cli = Cli::parse();
    let outcome = run(&cli, std::env::var_os(OUT_ENV).map(Into::into));
    if outcome.code == ExitCode::Ok {
        println!("{}", outcome.message);
    } else {
        eprintln!("{}", outcome.message);
    }
    std::process::exit(outcome.code as i32);
}
