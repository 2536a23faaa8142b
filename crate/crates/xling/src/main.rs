use std::process::ExitCode;

use clap::Parser;
use xling::cli::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("XLING_LOG", "error")).init();
    let cli = Cli::parse();
    match xling::commands::run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            // single line, machine-parseable
            let detail = e.to_string().replace('\n', " ");
            eprintln!("ERROR {}: {detail}", e.code());
            ExitCode::FAILURE
        }
    }
}
