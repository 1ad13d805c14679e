use clap::Parser;

use cfan_cli::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let invocation: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    match run(cli, invocation) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            log::error!("{e}");
            std::process::exit(1);
        }
    }
}
