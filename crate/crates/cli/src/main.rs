use clap::Parser;
use tab2bot_cli::commands::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(f) = run(Cli::parse()) {
        eprintln!("error: {}", f.message);
        std::process::exit(f.code);
    }
}
