use clap::Parser;
use kronpde_cli::cli::{dispatch, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                kronpde::Error::Config(_) => 2,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}
