use clap::Parser;
use enso_mz_cli::error::{EXIT_OK, EXIT_USAGE};
use enso_mz_cli::Cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let result = enso_mz_cli::run(&cli);
    enso_mz_cli::report(&result);
    std::process::exit(enso_mz_cli::exit_code(&result));
}
