use std::io;
use std::process::ExitCode;
use std::sync::Arc;

use uuis::cli::{self, Context};
use uuis::clock::SystemClock;
use uuis::config::Config;
use uuis::password::Hasher;

fn main() -> ExitCode {
    let config = match Config::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(cli::EXIT_INVALID as u8);
        }
    };
    let ctx = Context { config, clock: Arc::new(SystemClock), hasher: Hasher::default() };
    let code = cli::run(std::env::args_os(), &ctx, &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(code as u8)
}
