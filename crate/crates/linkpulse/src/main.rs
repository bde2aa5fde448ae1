use linkpulse::cli::{self, CliError};

fn main() {
    let code = match cli::run() {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Internal(err)) => {
            eprintln!("error: {err:#}");
            1
        }
    };
    std::process::exit(code);
}
