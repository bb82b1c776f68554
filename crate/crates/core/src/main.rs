use std::process::ExitCode;

fn main() -> ExitCode {
    let config = match mminf::cli::parse_args(std::env::args_os()) {
        Ok(config) => config,
        Err(err) => {
            let code = err.exit_code();
            let _ = err.print();
            return ExitCode::from(code as u8);
        }
    };
    match mminf::cli::run(&config) {
        Ok(outcome) => {
            eprintln!("{}", outcome.summary);
            eprintln!("wrote {}", outcome.output.display());
            ExitCode::from(outcome.exit_code)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(mminf::cli::EXIT_IO)
        }
    }
}
