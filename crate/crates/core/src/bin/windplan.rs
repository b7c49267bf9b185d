use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(windplan::cli::run(std::env::args_os()))
}
