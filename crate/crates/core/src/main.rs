use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(oadesigner::cli::run(std::env::args_os()))
}
