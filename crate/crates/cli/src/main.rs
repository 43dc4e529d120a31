use std::process::ExitCode;

fn main() -> ExitCode {
    perstab::cli::run(std::env::args_os())
}
