use std::process::ExitCode;

fn main() -> ExitCode {
    ssdfrc_cli::run(std::env::args_os())
}
