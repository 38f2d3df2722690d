use std::process::ExitCode;

fn main() -> ExitCode {
    qlmass::cli::main_with_args(std::env::args_os())
}
