use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(daclyf_cli::run(std::env::args_os()))
}
