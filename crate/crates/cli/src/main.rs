use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(trust_pcl_cli::run(std::env::args_os()))
}
