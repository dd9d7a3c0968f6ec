use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(jobmover_sim::cli::run() as u8)
}
