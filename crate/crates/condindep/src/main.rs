use std::process::ExitCode;

fn main() -> ExitCode {
    condindep::cli::run()
}
