use std::process::ExitCode;

fn main() -> ExitCode {
    yolokit::cli::run()
}
