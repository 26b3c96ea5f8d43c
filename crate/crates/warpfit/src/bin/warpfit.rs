use std::process::ExitCode;

fn main() -> ExitCode {
    warpfit::cli::main()
}
