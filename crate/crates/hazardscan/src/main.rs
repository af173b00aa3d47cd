use std::process::ExitCode;

fn main() -> ExitCode {
    hazardscan::cli::main()
}
