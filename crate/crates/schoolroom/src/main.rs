use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(schoolroom::cli::main() as u8)
}
