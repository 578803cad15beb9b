use std::process::ExitCode;

fn main() -> ExitCode {
    sface_cli::main_entry()
}
