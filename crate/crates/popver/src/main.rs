use std::process::ExitCode;

fn main() -> ExitCode {
    let code = popver::cli::run(
        std::env::args_os().skip(1),
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    );
    ExitCode::from(code as u8)
}
