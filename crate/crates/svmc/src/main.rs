use std::process::ExitCode;

fn main() -> ExitCode {
    match svmc::cli::run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(svmc::cli::exit_code(&e) as u8)
        }
    }
}
