use std::process::ExitCode;

fn main() -> ExitCode {
    let result = phasebell::cli::configure_threads()
        .and_then(|()| phasebell::cli::run(std::env::args_os().collect(), &mut std::io::stdout()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phasebell: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
