use std::process::ExitCode;

fn main() -> ExitCode {
    match gfm_lab::cli::run_from(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // clap has already printed usage errors
            if !matches!(e, gfm_lab::Error::Usage(_)) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
