use std::process::ExitCode;

use fkg::config::EnvOverrides;

fn main() -> ExitCode {
    let env = match EnvOverrides::from_env() {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: invalid environment: {e}");
            return ExitCode::from(1);
        }
    };
    let code = fkg::cli::run(std::env::args_os(), &env, &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code as u8)
}
