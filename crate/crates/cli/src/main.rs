use std::process::ExitCode;

use minmix_cli::config::{parse_args, ParseFailure};
use minmix_cli::run::execute;

fn init_threads() {
    let Ok(v) = std::env::var("MINMIX_THREADS") else { return };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("minmix: MINMIX_THREADS ignored: {e}");
            }
        }
        _ => eprintln!("minmix: MINMIX_THREADS must be a positive integer, got '{v}'"),
    }
}

fn main() -> ExitCode {
    let cfg = match parse_args(std::env::args_os()) {
        Ok(c) => c,
        Err(ParseFailure::Clap(e)) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
        Err(ParseFailure::Config(e)) => {
            eprintln!("minmix: {e}");
            eprintln!("run `minmix --help` for usage");
            return ExitCode::from(1);
        }
    };
    init_threads();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cfg, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("minmix: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
