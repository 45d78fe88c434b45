use std::io::Write;

fn main() {
    let out = mqpc::cli::run_args(std::env::args_os());
    if out.code == mqpc::cli::EXIT_OK || out.code == mqpc::cli::EXIT_ABORTED || out.code == mqpc::cli::EXIT_MISMATCH {
        let _ = std::io::stdout().write_all(out.text.as_bytes());
    } else {
        let _ = std::io::stderr().write_all(out.text.as_bytes());
    }
    std::process::exit(out.code);
}
