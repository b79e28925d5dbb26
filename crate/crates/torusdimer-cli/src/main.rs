use std::io::{self, Write};

fn main() {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let code = torusdimer_cli::run(std::env::args_os(), &mut out, &mut io::stderr());
    let _ = out.flush();
    std::process::exit(code);
}
