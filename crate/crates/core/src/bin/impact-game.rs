use std::io::{self, Write};

fn main() {
    let mut stdout = io::stdout();
    let code = impact_game::cli::run(std::env::args_os(), &mut stdout, &mut io::stderr());
    let _ = stdout.flush();
    std::process::exit(code);
}
