use std::io::Write as _;

fn main() {
    let mut stdout = std::io::stdout();
    let code = qpm_cli::run(std::env::args_os(), &mut stdout);
    let _ = stdout.flush();
    std::process::exit(code);
}
