use std::io::Write;

fn main() {
    let mut out = impdde::cli::Output::default();
    let code = impdde::cli::run(std::env::args_os(), &mut out);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    let _ = std::io::stdout().flush();
    std::process::exit(code);
}
