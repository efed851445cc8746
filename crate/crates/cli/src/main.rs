use clap::Parser;

use ssep_cli::{execute, resolve, Args};

fn main() {
    let args = Args::parse();
    let code = match resolve(&args).and_then(|r| execute(&r)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ssep: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
