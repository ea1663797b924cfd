use clap::Parser;

use molsrl::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => println!("{}", summary.trim_end()),
        Err(e) => {
            eprintln!("molsrl: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
