use clap::Parser;
use filtersel_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(err) = filtersel_cli::run(&cli) {
        eprintln!("filtersel: {err}");
        std::process::exit(err.exit_code());
    }
}
