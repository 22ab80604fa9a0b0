use clap::Parser;

fn main() {
    let cli = mdimpute_cli::Cli::parse();
    if let Err(e) = mdimpute_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
