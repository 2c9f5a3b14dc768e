use clap::Parser;

fn main() {
    let cli = bicluster::cli::Cli::parse();
    if let Err(e) = bicluster::cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
