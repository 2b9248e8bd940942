use clap::Parser;

fn main() {
    let cli = eigenlocal::cli::Cli::parse();
    std::process::exit(eigenlocal::cli::run(cli));
}
