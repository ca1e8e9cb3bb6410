use clap::Parser;

fn main() {
    std::process::exit(circkde::cli::run(circkde::cli::Cli::parse()));
}
