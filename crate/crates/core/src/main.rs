use clap::Parser;

fn main() {
    let cli = fqlab::cli::Cli::parse();
    std::process::exit(fqlab::cli::run(cli));
}
