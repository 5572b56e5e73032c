use clap::Parser;

fn main() {
    let cli = ccd_core::cli::Cli::parse();
    std::process::exit(ccd_core::cli::run(cli));
}
