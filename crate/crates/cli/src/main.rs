use clap::Parser;

fn main() {
    let cli = waveguide_cli::Cli::parse();
    std::process::exit(waveguide_cli::run(cli));
}
