use clap::Parser;

fn main() {
    let cli = qlpen_cli::Cli::parse();
    std::process::exit(qlpen_cli::execute(&cli));
}
